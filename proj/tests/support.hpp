// SPDX-License-Identifier: Apache-2.0
// Shared fixtures and independent reference implementations for the tests.
// The reference code works on plain std::vector<double> and never touches the
// tape, so agreement with the library is a genuine cross-check.
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "daggru/corpus.hpp"
#include "daggru/gradcheck.hpp"
#include "daggru/graph.hpp"
#include "daggru/model.hpp"
#include "daggru/rng.hpp"
#include "daggru/tape.hpp"

namespace testsupport {

using Vec = std::vector<double>;

inline Vec matvec(const daggru::Tensor& m, const Vec& x) {
  Vec out(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out[r] += m.at(r, c) * x[c];
  return out;
}

inline double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vec ref_gru(const daggru::DirectionParams& p, const Vec& x, const Vec& h) {
  const Vec wr = matvec(p.W_r, x), ur = matvec(p.U_r, h);
  const Vec wz = matvec(p.W_z, x), uz = matvec(p.U_z, h);
  const Vec wh = matvec(p.W_h, x), uh = matvec(p.U_h, h);
  Vec out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double r = ref_sigmoid(wr[i] + ur[i] + p.b_r[i]);
    const double z = ref_sigmoid(wz[i] + uz[i] + p.b_z[i]);
    const double cand = std::tanh(wh[i] + r * uh[i] + p.b_h[i]);
    out[i] = (1.0 - z) * h[i] + z * cand;
  }
  return out;
}

/// Transformed rows for a node's incoming (hidden, edge type) list.
inline std::vector<Vec> ref_rows(const std::vector<std::pair<Vec, std::size_t>>& in,
                                 const daggru::DirectionParams& p, const daggru::Tensor& edge_emb,
                                 daggru::Combine mode) {
  std::vector<Vec> rows;
  for (const auto& [h, type] : in) {
    Vec pre;
    if (mode == daggru::Combine::PerEdgeType) {
      pre = matvec(p.U_e.at(type), h);
    } else {
      Vec joined = h;
      for (std::size_t c = 0; c < edge_emb.cols(); ++c) joined.push_back(edge_emb.at(type, c));
      pre = matvec(p.U_a, joined);
    }
    for (auto& v : pre) v = std::tanh(v);
    rows.push_back(pre);
  }
  return rows;
}

inline Vec ref_softmax(const Vec& s) {
  double mx = s[0];
  for (double v : s) mx = std::max(mx, v);
  double total = 0.0;
  Vec out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) total += out[i] = std::exp(s[i] - mx);
  for (auto& v : out) v /= total;
  return out;
}

struct RefCombined {
  Vec h_a;
  Vec alpha;
};

inline RefCombined ref_combine(const std::vector<std::pair<Vec, std::size_t>>& in,
                               const daggru::DirectionParams& p, const daggru::Tensor& edge_emb,
                               daggru::Combine mode) {
  const auto rows = ref_rows(in, p, edge_emb, mode);
  const std::size_t m = rows.size(), h = rows[0].size();
  RefCombined out;
  if (mode == daggru::Combine::Averaging) {
    out.alpha.assign(m, 1.0 / static_cast<double>(m));
  } else {
    Vec scores(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < h; ++i) scores[j] += rows[j][i] * p.w_a[i];
      scores[j] = std::tanh(scores[j]);
    }
    out.alpha = ref_softmax(scores);
  }
  out.h_a.assign(h, 0.0);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < h; ++i) out.h_a[i] += out.alpha[j] * rows[j][i];
  return out;
}

/// Reference DAG direction: combine over the node's incoming list (a zero
/// state through the temporal type when empty), then the GRU cell.
inline std::vector<Vec> ref_dag_direction(const daggru::Sentence& s,
                                          const std::vector<std::vector<daggru::IncomingEdge>>& graph,
                                          bool reverse, const daggru::DirectionParams& p,
                                          const daggru::Tensor& edge_emb, daggru::Combine mode,
                                          std::size_t hidden) {
  const std::size_t n = s.size();
  std::vector<Vec> states(n);
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    std::vector<std::pair<Vec, std::size_t>> in;
    if (graph[t].empty()) in.emplace_back(Vec(hidden, 0.0), daggru::EdgeVocab::kTemporal);
    for (const auto& e : graph[t]) in.emplace_back(states[e.source], e.type);
    states[t] = ref_gru(p, s.tokens[t].embedding, ref_combine(in, p, edge_emb, mode).h_a);
  }
  return states;
}

inline std::vector<Vec> ref_sequential(const daggru::Sentence& s, bool reverse,
                                       const daggru::DirectionParams& p, std::size_t hidden) {
  const std::size_t n = s.size();
  std::vector<Vec> states(n);
  Vec h(hidden, 0.0);
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    h = ref_gru(p, s.tokens[t].embedding, h);
    states[t] = h;
  }
  return states;
}

inline Vec ref_classify(const daggru::ModelParams& p, const Vec& rep) {
  Vec out = matvec(p.W_o, rep);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += p.b_o[i];
  return out;
}

/// Eval-mode logits computed entirely by the reference loops.
inline std::vector<Vec> ref_logits(const daggru::Sentence& s, const daggru::EdgeVocab& vocab,
                                   const daggru::ModelParams& p) {
  const auto& c = p.config;
  const std::size_t n = s.size();
  std::vector<Vec> f, b;
  if (c.architecture == daggru::Architecture::Dag) {
    const auto g = daggru::build_dags(s, vocab);
    f = ref_dag_direction(s, g.forward, false, p.forward, p.edge_embeddings, c.combine, c.hidden);
    b = ref_dag_direction(s, g.backward, true, p.backward, p.edge_embeddings, c.combine, c.hidden);
  } else {
    f = ref_sequential(s, false, p.forward, c.hidden);
    b = ref_sequential(s, true, p.backward, c.hidden);
  }
  std::vector<Vec> out;
  for (std::size_t t = 0; t < n; ++t) {
    Vec rep = f[t];
    rep.insert(rep.end(), b[t].begin(), b[t].end());
    if (c.architecture == daggru::Architecture::PlainBiGru) {
      rep.insert(rep.end(), f[n - 1].begin(), f[n - 1].end());
      rep.insert(rep.end(), b[0].begin(), b[0].end());
    }
    out.push_back(ref_classify(p, rep));
  }
  return out;
}

inline const std::vector<std::string>& dep_labels() {
  static const std::vector<std::string> labels{"nsubj", "dobj", "amod"};
  return labels;
}

/// Random sentence with tokens in [1, max_tokens], embeddings in [-1, 1] and
/// up to max_deps distinct non-self dependency edges.
inline daggru::Sentence random_sentence(daggru::Rng& rng, std::size_t max_tokens, std::size_t k,
                                        std::size_t n_labels, std::size_t max_deps) {
  daggru::Sentence s;
  const std::size_t n = 1 + rng.below(max_tokens);
  for (std::size_t t = 0; t < n; ++t) {
    daggru::Token tok;
    tok.surface = "w" + std::to_string(t);
    for (std::size_t i = 0; i < k; ++i) tok.embedding.push_back(rng.uniform(-1.0, 1.0));
    tok.gold_label = rng.below(n_labels);
    s.tokens.push_back(tok);
  }
  if (n >= 2) {
    const std::size_t deps = rng.below(max_deps + 1);
    for (std::size_t i = 0; i < deps; ++i) {
      const std::size_t h = rng.below(n);
      std::size_t d = rng.below(n - 1);
      if (d >= h) ++d;
      bool dup = false;
      for (const auto& e : s.dep_edges) dup = dup || (e.head == h && e.dependent == d);
      if (dup) continue;
      s.dep_edges.push_back({h, d, dep_labels()[rng.below(dep_labels().size())]});
    }
  }
  return s;
}

inline daggru::EdgeVocab test_edge_vocab() {
  daggru::EdgeVocab v;
  for (const auto& l : dep_labels()) {
    v.intern(l, daggru::SourceRole::Child);
    v.intern(l, daggru::SourceRole::Parent);
  }
  return v;
}

inline daggru::ModelConfig small_config(daggru::Architecture a, daggru::Combine c,
                                        std::size_t n_edge_types) {
  daggru::ModelConfig cfg;
  cfg.architecture = a;
  cfg.combine = c;
  cfg.hidden = 4;
  cfg.edge_dim = 3;
  cfg.input_dim = 5;
  cfg.n_labels = 3;
  cfg.n_edge_types = n_edge_types;
  cfg.dropout = 0.0;
  return cfg;
}

/// Scales every parameter so the network operates away from saturation.
inline daggru::ModelParams random_params(const daggru::ModelConfig& cfg, std::uint64_t seed,
                                         double lo = -0.8, double hi = 0.8) {
  daggru::ModelParams p = daggru::allocate_params(cfg);
  daggru::Rng rng(seed);
  for (auto& [name, t] : p.tensors())
    for (auto& v : t->data()) v = rng.uniform(lo, hi);
  return p;
}

inline double loss_value(const daggru::Sentence& s, const daggru::DagGraph& g,
                         const daggru::ModelParams& p) {
  daggru::Tape tape;
  const auto bound = daggru::bind(tape, p);
  const auto logits = daggru::forward(tape, s, g, bound, p.config, nullptr);
  return tape.value(daggru::sentence_loss(tape, logits, s)).item();
}

inline daggru::ModelParams loss_gradient(const daggru::Sentence& s, const daggru::DagGraph& g,
                                         const daggru::ModelParams& p) {
  daggru::ModelParams grads = p.zeros_like();
  daggru::Tape tape;
  const auto bound = daggru::bind(tape, p, &grads);
  const auto logits = daggru::forward(tape, s, g, bound, p.config, nullptr);
  tape.backward(daggru::sentence_loss(tape, logits, s));
  return grads;
}

/// Finite-difference check of every parameter of `p` on the summed
/// cross-entropy of `s`.
inline daggru::GradCheckReport check_model_gradients(const daggru::Sentence& s,
                                                     const daggru::EdgeVocab& vocab,
                                                     daggru::ModelParams& p, double tolerance) {
  const auto g = daggru::build_dags(s, vocab);
  const daggru::ModelParams grads = loss_gradient(s, g, p);
  std::vector<daggru::GradCheckTarget> targets;
  auto values = p.tensors();
  auto analytic = grads.tensors();
  for (std::size_t i = 0; i < values.size(); ++i)
    targets.push_back({values[i].first, values[i].second, analytic[i].second});
  return daggru::finite_diff_check([&] { return loss_value(s, g, p); }, targets, 1e-5, tolerance);
}

}  // namespace testsupport
