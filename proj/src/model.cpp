// SPDX-License-Identifier: Apache-2.0
#include "daggru/model.hpp"

#include <cmath>
#include <stdexcept>

namespace daggru {

void ModelConfig::validate() const {
  if (hidden == 0 || input_dim == 0 || n_labels == 0) {
    throw std::invalid_argument("model config: hidden, input_dim and n_labels must be >= 1");
  }
  if (architecture == Architecture::Dag) {
    if (n_edge_types < 2) {
      throw std::invalid_argument("model config: edge vocabulary needs temporal and UNKNOWN-DEP");
    }
    if (combine != Combine::PerEdgeType && edge_dim == 0) {
      throw std::invalid_argument("model config: edge_dim must be >= 1");
    }
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("model config: dropout must lie in [0, 1)");
  }
}

std::size_t ModelConfig::classifier_width() const {
  return architecture == Architecture::PlainBiGru ? 4 * hidden : 2 * hidden;
}

std::string to_string(Architecture a) { return a == Architecture::Dag ? "dag" : "plain-bigru"; }

std::string to_string(Combine c) {
  switch (c) {
    case Combine::Attention: return "attention";
    case Combine::Averaging: return "averaging";
    case Combine::PerEdgeType: return "per-edge-type";
  }
  return {};
}

Architecture architecture_from_string(const std::string& s) {
  if (s == "dag") return Architecture::Dag;
  if (s == "plain-bigru") return Architecture::PlainBiGru;
  throw std::invalid_argument("unknown architecture '" + s + "'");
}

Combine combine_from_string(const std::string& s) {
  if (s == "attention" || s == "A") return Combine::Attention;
  if (s == "averaging" || s == "B") return Combine::Averaging;
  if (s == "per-edge-type") return Combine::PerEdgeType;
  throw std::invalid_argument("unknown combine variant '" + s + "'");
}

namespace {

template <typename Params, typename Out>
void collect(Params& p, Out& out) {
  const ModelConfig& c = p.config;
  auto add = [&](std::string name, auto& t) { out.emplace_back(std::move(name), &t); };
  auto add_direction = [&](const std::string& prefix, auto& d) {
    add(prefix + ".W_r", d.W_r);
    add(prefix + ".W_z", d.W_z);
    add(prefix + ".W_h", d.W_h);
    add(prefix + ".U_r", d.U_r);
    add(prefix + ".U_z", d.U_z);
    add(prefix + ".U_h", d.U_h);
    add(prefix + ".b_r", d.b_r);
    add(prefix + ".b_z", d.b_z);
    add(prefix + ".b_h", d.b_h);
    if (c.architecture != Architecture::Dag) return;
    if (c.combine != Combine::PerEdgeType) add(prefix + ".U_a", d.U_a);
    if (c.combine != Combine::Averaging) add(prefix + ".w_a", d.w_a);
    if (c.combine == Combine::PerEdgeType)
      for (std::size_t i = 0; i < d.U_e.size(); ++i) add(prefix + ".U_e." + std::to_string(i), d.U_e[i]);
  };
  add_direction("forward", p.forward);
  add_direction("backward", p.backward);
  if (c.architecture == Architecture::Dag && c.combine != Combine::PerEdgeType) {
    add("edge_embeddings", p.edge_embeddings);
  }
  add("classifier.W", p.W_o);
  add("classifier.b", p.b_o);
}

DirectionParams allocate_direction(const ModelConfig& c) {
  const std::size_t h = c.hidden, k = c.input_dim;
  DirectionParams d;
  d.W_r = Tensor({h, k});
  d.W_z = Tensor({h, k});
  d.W_h = Tensor({h, k});
  d.U_r = Tensor({h, h});
  d.U_z = Tensor({h, h});
  d.U_h = Tensor({h, h});
  d.b_r = Tensor({h});
  d.b_z = Tensor({h});
  d.b_h = Tensor({h});
  if (c.architecture == Architecture::Dag) {
    if (c.combine != Combine::PerEdgeType) d.U_a = Tensor({h, h + c.edge_dim});
    if (c.combine != Combine::Averaging) d.w_a = Tensor({h});
    if (c.combine == Combine::PerEdgeType) d.U_e.assign(c.n_edge_types, Tensor({h, h}));
  }
  return d;
}

bool is_bias(const std::string& name) {
  return name.ends_with(".b_r") || name.ends_with(".b_z") || name.ends_with(".b_h") ||
         name == "classifier.b";
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> ModelParams::tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  collect(*this, out);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::tensors() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  collect(*this, out);
  return out;
}

ModelParams ModelParams::zeros_like() const { return allocate_params(config); }

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors()) n += t->size();
  return n;
}

void ModelParams::validate() const {
  config.validate();
  const ModelParams expected = allocate_params(config);
  const auto want = expected.tensors();
  const auto have = tensors();
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (!have[i].second->same_shape(*want[i].second)) {
      throw ShapeError("parameter " + have[i].first + " has shape " +
                       shape_string(have[i].second->shape()) + ", expected " +
                       shape_string(want[i].second->shape()));
    }
    if (!have[i].second->all_finite()) {
      throw ShapeError("parameter " + have[i].first + " holds a non-finite value");
    }
  }
}

ModelParams allocate_params(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  p.forward = allocate_direction(config);
  p.backward = allocate_direction(config);
  if (config.architecture == Architecture::Dag && config.combine != Combine::PerEdgeType) {
    p.edge_embeddings = Tensor({config.n_edge_types, config.edge_dim});
  }
  p.W_o = Tensor({config.n_labels, config.classifier_width()});
  p.b_o = Tensor({config.n_labels});
  return p;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = allocate_params(config);
  Rng rng(derive_seed(seed, 0x1417));
  for (auto& [name, t] : p.tensors()) {
    if (is_bias(name)) continue;
    double bound;
    if (name == "edge_embeddings") {
      bound = 0.1;
    } else {
      const double fan_out = static_cast<double>(t->shape()[0]);
      const double fan_in = t->rank() == 2 ? static_cast<double>(t->shape()[1]) : 1.0;
      bound = std::sqrt(6.0 / (fan_in + fan_out));
    }
    for (auto& v : t->data()) v = rng.uniform(-bound, bound);
  }
  return p;
}

namespace {

BoundDirection bind_direction(Tape& tape, const DirectionParams& d, DirectionParams* g,
                              const ModelConfig& c) {
  auto b = [&](const Tensor& v, Tensor* gv) { return tape.parameter(v, gv); };
  BoundDirection out;
  out.W_r = b(d.W_r, g ? &g->W_r : nullptr);
  out.W_z = b(d.W_z, g ? &g->W_z : nullptr);
  out.W_h = b(d.W_h, g ? &g->W_h : nullptr);
  out.U_r = b(d.U_r, g ? &g->U_r : nullptr);
  out.U_z = b(d.U_z, g ? &g->U_z : nullptr);
  out.U_h = b(d.U_h, g ? &g->U_h : nullptr);
  out.b_r = b(d.b_r, g ? &g->b_r : nullptr);
  out.b_z = b(d.b_z, g ? &g->b_z : nullptr);
  out.b_h = b(d.b_h, g ? &g->b_h : nullptr);
  if (c.architecture == Architecture::Dag) {
    if (c.combine != Combine::PerEdgeType) out.U_a = b(d.U_a, g ? &g->U_a : nullptr);
    if (c.combine != Combine::Averaging) out.w_a = b(d.w_a, g ? &g->w_a : nullptr);
    if (c.combine == Combine::PerEdgeType) {
      for (std::size_t i = 0; i < d.U_e.size(); ++i)
        out.U_e.push_back(b(d.U_e[i], g ? &g->U_e[i] : nullptr));
    }
  }
  return out;
}

}  // namespace

BoundParams bind(Tape& tape, const ModelParams& params, ModelParams* grads) {
  if (grads && !(grads->config == params.config)) {
    throw ShapeError("bind: gradient buffers were allocated for a different config");
  }
  const ModelConfig& c = params.config;
  BoundParams out;
  out.forward = bind_direction(tape, params.forward, grads ? &grads->forward : nullptr, c);
  out.backward = bind_direction(tape, params.backward, grads ? &grads->backward : nullptr, c);
  if (c.architecture == Architecture::Dag && c.combine != Combine::PerEdgeType) {
    out.edge_embeddings =
        tape.parameter(params.edge_embeddings, grads ? &grads->edge_embeddings : nullptr);
  }
  out.W_o = tape.parameter(params.W_o, grads ? &grads->W_o : nullptr);
  out.b_o = tape.parameter(params.b_o, grads ? &grads->b_o : nullptr);
  return out;
}

Var gru_cell(Tape& tape, Var x, Var h_in, const BoundDirection& p) {
  const Var r = tape.sigmoid(
      tape.add(tape.add(tape.matmul(p.W_r, x), tape.matmul(p.U_r, h_in)), p.b_r));
  const Var z = tape.sigmoid(
      tape.add(tape.add(tape.matmul(p.W_z, x), tape.matmul(p.U_z, h_in)), p.b_z));
  const Var candidate = tape.tanh(
      tape.add(tape.add(tape.matmul(p.W_h, x), tape.mul(r, tape.matmul(p.U_h, h_in))), p.b_h));
  return tape.add(tape.mul(tape.one_minus(z), h_in), tape.mul(z, candidate));
}

Combined combine(Tape& tape, std::span<const Incoming> incoming, const BoundDirection& p,
                 Var edge_embeddings, Combine mode) {
  if (incoming.empty()) throw std::invalid_argument("combine: no incoming edges");
  std::vector<Var> rows;
  rows.reserve(incoming.size());
  for (const auto& in : incoming) {
    if (mode == Combine::PerEdgeType) {
      if (in.type >= p.U_e.size()) throw std::out_of_range("combine: edge type has no U_e");
      rows.push_back(tape.tanh(tape.matmul(p.U_e[in.type], in.hidden)));
    } else {
      const Var joined = tape.concat(in.hidden, tape.row(edge_embeddings, in.type));
      rows.push_back(tape.tanh(tape.matmul(p.U_a, joined)));
    }
  }
  Combined out;
  out.rows = tape.stack_rows(rows);
  const Var rows_t = tape.transpose(out.rows);
  if (mode == Combine::Averaging) {
    const std::size_t m = incoming.size();
    out.h_a = tape.matmul(rows_t, tape.constant(Tensor(Shape{m}, 1.0 / static_cast<double>(m))));
  } else {
    out.attention = tape.softmax(tape.tanh(tape.matmul(out.rows, p.w_a)));
    out.h_a = tape.matmul(rows_t, out.attention);
  }
  return out;
}

std::vector<Var> run_direction(Tape& tape, std::span<const Var> inputs,
                               const std::vector<std::vector<IncomingEdge>>& incoming,
                               bool reverse, const BoundDirection& p, Var edge_embeddings,
                               const ModelConfig& config) {
  const std::size_t n = inputs.size();
  if (incoming.size() != n) throw std::invalid_argument("run_direction: graph/sentence size mismatch");
  std::vector<Var> states(n);
  const Var initial = tape.constant(Tensor(Shape{config.hidden}));
  std::vector<Incoming> edges;
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    edges.clear();
    if (incoming[t].empty()) {
      edges.push_back(Incoming{initial, EdgeVocab::kTemporal});
    } else {
      for (const auto& e : incoming[t]) edges.push_back(Incoming{states[e.source], e.type});
    }
    const Var h_a = combine(tape, edges, p, edge_embeddings, config.combine).h_a;
    states[t] = gru_cell(tape, inputs[t], h_a, p);
  }
  return states;
}

std::vector<Var> run_sequential(Tape& tape, std::span<const Var> inputs, bool reverse,
                                const BoundDirection& p) {
  const std::size_t n = inputs.size();
  std::vector<Var> states(n);
  if (n == 0) return states;
  const std::size_t hidden = tape.value(p.b_r).size();
  Var h = tape.constant(Tensor(Shape{hidden}));
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    h = gru_cell(tape, inputs[t], h, p);
    states[t] = h;
  }
  return states;
}

std::vector<Var> embed(Tape& tape, const Sentence& sentence) {
  std::vector<Var> xs;
  xs.reserve(sentence.size());
  for (const auto& tok : sentence.tokens) xs.push_back(tape.constant(Tensor::vector(tok.embedding)));
  return xs;
}

namespace {

Var dropout(Tape& tape, Var v, double rate, Rng* rng) {
  if (!rng || rate <= 0.0) return v;
  const std::size_t n = tape.value(v).size();
  Tensor mask(Shape{n});
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < n; ++i) mask[i] = rng->uniform01() < rate ? 0.0 : keep_scale;
  return tape.mul(v, tape.constant(std::move(mask)));
}

Var classify(Tape& tape, Var rep, const BoundParams& p, const ModelConfig& config, Rng* rng) {
  const Var dropped = dropout(tape, rep, config.dropout, rng);
  return tape.add(tape.matmul(p.W_o, dropped), p.b_o);
}

}  // namespace

std::vector<Var> forward_dag(Tape& tape, const Sentence& sentence, const DagGraph& graph,
                             const BoundParams& p, const ModelConfig& config, Rng* dropout_rng) {
  const auto xs = embed(tape, sentence);
  const auto hf = run_direction(tape, xs, graph.forward, false, p.forward, p.edge_embeddings, config);
  const auto hb = run_direction(tape, xs, graph.backward, true, p.backward, p.edge_embeddings, config);
  std::vector<Var> logits;
  logits.reserve(xs.size());
  for (std::size_t t = 0; t < xs.size(); ++t) {
    logits.push_back(classify(tape, tape.concat(hf[t], hb[t]), p, config, dropout_rng));
  }
  return logits;
}

std::vector<Var> forward_plain_bigru(Tape& tape, const Sentence& sentence, const BoundParams& p,
                                     const ModelConfig& config, Rng* dropout_rng) {
  const auto xs = embed(tape, sentence);
  const auto hf = run_sequential(tape, xs, false, p.forward);
  const auto hb = run_sequential(tape, xs, true, p.backward);
  const std::size_t n = xs.size();
  std::vector<Var> logits;
  logits.reserve(n);
  if (n == 0) return logits;
  const Var summary = tape.concat(hf[n - 1], hb[0]);
  for (std::size_t t = 0; t < n; ++t) {
    const Var rep = tape.concat(tape.concat(hf[t], hb[t]), summary);
    logits.push_back(classify(tape, rep, p, config, dropout_rng));
  }
  return logits;
}

std::vector<Var> forward(Tape& tape, const Sentence& sentence, const DagGraph& graph,
                         const BoundParams& p, const ModelConfig& config, Rng* dropout_rng) {
  if (config.architecture == Architecture::PlainBiGru) {
    return forward_plain_bigru(tape, sentence, p, config, dropout_rng);
  }
  return forward_dag(tape, sentence, graph, p, config, dropout_rng);
}

Var sentence_loss(Tape& tape, std::span<const Var> logits, const Sentence& sentence, double scale) {
  if (logits.size() != sentence.size() || logits.empty()) {
    throw std::invalid_argument("sentence_loss: logits/sentence length mismatch");
  }
  Var total = tape.cross_entropy(logits[0], sentence.tokens[0].gold_label);
  for (std::size_t t = 1; t < logits.size(); ++t) {
    total = tape.add(total, tape.cross_entropy(logits[t], sentence.tokens[t].gold_label));
  }
  return scale == 1.0 ? total : tape.scale(total, scale);
}

std::vector<Tensor> eval_logits(const Sentence& sentence, const EdgeVocab& edges,
                                const ModelParams& params) {
  Tape tape;
  const BoundParams bound = bind(tape, params);
  DagGraph graph;
  if (params.config.architecture == Architecture::Dag) graph = build_dags(sentence, edges);
  const auto logits = forward(tape, sentence, graph, bound, params.config, nullptr);
  std::vector<Tensor> out;
  out.reserve(logits.size());
  for (auto v : logits) out.push_back(tape.value(v));
  return out;
}

LabelId argmax(const Tensor& logits) {
  LabelId best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

std::vector<LabelId> predict(const Sentence& sentence, const EdgeVocab& edges,
                             const ModelParams& params) {
  std::vector<LabelId> out;
  for (const auto& l : eval_logits(sentence, edges, params)) out.push_back(argmax(l));
  return out;
}

}  // namespace daggru
