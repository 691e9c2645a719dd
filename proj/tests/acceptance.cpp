// SPDX-License-Identifier: Apache-2.0
// Acceptance gate. Prints one PASS/FAIL line per criterion. With no
// arguments every criterion runs; `--only N` runs a single one. The exit
// status is nonzero when any selected criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "daggru/cli.hpp"
#include "daggru/stats.hpp"
#include "daggru/studies.hpp"
#include "daggru/synthetic.hpp"
#include "daggru/trainer.hpp"
#include "support.hpp"

using namespace daggru;
namespace ts = testsupport;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = a.size() == b.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

ModelConfig check_config(Architecture a, Combine c, std::size_t n_edge_types) {
  ModelConfig cfg = ts::small_config(a, c, n_edge_types);
  cfg.hidden = 5;
  cfg.input_dim = 5;
  cfg.n_labels = 4;
  return cfg;
}

// 1. Finite-difference gradient checks.
Outcome gradients() {
  const auto start = std::chrono::steady_clock::now();
  const EdgeVocab vocab = ts::test_edge_vocab();
  Rng rng(2024);
  std::vector<Sentence> sentences;
  for (int i = 0; i < 25; ++i) sentences.push_back(ts::random_sentence(rng, 6, 5, 4, 3));
  const std::vector<std::pair<std::string, ModelConfig>> models{
      {"DAG-GRU A", check_config(Architecture::Dag, Combine::Attention, vocab.size())},
      {"DAG-GRU B", check_config(Architecture::Dag, Combine::Averaging, vocab.size())},
      {"BiGRU", check_config(Architecture::PlainBiGru, Combine::Attention, 0)}};
  Outcome out;
  double worst = 0.0;
  std::size_t checked = 0, failures = 0;
  for (const auto& [name, cfg] : models) {
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      ModelParams p = ts::random_params(cfg, 500 + i);
      const auto report = ts::check_model_gradients(sentences[i], vocab, p, 1e-4);
      worst = std::max(worst, report.max_rel_error);
      checked += report.entries.size();
      failures += report.failures;
      if (!report.passed() && out.pass) {
        out.pass = false;
        out.detail += name + " sentence " + std::to_string(i) + " " + report.worst()->name + "; ";
      }
    }
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (seconds >= 120.0) out.pass = false;
  out.detail += std::to_string(checked) + " elements, " + std::to_string(failures) +
                " failures, max rel err " + fmt("%.2e", worst) + ", " + fmt("%.1f s", seconds);
  return out;
}

// 2. Attention invariants.
Outcome attention() {
  const EdgeVocab vocab = ts::test_edge_vocab();
  ModelParams p = ts::random_params(ts::small_config(Architecture::Dag, Combine::Attention, vocab.size()), 77);
  Rng rng(78);
  double worst_sum = 0.0, min_alpha = 1.0, worst_bridge = 0.0;
  for (int call = 0; call < 1000; ++call) {
    for (auto& v : p.forward.w_a.data()) v = rng.uniform(-3.0, 3.0);
    const std::size_t m = 1 + rng.below(6);
    Tape tape;
    const auto b = bind(tape, p);
    std::vector<Incoming> in;
    for (std::size_t j = 0; j < m; ++j) {
      Tensor h(Shape{p.config.hidden});
      for (auto& v : h.data()) v = rng.uniform(-1.0, 1.0);
      in.push_back({tape.constant(h), rng.below(vocab.size())});
    }
    const Tensor& alpha = tape.value(combine(tape, in, b.forward, b.edge_embeddings, Combine::Attention).attention);
    double total = 0.0;
    for (double a : alpha.values()) {
      total += a;
      min_alpha = std::min(min_alpha, a);
    }
    worst_sum = std::max(worst_sum, std::abs(total - 1.0));
  }
  ModelParams zero = p;
  zero.forward.w_a.fill(0.0);
  for (int call = 0; call < 200; ++call) {
    Tape tape;
    const auto b = bind(tape, zero);
    std::vector<Incoming> in;
    for (std::size_t j = 0, m = 1 + rng.below(6); j < m; ++j) {
      Tensor h(Shape{p.config.hidden});
      for (auto& v : h.data()) v = rng.uniform(-1.0, 1.0);
      in.push_back({tape.constant(h), rng.below(vocab.size())});
    }
    const auto a = combine(tape, in, b.forward, b.edge_embeddings, Combine::Attention);
    const auto avg = combine(tape, in, b.forward, b.edge_embeddings, Combine::Averaging);
    worst_bridge = std::max(worst_bridge, max_abs_diff(tape.value(a.h_a).values(), tape.value(avg.h_a).values()));
  }
  // "members were hacked": the auxpass dependent is also the temporal source.
  EdgeVocab fig;
  for (const char* l : {"auxpass", "nsubj"}) {
    fig.intern(l, SourceRole::Child);
    fig.intern(l, SourceRole::Parent);
  }
  Sentence s;
  for (const char* w : {"members", "were", "hacked"}) s.tokens.push_back(Token{w, std::vector<double>(4, 0.1), 0});
  s.dep_edges = {{2, 1, "auxpass"}, {2, 0, "nsubj"}};
  const DagGraph g = build_dags(s, fig);
  const ModelParams fp = ts::random_params(ts::small_config(Architecture::Dag, Combine::Attention, fig.size()), 79);
  std::size_t from_were = 0;
  for (const auto& e : g.forward[2]) from_were += e.source == 1;
  Tape tape;
  const auto b = bind(tape, fp);
  std::vector<Var> xs;
  for (const auto& t : s.tokens) {
    std::vector<double> x(fp.config.input_dim, 0.1);
    xs.push_back(tape.constant(Tensor::vector(x)));
  }
  const auto hf = run_direction(tape, xs, g.forward, false, b.forward, b.edge_embeddings, fp.config);
  std::vector<Incoming> in;
  for (const auto& e : g.forward[2]) in.push_back({hf[e.source], e.type});
  const std::size_t weights = tape.value(combine(tape, in, b.forward, b.edge_embeddings, Combine::Attention).attention).size();

  Outcome out;
  out.pass = worst_sum <= 1e-9 && min_alpha > 0.0 && worst_bridge <= 1e-12 && from_were == 2 && weights == 3;
  out.detail = "max |sum-1| " + fmt("%.1e", worst_sum) + ", min alpha " + fmt("%.2e", min_alpha) +
               ", A(w_a=0) vs B " + fmt("%.1e", worst_bridge) + ", duplicate source rows " +
               std::to_string(from_were) + ", weights " + std::to_string(weights);
  return out;
}

// 3. Reduction oracles on temporal-only sentences.
Outcome reduction() {
  const EdgeVocab vocab = ts::test_edge_vocab();
  Rng rng(80);
  double dag_err = 0.0, gru_err = 0.0;
  for (Combine mode : {Combine::Attention, Combine::Averaging}) {
    const ModelParams p = ts::random_params(ts::small_config(Architecture::Dag, mode, vocab.size()), 81);
    for (int i = 0; i < 50; ++i) {
      const Sentence s = ts::random_sentence(rng, 10, 5, 3, 0);
      const DagGraph g = build_dags(s, vocab);
      Tape tape;
      const auto b = bind(tape, p);
      const auto xs = embed(tape, s);
      const auto hf = run_direction(tape, xs, g.forward, false, b.forward, b.edge_embeddings, p.config);
      const auto hb = run_direction(tape, xs, g.backward, true, b.backward, b.edge_embeddings, p.config);
      const auto rf = ts::ref_dag_direction(s, g.forward, false, p.forward, p.edge_embeddings, mode, p.config.hidden);
      const auto rb = ts::ref_dag_direction(s, g.backward, true, p.backward, p.edge_embeddings, mode, p.config.hidden);
      for (std::size_t t = 0; t < s.size(); ++t) {
        dag_err = std::max(dag_err, max_abs_diff(tape.value(hf[t]).values(), rf[t]));
        dag_err = std::max(dag_err, max_abs_diff(tape.value(hb[t]).values(), rb[t]));
      }
    }
  }
  const ModelParams gp = ts::random_params(ts::small_config(Architecture::PlainBiGru, Combine::Attention, 0), 82);
  for (int i = 0; i < 50; ++i) {
    const Sentence s = ts::random_sentence(rng, 10, 5, 3, 0);
    Tape tape;
    const auto b = bind(tape, gp);
    const auto xs = embed(tape, s);
    const auto hf = run_sequential(tape, xs, false, b.forward);
    const auto hb = run_sequential(tape, xs, true, b.backward);
    const auto rf = ts::ref_sequential(s, false, gp.forward, gp.config.hidden);
    const auto rb = ts::ref_sequential(s, true, gp.backward, gp.config.hidden);
    for (std::size_t t = 0; t < s.size(); ++t) {
      gru_err = std::max(gru_err, max_abs_diff(tape.value(hf[t]).values(), rf[t]));
      gru_err = std::max(gru_err, max_abs_diff(tape.value(hb[t]).values(), rb[t]));
    }
    const auto logits = eval_logits(s, EdgeVocab{}, gp);
    const auto ref = ts::ref_logits(s, EdgeVocab{}, gp);
    for (std::size_t t = 0; t < s.size(); ++t) gru_err = std::max(gru_err, max_abs_diff(logits[t].values(), ref[t]));
  }
  Outcome out;
  out.pass = dag_err <= 1e-12 && gru_err <= 1e-12;
  out.detail = "DAG vs transform-then-GRU loop " + fmt("%.1e", dag_err) + ", BiGRU vs sequential GRU " +
               fmt("%.1e", gru_err);
  return out;
}

// 4. Learning sanity: overfit, then DAG-GRU A against the plain BiGRU.
Outcome learning() {
  Outcome out;
  {
    SyntheticConfig sc;  // seed 7, 10 documents
    const auto syn = generate_synthetic(sc);
    CorpusSplit split;
    for (const auto& d : syn.corpus.documents) split.train.push_back(d.id);
    ModelConfig mc;
    mc.hidden = 32;
    mc.edge_dim = 16;
    mc.dropout = 0.0;
    TrainConfig tc;
    tc.lr0 = 0.01;
    tc.halve_every = 1000;
    tc.max_epochs = 200;
    tc.patience = 200;
    tc.l2 = 0.0;
    TrainOptions opts;
    opts.dev_is_train = true;
    int first_perfect = 0;
    opts.on_epoch = [&](const EpochTrace& e) {
      if (first_perfect == 0 && e.dev_f1 == 1.0) first_perfect = e.epoch;
    };
    const TrainOutput r = train(syn.corpus, split, mc, tc, opts);
    const bool ok = r.result.dev_f1 == 1.0;
    out.pass = ok;
    out.detail = "overfit train F1 " + fmt("%.3f", r.result.dev_f1) + " first at epoch " + std::to_string(first_perfect);
  }
  {
    SyntheticConfig sc;
    sc.n_docs = 200;
    const auto syn = generate_synthetic(sc);
    const CorpusSplit split = random_split(syn.corpus, 1, SplitCounts{140, 30, 30});
    TrainConfig tc;
    tc.lr0 = 0.005;
    tc.max_epochs = 15;
    std::vector<double> dag, gru;
    for (Architecture a : {Architecture::Dag, Architecture::PlainBiGru}) {
      ModelConfig mc;
      mc.architecture = a;
      mc.hidden = 32;
      mc.edge_dim = 16;
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        tc.seed = seed;
        (a == Architecture::Dag ? dag : gru).push_back(train(syn.corpus, split, mc, tc).result.test_f1);
      }
    }
    const Summary sd = summarize(dag), sg = summarize(gru);
    const TTest t = welch_t_test(dag, gru);
    const bool ok = sd.mean > sg.mean && t.p < 0.05;
    out.pass = out.pass && ok;
    out.detail += "; 200 docs, 5 seeds: DAG-GRU A " + fmt("%.3f", sd.mean) + " vs BiGRU " + fmt("%.3f", sg.mean) +
                  ", Welch p " + fmt("%.2e", t.p);
  }
  return out;
}

// 5. Half-widths against the published std / n.
Outcome confidence() {
  struct Row {
    double std_dev, rounded, printed;
  };
  const std::vector<Row> rows{{0.91, 0.43, 0.42}, {0.86, 0.40, 0.42}, {1.38, 0.65, 0.65}};
  Outcome out;
  for (const auto& r : rows) {
    const double ci = ci_halfwidth(r.std_dev, 20);
    const bool rounds = std::abs(ci - r.rounded) <= 0.005;
    const bool near_printed = std::abs(ci - r.printed) <= 0.015;
    out.pass = out.pass && rounds && near_printed;
    out.detail += fmt("std %.2f", r.std_dev) + " -> " + fmt("%.4f", ci) + (rounds ? "" : " (rounding mismatch)") +
                  " vs printed " + fmt("%.2f", r.printed) + " diff " + fmt("%.4f", std::abs(ci - r.printed)) +
                  (near_printed ? " ok" : " exceeds 0.015") + "; ";
  }
  out.detail.resize(out.detail.size() - 2);
  return out;
}

double enumerate_selection(const std::vector<ScorePair>& pairs, std::size_t k) {
  const std::size_t n = pairs.size();
  std::vector<std::size_t> drawn(k, 0);
  double total = 0.0;
  std::size_t count = 0;
  while (true) {
    std::size_t best = drawn[0];
    for (std::size_t i : drawn)
      if (pairs[i].dev > pairs[best].dev || (pairs[i].dev == pairs[best].dev && pairs[i].test > pairs[best].test))
        best = i;
    total += pairs[best].test;
    ++count;
    std::size_t pos = 0;
    while (pos < k && ++drawn[pos] == n) drawn[pos++] = 0;
    if (pos == k) break;
  }
  return total / static_cast<double>(count);
}

// 6. Bootstrap against exhaustive enumeration.
Outcome bootstrap() {
  const std::size_t reps = 100000;
  const double tol = 3.0 / std::sqrt(static_cast<double>(reps));
  const std::vector<std::vector<ScorePair>> inputs{
      {{0.6, 0.5}, {0.7, 0.4}},
      {{0.62, 0.71}, {0.58, 0.69}, {0.66, 0.64}},
      {{0.5, 0.3}, {0.5, 0.6}, {0.4, 0.9}}};
  Outcome out;
  double worst = 0.0;
  std::uint64_t seed = 1;
  for (const auto& pairs : inputs)
    for (std::size_t k : {1u, 2u, 5u}) {
      const double exact = enumerate_selection(pairs, k);
      const double mc = bootstrap_selection(pairs, k, reps, seed++).test_mean;
      worst = std::max(worst, std::abs(mc - exact));
    }
  const BootstrapResult defaults = bootstrap_selection(inputs[0]);
  const bool protocol = defaults.k == 5 && defaults.reps == 1000;
  out.pass = worst <= tol && protocol;
  out.detail = "max |MC - exact| " + fmt("%.2e", worst) + " (tol " + fmt("%.2e", tol) + "), defaults k=" +
               std::to_string(defaults.k) + " reps=" + std::to_string(defaults.reps);
  return out;
}

// 7. Learning-rate schedule and split sizes.
Outcome protocol() {
  const TrainConfig c;
  bool lr_ok = lr_at(1, c) == 0.0005 && lr_at(5, c) == 0.0005 && lr_at(6, c) == 0.00025;
  for (int e = 1; e <= 30; ++e) lr_ok = lr_ok && lr_at(e, c) == 0.0005 * std::pow(0.5, (e - 1) / 5);
  Corpus corpus;
  corpus.embedding_dim = 1;
  for (int i = 0; i < 599; ++i) {
    Document d;
    d.id = "doc" + std::to_string(i);
    d.sentences.push_back(Sentence{{Token{"x", {0.0}, 0}}, {}});
    corpus.documents.push_back(d);
  }
  bool split_ok = true;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const CorpusSplit s = random_split(corpus, seed, SplitCounts{529, 30, 40});
    std::set<std::string> all(s.train.begin(), s.train.end());
    all.insert(s.dev.begin(), s.dev.end());
    all.insert(s.test.begin(), s.test.end());
    split_ok = split_ok && s.train.size() == 529 && s.dev.size() == 30 && s.test.size() == 40 && all.size() == 599;
  }
  Outcome out;
  out.pass = lr_ok && split_ok;
  out.detail = std::string("lr schedule ") + (lr_ok ? "ok" : "wrong") + " (epoch 6 -> " + fmt("%g", lr_at(6, c)) +
               "), 100 splits " + (split_ok ? "exact and disjoint" : "wrong");
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 8. Repeated seed studies produce byte-identical ledgers.
Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "daggru-acceptance-determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string d = dir.string();
  std::ostringstream sink;
  int code = run_cli({"--out-dir", d, "gen-synthetic", "--n-docs", "12", "--manifest-counts", "8,2,2"}, sink, sink);
  const std::vector<std::string> study{"--out-dir", d, "seed-study", "--n-seeds", "3", "--corpus", d + "/corpus.jsonl",
                                       "--embeddings", d + "/embeddings.txt", "--manifest", d + "/split.json",
                                       "--hidden", "16", "--edge-dim", "8", "--max-epochs", "4"};
  std::vector<std::string> ledgers;
  for (int run = 0; run < 2 && code == 0; ++run) {
    fs::remove(dir / "ledger.jsonl");
    fs::remove_all(dir / "checkpoints");
    code = run_cli(study, sink, sink);
    ledgers.push_back(slurp(dir / "ledger.jsonl"));
  }
  Outcome out;
  const std::size_t lines = ledgers.empty() ? 0 : std::count(ledgers[0].begin(), ledgers[0].end(), '\n');
  out.pass = code == 0 && ledgers.size() == 2 && ledgers[0] == ledgers[1] && lines == 3;
  out.detail = "exit " + std::to_string(code) + ", " + std::to_string(lines) + " runs, ledgers " +
               (ledgers.size() == 2 && ledgers[0] == ledgers[1] ? "byte-identical" : "differ") + " (" +
               std::to_string(ledgers.empty() ? 0 : ledgers[0].size()) + " bytes)";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradients}, {"attention invariants", attention},
      {"reduction oracle", reduction},     {"learning sanity", learning},
      {"confidence intervals", confidence}, {"bootstrap oracle", bootstrap},
      {"protocol fidelity", protocol},     {"determinism", determinism}};
  int only = 0;
  if (argc == 3 && std::string(argv[1]) == "--only") only = std::atoi(argv[2]);
  if (only < 0 || only > static_cast<int>(criteria.size()) || (argc != 1 && argc != 3)) {
    std::cerr << "usage: acceptance [--only N]\n";
    return 2;
  }
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<int>(i + 1) != only) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = Outcome{false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << "[" << (o.pass ? "PASS" : "FAIL") << "] " << (i + 1) << ". " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
