// SPDX-License-Identifier: Apache-2.0
#include "daggru/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "daggru/checkpoint.hpp"
#include "daggru/corpus.hpp"
#include "daggru/studies.hpp"
#include "daggru/synthetic.hpp"
#include "daggru/trainer.hpp"

namespace daggru {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Preset {
  const char* display;
  Architecture architecture;
  Combine combine;
};

const std::map<std::string, Preset>& presets() {
  static const std::map<std::string, Preset> p{
      {"dag-a", {"DAG-GRU A", Architecture::Dag, Combine::Attention}},
      {"dag-b", {"DAG-GRU B", Architecture::Dag, Combine::Averaging}},
      {"dag-ue", {"DAG-GRU U_e", Architecture::Dag, Combine::PerEdgeType}},
      {"gru", {"GRU", Architecture::PlainBiGru, Combine::Attention}},
  };
  return p;
}

struct ModelFlags {
  std::string preset = "dag-a";
  std::string name;
  std::size_t hidden = 128;
  std::size_t edge_dim = 32;
  double dropout = 0.5;

  NamedModel resolve(const std::string& key) const {
    auto it = presets().find(key);
    if (it == presets().end()) throw UsageError("unknown model '" + key + "' (dag-a, dag-b, dag-ue, gru)");
    NamedModel m;
    m.name = it->second.display;
    m.config.architecture = it->second.architecture;
    m.config.combine = it->second.combine;
    m.config.hidden = hidden;
    m.config.edge_dim = edge_dim;
    m.config.dropout = dropout;
    return m;
  }
};

struct DataFlags {
  std::string corpus;
  std::string embeddings;
  std::string manifest;
  std::uint64_t split_seed = 1;
  std::vector<std::size_t> counts;
};

void add_model_flags(CLI::App* app, ModelFlags& m) {
  app->add_option("--hidden", m.hidden, "Hidden size")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--edge-dim", m.edge_dim, "Edge embedding size")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--dropout", m.dropout, "Dropout rate on the token representation")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.999999));
}

void add_train_flags(CLI::App* app, TrainConfig& t) {
  app->add_option("--lr", t.lr0, "Initial learning rate")->capture_default_str()->check(CLI::NonNegativeNumber);
  app->add_option("--halve-every", t.halve_every, "Halve the learning rate every N epochs")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--max-epochs", t.max_epochs, "Epoch limit")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--l2", t.l2, "L2 penalty")->capture_default_str()->check(CLI::NonNegativeNumber);
  app->add_option("--patience", t.patience, "Epochs without dev F1 gain before stopping")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--batch-size", t.batch_size, "Sentences per Adam step")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

void add_data_flags(CLI::App* app, DataFlags& d, bool needs_split) {
  app->add_option("--corpus", d.corpus, "Corpus file (JSON lines)")->required()->check(CLI::ExistingFile);
  app->add_option("--embeddings", d.embeddings, "Embedding file")->check(CLI::ExistingFile);
  if (!needs_split) return;
  auto* manifest = app->add_option("--manifest", d.manifest, "Split manifest")->check(CLI::ExistingFile);
  auto* counts = app->add_option("--counts", d.counts, "Random split sizes: train dev test")
                     ->expected(3)
                     ->delimiter(',');
  app->add_option("--split-seed", d.split_seed, "Seed for the random split")->capture_default_str();
  manifest->excludes(counts);
}

Corpus load_data(const DataFlags& d) {
  Corpus corpus = load_corpus(d.corpus);
  if (!d.embeddings.empty()) attach(corpus, load_embeddings(d.embeddings));
  if (corpus.embedding_dim == 0) {
    throw UsageError("corpus tokens carry no embeddings; pass --embeddings");
  }
  return corpus;
}

std::pair<CorpusSplit, std::string> resolve_split(const Corpus& corpus, const DataFlags& d) {
  if (!d.manifest.empty()) return {standard_split(corpus, load_manifest(d.manifest)), "standard"};
  if (d.counts.size() == 3) {
    return {random_split(corpus, d.split_seed, SplitCounts{d.counts[0], d.counts[1], d.counts[2]}),
            "split-" + std::to_string(d.split_seed)};
  }
  throw UsageError("no split given: pass --manifest or --counts");
}

json train_json(const TrainConfig& t) {
  return json{{"lr0", t.lr0},         {"halve_every", t.halve_every}, {"max_epochs", t.max_epochs},
              {"l2", t.l2},           {"patience", t.patience},       {"batch_size", t.batch_size},
              {"seed", t.seed},       {"beta1", t.beta1},             {"beta2", t.beta2},
              {"epsilon", t.epsilon}};
}

json model_json(const NamedModel& m) {
  return json{{"name", m.name},
              {"architecture", to_string(m.config.architecture)},
              {"combine", to_string(m.config.combine)},
              {"hidden", m.config.hidden},
              {"edge_dim", m.config.edge_dim},
              {"dropout", m.config.dropout}};
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

/// Checkpoint paths are stored relative to the ledger so ledgers from
/// different output directories compare equal.
void relativize_checkpoints(std::vector<RunResult>& runs, const fs::path& ledger) {
  const fs::path base = fs::absolute(ledger).parent_path();
  for (auto& r : runs) {
    if (!r.checkpoint.empty()) r.checkpoint = fs::relative(fs::absolute(r.checkpoint), base).generic_string();
  }
}

std::vector<RunResult> filter_study(const std::vector<RunResult>& runs, const std::string& study) {
  if (study == "all") return runs;
  std::vector<RunResult> out;
  for (const auto& r : runs)
    if (r.study == study) out.push_back(r);
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"DAG-GRU event trigger detection: training and variance studies", "daggru"};
  app.require_subcommand(1);
  const char* env_out = std::getenv(kOutDirEnv);
  std::string out_dir = env_out && *env_out ? env_out : ".";
  app.add_option("--out-dir", out_dir, std::string("Output directory (default $") + kOutDirEnv + " or .)");
  std::string ledger_flag;

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic corpus and embedding table");
  SyntheticConfig syn;
  std::string gen_corpus, gen_embeddings, gen_manifest;
  std::vector<std::size_t> gen_counts;
  std::uint64_t gen_split_seed = 1;
  gen->add_option("--seed", syn.seed, "Generator seed")->capture_default_str();
  gen->add_option("--n-docs", syn.n_docs)->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--sentences-per-doc", syn.sentences_per_doc)->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--vocab-size", syn.vocab_size)->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--n-event-types", syn.n_event_types)->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--k", syn.k, "Embedding length")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--trigger-rate", syn.trigger_rate)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  gen->add_option("--dep-fraction", syn.dep_fraction, "Share of triggers typed by a dependent cue")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("--distractors", syn.distractors)->capture_default_str();
  gen->add_option("--out-corpus", gen_corpus, "Default <out-dir>/corpus.jsonl");
  gen->add_option("--out-embeddings", gen_embeddings, "Default <out-dir>/embeddings.txt");
  gen->add_option("--manifest-counts", gen_counts, "Also write a random split manifest: train,dev,test")
      ->expected(3)
      ->delimiter(',');
  gen->add_option("--split-seed", gen_split_seed)->capture_default_str();
  gen->add_option("--out-manifest", gen_manifest, "Default <out-dir>/split.json");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one model on one split");
  DataFlags train_data;
  ModelFlags train_model;
  TrainConfig train_cfg;
  std::string train_checkpoint;
  add_data_flags(train_cmd, train_data, true);
  train_cmd->add_option("--model", train_model.preset, "dag-a | dag-b | dag-ue | gru")->capture_default_str();
  train_cmd->add_option("--model-name", train_model.name, "Name recorded in the ledger");
  add_model_flags(train_cmd, train_model);
  add_train_flags(train_cmd, train_cfg);
  train_cmd->add_option("--seed", train_cfg.seed, "Initialization seed")->capture_default_str();
  train_cmd->add_option("--checkpoint", train_checkpoint, "Checkpoint path");
  train_cmd->add_option("--ledger", ledger_flag, "Results ledger (default <out-dir>/ledger.jsonl)");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on a partition");
  DataFlags eval_data;
  std::string eval_checkpoint, eval_partition = "test";
  add_data_flags(eval_cmd, eval_data, true);
  eval_cmd->add_option("--checkpoint", eval_checkpoint)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--partition", eval_partition)
      ->capture_default_str()
      ->check(CLI::IsMember({"train", "dev", "test", "all"}));

  // seed-study
  auto* seed_cmd = app.add_subcommand("seed-study", "Train one model under seeds 1..N");
  DataFlags seed_data;
  ModelFlags seed_model;
  TrainConfig seed_cfg;
  std::size_t n_seeds = 20, seed_jobs = 1;
  add_data_flags(seed_cmd, seed_data, true);
  seed_cmd->add_option("--model", seed_model.preset, "dag-a | dag-b | dag-ue | gru")->capture_default_str();
  seed_cmd->add_option("--model-name", seed_model.name);
  add_model_flags(seed_cmd, seed_model);
  add_train_flags(seed_cmd, seed_cfg);
  seed_cmd->add_option("--n-seeds", n_seeds)->capture_default_str()->check(CLI::Range(2, 100000));
  seed_cmd->add_option("--jobs", seed_jobs, "Concurrent runs")->capture_default_str()->check(CLI::PositiveNumber);
  seed_cmd->add_option("--ledger", ledger_flag);

  // split-study
  auto* split_cmd = app.add_subcommand("split-study", "Train models over N random splits");
  DataFlags split_data;
  ModelFlags split_model;
  TrainConfig split_cfg;
  std::vector<std::string> split_models{"dag-a", "dag-b", "gru"};
  std::size_t n_splits = 10, split_jobs = 1;
  std::vector<std::size_t> split_counts{529, 30, 40};
  add_data_flags(split_cmd, split_data, false);
  split_cmd->add_option("--models", split_models, "Comma-separated model presets")
      ->delimiter(',')
      ->capture_default_str();
  add_model_flags(split_cmd, split_model);
  add_train_flags(split_cmd, split_cfg);
  split_cmd->add_option("--seed", split_cfg.seed, "Initialization seed")->capture_default_str();
  split_cmd->add_option("--n-splits", n_splits)->capture_default_str()->check(CLI::PositiveNumber);
  split_cmd->add_option("--counts", split_counts, "train,dev,test document counts")
      ->expected(3)
      ->delimiter(',')
      ->capture_default_str();
  split_cmd->add_option("--jobs", split_jobs)->capture_default_str()->check(CLI::PositiveNumber);
  split_cmd->add_option("--ledger", ledger_flag);

  // bootstrap
  auto* boot_cmd = app.add_subcommand("bootstrap", "Bootstrap dev-based model selection from a ledger");
  std::size_t boot_k = 5, boot_reps = 1000;
  std::uint64_t boot_seed = 1;
  std::string boot_study = "seed";
  boot_cmd->add_option("--ledger", ledger_flag)->required()->check(CLI::ExistingFile);
  boot_cmd->add_option("--k", boot_k)->capture_default_str()->check(CLI::PositiveNumber);
  boot_cmd->add_option("--reps", boot_reps)->capture_default_str()->check(CLI::PositiveNumber);
  boot_cmd->add_option("--seed", boot_seed)->capture_default_str();
  boot_cmd->add_option("--study", boot_study, "Ledger rows to use: seed | split | train | all")
      ->capture_default_str();

  // report
  auto* report_cmd = app.add_subcommand("report", "Render score tables from a ledger");
  std::string report_study = "all";
  report_cmd->add_option("--ledger", ledger_flag)->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--study", report_study, "seed | split | train | all")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (auto& c : msg)
      if (c == '\n') c = ' ';
    err << "error: usage: " << msg << '\n';
    return 2;
  }

  const fs::path out_path(out_dir);
  const fs::path ledger = ledger_flag.empty() ? out_path / "ledger.jsonl" : fs::path(ledger_flag);
  auto banner = [&](const std::string& command, json config) {
    config["command"] = command;
    err << "# config " << config.dump() << '\n';
  };

  try {
    if (*gen) {
      fs::create_directories(out_path);
      const fs::path corpus_path = gen_corpus.empty() ? out_path / "corpus.jsonl" : fs::path(gen_corpus);
      const fs::path emb_path = gen_embeddings.empty() ? out_path / "embeddings.txt" : fs::path(gen_embeddings);
      banner("gen-synthetic", json{{"seed", syn.seed},
                                   {"n_docs", syn.n_docs},
                                   {"sentences_per_doc", syn.sentences_per_doc},
                                   {"vocab_size", syn.vocab_size},
                                   {"n_event_types", syn.n_event_types},
                                   {"k", syn.k},
                                   {"trigger_rate", syn.trigger_rate},
                                   {"dep_fraction", syn.dep_fraction},
                                   {"distractors", syn.distractors}});
      const SyntheticCorpus data = generate_synthetic(syn);
      save_corpus(data.corpus, corpus_path.string());
      save_embeddings(data.embeddings, emb_path.string());
      out << "wrote " << corpus_path.string() << " (" << data.corpus.documents.size() << " documents, "
          << data.corpus.sentence_count() << " sentences)\n";
      out << "wrote " << emb_path.string() << '\n';
      if (!gen_counts.empty()) {
        const fs::path manifest = gen_manifest.empty() ? out_path / "split.json" : fs::path(gen_manifest);
        save_manifest(random_split(data.corpus, gen_split_seed,
                                   SplitCounts{gen_counts[0], gen_counts[1], gen_counts[2]}),
                      manifest.string());
        out << "wrote " << manifest.string() << '\n';
      }
      return 0;
    }

    if (*train_cmd) {
      const Corpus corpus = load_data(train_data);
      const auto [split, split_id] = resolve_split(corpus, train_data);
      NamedModel model = train_model.resolve(train_model.preset);
      if (!train_model.name.empty()) model.name = train_model.name;
      banner("train", json{{"corpus", train_data.corpus},
                           {"split", split_id},
                           {"model", model_json(model)},
                           {"train", train_json(train_cfg)}});
      TrainOptions opts;
      opts.model_name = model.name;
      opts.split_id = split_id;
      opts.on_epoch = [&](const EpochTrace& e) {
        err << "epoch " << e.epoch << " lr " << e.lr << " loss " << e.train_loss << " dev_f1 "
            << e.dev_f1 << " grad_norm " << e.grad_norm << '\n';
      };
      TrainOutput result = train(corpus, split, model.config, train_cfg, opts);
      result.result.study = "train";
      const fs::path ckpt = train_checkpoint.empty()
                                ? out_path / "checkpoints" /
                                      (train_model.preset + "-seed" + std::to_string(train_cfg.seed) +
                                       "-" + split_id + ".ckpt.json")
                                : fs::path(train_checkpoint);
      if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
      save_checkpoint(result.best, ckpt.string());
      result.result.checkpoint = ckpt.string();
      std::vector<RunResult> runs{result.result};
      if (ledger.has_parent_path()) fs::create_directories(ledger.parent_path());
      relativize_checkpoints(runs, ledger);
      append_ledger(ledger.string(), runs);
      out << to_json_line(runs.front()) << '\n';
      return 0;
    }

    if (*eval_cmd) {
      const Corpus corpus = load_data(eval_data);
      const Checkpoint cp = load_checkpoint(eval_checkpoint);
      if (cp.params.config.input_dim != corpus.embedding_dim) {
        throw UsageError("checkpoint expects embeddings of length " +
                         std::to_string(cp.params.config.input_dim) + ", corpus has " +
                         std::to_string(corpus.embedding_dim));
      }
      if (!(cp.labels == corpus.labels)) {
        throw UsageError("corpus label vocabulary differs from the checkpoint's");
      }
      std::vector<std::string> ids;
      if (eval_partition == "all") {
        for (const auto& d : corpus.documents) ids.push_back(d.id);
      } else {
        const auto [split, split_id] = resolve_split(corpus, eval_data);
        ids = eval_partition == "train" ? split.train : eval_partition == "dev" ? split.dev : split.test;
      }
      const PrfScore s = evaluate(cp, collect_sentences(corpus, ids));
      out << json{{"partition", eval_partition},
                  {"precision", s.precision},
                  {"recall", s.recall},
                  {"f1", s.f1},
                  {"true_positives", s.true_positives},
                  {"predicted", s.predicted},
                  {"gold", s.gold}}
                 .dump()
          << '\n';
      return 0;
    }

    if (*seed_cmd) {
      const Corpus corpus = load_data(seed_data);
      const auto [split, split_id] = resolve_split(corpus, seed_data);
      NamedModel model = seed_model.resolve(seed_model.preset);
      if (!seed_model.name.empty()) model.name = seed_model.name;
      banner("seed-study", json{{"corpus", seed_data.corpus},
                                {"split", split_id},
                                {"model", model_json(model)},
                                {"train", train_json(seed_cfg)},
                                {"seeds", json::array({1, n_seeds})},
                                {"jobs", seed_jobs}});
      StudyOptions opts;
      opts.jobs = seed_jobs;
      opts.checkpoint_dir = (out_path / "checkpoints").string();
      opts.on_run = [&](const RunResult& r) {
        err << "run " << r.model << " seed " << r.seed << " dev_f1 " << r.dev_f1 << " test_f1 "
            << r.test_f1 << '\n';
      };
      StudyOutput study = seed_study(corpus, split, model, seed_cfg, n_seeds, opts);
      for (auto& r : study.runs) r.split_id = split_id;
      for (const auto& f : study.failures) err << "failed: " << f << '\n';
      if (ledger.has_parent_path()) fs::create_directories(ledger.parent_path());
      relativize_checkpoints(study.runs, ledger);
      append_ledger(ledger.string(), study.runs);
      write_file(out_path / "seed_study.csv", render_csv(study.table, TableKind::SeedStudy));
      out << render_text(study.table, TableKind::SeedStudy);
      return study.runs.empty() ? 1 : 0;
    }

    if (*split_cmd) {
      const Corpus corpus = load_data(split_data);
      std::vector<NamedModel> models;
      json model_list = json::array();
      for (const auto& key : split_models) {
        models.push_back(split_model.resolve(key));
        model_list.push_back(model_json(models.back()));
      }
      const SplitCounts counts{split_counts.at(0), split_counts.at(1), split_counts.at(2)};
      banner("split-study", json{{"corpus", split_data.corpus},
                                 {"models", model_list},
                                 {"train", train_json(split_cfg)},
                                 {"split_seeds", json::array({1, n_splits})},
                                 {"counts", split_counts},
                                 {"jobs", split_jobs}});
      StudyOptions opts;
      opts.jobs = split_jobs;
      opts.checkpoint_dir = (out_path / "checkpoints").string();
      opts.on_run = [&](const RunResult& r) {
        err << "run " << r.model << " " << r.split_id << " dev_f1 " << r.dev_f1 << " test_f1 "
            << r.test_f1 << '\n';
      };
      StudyOutput study = split_study(corpus, models, split_cfg, n_splits, counts, opts);
      for (const auto& f : study.failures) err << "failed: " << f << '\n';
      if (ledger.has_parent_path()) fs::create_directories(ledger.parent_path());
      relativize_checkpoints(study.runs, ledger);
      append_ledger(ledger.string(), study.runs);
      write_file(out_path / "split_study.csv", render_csv(study.table, TableKind::SplitStudy));
      out << render_text(study.table, TableKind::SplitStudy) << render_runs_text(study.runs);
      return study.runs.empty() ? 1 : 0;
    }

    if (*boot_cmd) {
      const auto runs = filter_study(load_ledger(ledger.string()), boot_study);
      if (runs.empty()) throw UsageError("ledger has no '" + boot_study + "' runs to bootstrap");
      const auto rows = bootstrap_by_model(runs, boot_k, boot_reps, boot_seed);
      write_file(out_path / "bootstrap.csv", render_bootstrap_csv(rows));
      out << render_bootstrap_text(rows);
      return 0;
    }

    if (*report_cmd) {
      const auto runs = load_ledger(ledger.string());
      bool any = false;
      auto emit = [&](const std::string& study, TableKind kind, const char* file) {
        if (report_study != "all" && report_study != study) return;
        const auto rows = filter_study(runs, study);
        if (rows.empty()) return;
        any = true;
        const ScoreTable table = aggregate(rows);
        write_file(out_path / file, render_csv(table, kind));
        out << render_text(table, kind);
        if (kind == TableKind::SplitStudy) out << render_runs_text(rows);
      };
      emit("seed", TableKind::SeedStudy, "seed_study.csv");
      emit("split", TableKind::SplitStudy, "split_study.csv");
      emit("train", TableKind::SeedStudy, "train_runs.csv");
      if (!any) throw UsageError("ledger has no runs for study '" + report_study + "'");
      return 0;
    }
  } catch (const UsageError& e) {
    err << "error: usage: " << e.what() << '\n';
    return 2;
  } catch (const CorpusError& e) {
    err << "error: corpus: " << e.what() << '\n';
    return 1;
  } catch (const CheckpointError& e) {
    err << "error: checkpoint: " << e.what() << '\n';
    return 1;
  } catch (const TrainingDiverged& e) {
    err << "error: diverged: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& c : msg)
      if (c == '\n') c = ' ';
    err << "error: runtime: " << msg << '\n';
    return 1;
  }
  return 2;
}

}  // namespace daggru
