// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "daggru/corpus.hpp"
#include "daggru/model.hpp"
#include "daggru/stats.hpp"
#include "daggru/trainer.hpp"

namespace daggru {

struct NamedModel {
  std::string name;
  ModelConfig config;
};

/// One table row. Scores are F1 fractions; rendering converts to percent.
struct ScoreRow {
  std::string model;
  double dev_mean = 0.0;
  Summary test;
};

using ScoreTable = std::vector<ScoreRow>;

/// Groups runs by model name (first-appearance order) and summarizes test F1.
ScoreTable aggregate(std::span<const RunResult> runs);

struct StudyOptions {
  std::size_t jobs = 1;
  /// When non-empty, each run's best checkpoint is saved here.
  std::string checkpoint_dir;
  std::function<void(const RunResult&)> on_run;
};

struct StudyOutput {
  std::vector<RunResult> runs;  // in (split, model, seed) order regardless of jobs
  std::vector<std::string> failures;
  ScoreTable table;
};

/// Trains `model` with seeds 1..n_seeds on one split. Diverged runs are
/// reported in `failures` and left out of the table.
StudyOutput seed_study(const Corpus& corpus, const CorpusSplit& split, const NamedModel& model,
                       const TrainConfig& config, std::size_t n_seeds,
                       const StudyOptions& options = {});

/// For split seeds 1..n_splits draws random_split(corpus, seed, counts) and
/// trains every model once on it with config.seed.
StudyOutput split_study(const Corpus& corpus, const std::vector<NamedModel>& models,
                        const TrainConfig& config, std::size_t n_splits, SplitCounts counts,
                        const StudyOptions& options = {});

// Results ledger: one JSON object per line.
std::string to_json_line(const RunResult& run);
RunResult run_from_json_line(const std::string& line);
void append_ledger(const std::string& path, std::span<const RunResult> runs);
std::vector<RunResult> load_ledger(const std::string& path);

enum class TableKind { SeedStudy, Bootstrap, SplitStudy };

struct BootstrapRow {
  std::string model;
  BootstrapResult result;
};

/// Runs bootstrap_selection per model over the ledger's (dev, test) pairs.
std::vector<BootstrapRow> bootstrap_by_model(std::span<const RunResult> runs, std::size_t k,
                                             std::size_t reps, std::uint64_t seed);

std::string render_csv(const ScoreTable& table, TableKind kind);
std::string render_text(const ScoreTable& table, TableKind kind);
std::string render_bootstrap_csv(std::span<const BootstrapRow> rows);
std::string render_bootstrap_text(std::span<const BootstrapRow> rows);
/// One line per run: model, split, seed, best epoch, dev and test F1.
std::string render_runs_text(std::span<const RunResult> runs);

}  // namespace daggru
