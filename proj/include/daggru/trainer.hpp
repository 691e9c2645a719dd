// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "daggru/checkpoint.hpp"
#include "daggru/corpus.hpp"
#include "daggru/model.hpp"
#include "daggru/stats.hpp"

namespace daggru {

struct TrainConfig {
  double lr0 = 0.0005;
  int halve_every = 5;
  int max_epochs = 30;
  double l2 = 0.0001;
  int patience = 5;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  /// Throws std::invalid_argument when lr0 < 0, max_epochs < 1,
  /// patience < 1, halve_every < 1 or batch_size < 1.
  void validate() const;
};

/// lr0 * 0.5^floor((epoch - 1) / halve_every), epochs counted from 1.
double lr_at(int epoch, const TrainConfig& config);

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;
};

/// Zero moments shaped like `params`.
AdamState make_adam_state(const ModelParams& params);

/// g' = g + l2 * θ, then one bias-corrected Adam update of every active
/// tensor. Throws ShapeError when grads or state do not match params.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr,
               double l2, const TrainConfig& config);

struct EpochTrace {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean per-token cross-entropy over the epoch
  double dev_f1 = 0.0;
  double grad_norm = 0.0;   // L2 norm of the last batch gradient (before L2 term)
};

/// One training run's record, as written to the results ledger.
struct RunResult {
  std::string model;
  std::string study;
  std::uint64_t seed = 0;
  std::string split_id;
  int best_epoch = 0;
  int epochs_run = 0;
  double dev_f1 = 0.0;
  double test_f1 = 0.0;
  std::vector<EpochTrace> trace;
  std::string checkpoint;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::uint64_t seed, int epoch);
  std::uint64_t seed;
  int epoch;
};

struct TrainOutput {
  RunResult result;
  Checkpoint best;
  /// How many times the test partition was scored. Always 1.
  int test_evaluations = 0;
};

struct TrainOptions {
  std::string model_name = "model";
  std::string split_id = "standard";
  /// Evaluate on the training sentences instead of the dev partition
  /// (overfit checks).
  bool dev_is_train = false;
  /// Called after each epoch; useful for progress logging.
  std::function<void(const EpochTrace&)> on_epoch;
  /// Called with "dev" or "test" each time that partition is scored.
  std::function<void(const std::string&)> on_evaluate;
};

/// Scores a model on a list of sentences (eval mode).
PrfScore evaluate(const Checkpoint& model, const std::vector<const Sentence*>& sentences);

/// Trains from scratch on split.train. Edge types come from the training
/// documents only; the label vocabulary is the corpus schema. Each epoch
/// shuffles the training sentences, steps Adam once per batch on the mean
/// token cross-entropy, then scores dev. The best-dev parameters (earliest
/// on ties) are kept; training stops after `patience` epochs without a dev
/// gain or at max_epochs. The test partition is scored once, at the end.
/// Throws TrainingDiverged on a non-finite loss.
TrainOutput train(const Corpus& corpus, const CorpusSplit& split, ModelConfig model_config,
                  const TrainConfig& config, const TrainOptions& options = {});

}  // namespace daggru
