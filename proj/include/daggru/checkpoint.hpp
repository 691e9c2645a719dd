// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

#include "daggru/corpus.hpp"
#include "daggru/graph.hpp"
#include "daggru/model.hpp"

namespace daggru {

/// Everything needed to run a trained model on new sentences.
struct Checkpoint {
  ModelParams params;
  EdgeVocab edges;
  LabelVocab labels;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointVersion = 1;

/// Portable JSON container: format tag, version, config, both vocabularies
/// and every active tensor (shape + data, doubles written round-trip exact).
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& text);

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
/// Rejects unknown versions, vocabulary sizes that disagree with the config,
/// and any tensor whose shape does not match.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace daggru
