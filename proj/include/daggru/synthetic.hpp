// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

#include "daggru/corpus.hpp"

namespace daggru {

/// Knobs for the generated stand-in corpus.
///
/// Sentences are random projective dependency trees over filler words. A
/// `trigger_rate` fraction of sentences (an exact quota, not a coin flip)
/// carries one trigger. Plain triggers `trig<e>` always denote event e.
/// With probability `dep_fraction` the trigger is instead the shared word
/// `act`, whose event type is given only by the cue word `cue<e>` attached
/// to it as an `nsubj` dependent. Every sentence also holds `distractors`
/// unattached cue words, so the type of `act` cannot be read off the bag of
/// words. Cue and filler words are always NIL.
struct SyntheticConfig {
  std::uint64_t seed = 7;
  std::size_t n_docs = 10;
  std::size_t sentences_per_doc = 4;
  std::size_t vocab_size = 50;
  std::size_t n_event_types = 4;
  std::size_t k = 16;
  double trigger_rate = 0.6;
  double dep_fraction = 0.5;
  std::size_t distractors = 2;
  std::size_t min_length = 6;
  std::size_t max_length = 14;
};

struct SyntheticCorpus {
  Corpus corpus;
  EmbeddingTable embeddings;
};

/// Throws std::invalid_argument for zero counts or out-of-range rates.
SyntheticCorpus generate_synthetic(const SyntheticConfig& config);

}  // namespace daggru
