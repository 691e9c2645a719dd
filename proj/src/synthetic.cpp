// SPDX-License-Identifier: Apache-2.0
#include "daggru/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "daggru/rng.hpp"

namespace daggru {

namespace {

constexpr const char* kFillerRelations[] = {"advmod", "amod", "det", "dobj", "pobj", "prep", "conj"};
constexpr const char* kCueRelation = "nsubj";
constexpr const char* kDomains[] = {"nw", "bn", "wl", "un"};
constexpr const char* kSharedTrigger = "act";

std::string event_name(std::size_t e) { return "E" + std::to_string(e + 1); }
std::string trigger_word(std::size_t e) { return "trig" + std::to_string(e + 1); }
std::string cue_word(std::size_t e) { return "cue" + std::to_string(e + 1); }
std::string filler_word(std::size_t i) { return "w" + std::to_string(i); }

/// Random projective tree: pick a root in [lo, hi], recurse on both sides.
void grow_tree(Rng& rng, std::size_t lo, std::size_t hi, std::ptrdiff_t parent,
               std::vector<std::ptrdiff_t>& heads) {
  if (lo > hi) return;
  const std::size_t root = lo + rng.below(hi - lo + 1);
  heads[root] = parent;
  if (root > lo) grow_tree(rng, lo, root - 1, static_cast<std::ptrdiff_t>(root), heads);
  grow_tree(rng, root + 1, hi, static_cast<std::ptrdiff_t>(root), heads);
}

std::size_t pick(Rng& rng, const std::vector<std::size_t>& from) {
  return from[rng.below(from.size())];
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticConfig& c) {
  if (c.n_docs == 0 || c.sentences_per_doc == 0 || c.vocab_size == 0 || c.n_event_types == 0 ||
      c.k == 0) {
    throw std::invalid_argument("generate_synthetic: all counts must be >= 1");
  }
  if (!(c.trigger_rate >= 0.0 && c.trigger_rate <= 1.0) ||
      !(c.dep_fraction >= 0.0 && c.dep_fraction <= 1.0)) {
    throw std::invalid_argument("generate_synthetic: rates must lie in [0, 1]");
  }
  if (c.min_length < c.distractors + 3 || c.max_length < c.min_length) {
    throw std::invalid_argument("generate_synthetic: sentence length range too small");
  }

  SyntheticCorpus out;
  std::vector<std::string> names;
  for (std::size_t e = 0; e < c.n_event_types; ++e) names.push_back(event_name(e));
  std::sort(names.begin(), names.end());
  out.corpus.labels = LabelVocab(names);

  // Embeddings are drawn from their own stream so the text does not depend on k.
  Rng emb_rng(derive_seed(c.seed, 1));
  out.embeddings.dim = c.k;
  auto add_vector = [&](const std::string& surface) {
    std::vector<double> v(c.k);
    for (auto& x : v) x = emb_rng.uniform(-1.0, 1.0);
    out.embeddings.vectors.emplace(surface, std::move(v));
  };
  for (std::size_t i = 0; i < c.vocab_size; ++i) add_vector(filler_word(i));
  for (std::size_t e = 0; e < c.n_event_types; ++e) add_vector(trigger_word(e));
  for (std::size_t e = 0; e < c.n_event_types; ++e) add_vector(cue_word(e));
  add_vector(kSharedTrigger);
  {
    std::vector<double> unk(c.k);
    for (auto& x : unk) x = emb_rng.uniform(-1.0, 1.0);
    out.embeddings.unknown = std::move(unk);
  }

  Rng rng(derive_seed(c.seed, 0));
  const std::size_t total = c.n_docs * c.sentences_per_doc;
  const auto n_trigger =
      static_cast<std::size_t>(std::llround(c.trigger_rate * static_cast<double>(total)));
  std::vector<char> has_trigger(total, 0);
  std::fill(has_trigger.begin(), has_trigger.begin() + static_cast<std::ptrdiff_t>(n_trigger), 1);
  rng.shuffle(has_trigger);

  auto other_type = [&](std::size_t e) {
    if (c.n_event_types == 1) return e;
    const std::size_t o = rng.below(c.n_event_types - 1);
    return o >= e ? o + 1 : o;
  };

  std::size_t sentence_index = 0;
  for (std::size_t d = 0; d < c.n_docs; ++d) {
    Document doc;
    char id[32];
    std::snprintf(id, sizeof id, "doc-%04zu", d);
    doc.id = id;
    doc.domain = kDomains[rng.below(std::size(kDomains))];
    for (std::size_t s = 0; s < c.sentences_per_doc; ++s, ++sentence_index) {
      const std::size_t n = c.min_length + rng.below(c.max_length - c.min_length + 1);
      std::vector<std::ptrdiff_t> heads(n, -1);
      grow_tree(rng, 0, n - 1, -1, heads);
      std::vector<std::vector<std::size_t>> children(n);
      for (std::size_t t = 0; t < n; ++t)
        if (heads[t] >= 0) children[static_cast<std::size_t>(heads[t])].push_back(t);

      std::vector<std::string> words(n);
      std::vector<std::string> labels(n, LabelVocab::kNilName);
      std::vector<char> taken(n, 0);
      std::vector<char> blocked(n, 0);  // not eligible for distractor cues
      std::ptrdiff_t trigger = -1, cue = -1;
      std::size_t event = 0;

      if (has_trigger[sentence_index]) {
        event = rng.below(c.n_event_types);
        const bool via_dependency = rng.bernoulli(c.dep_fraction);
        if (via_dependency) {
          std::vector<std::size_t> heads_with_children;
          for (std::size_t t = 0; t < n; ++t)
            if (!children[t].empty()) heads_with_children.push_back(t);
          const std::size_t t = pick(rng, heads_with_children);
          const std::size_t dep = pick(rng, children[t]);
          trigger = static_cast<std::ptrdiff_t>(t);
          cue = static_cast<std::ptrdiff_t>(dep);
          words[t] = kSharedTrigger;
          words[dep] = cue_word(event);
          taken[dep] = 1;
          for (auto ch : children[t]) blocked[ch] = 1;
          if (heads[t] >= 0) blocked[static_cast<std::size_t>(heads[t])] = 1;
        } else {
          const std::size_t t = rng.below(n);
          trigger = static_cast<std::ptrdiff_t>(t);
          words[t] = trigger_word(event);
        }
        taken[static_cast<std::size_t>(trigger)] = 1;
        labels[static_cast<std::size_t>(trigger)] = event_name(event);
      }

      std::vector<std::size_t> free_slots;
      for (std::size_t t = 0; t < n; ++t)
        if (!taken[t] && !blocked[t]) free_slots.push_back(t);
      rng.shuffle(free_slots);
      const std::size_t n_distract = std::min(c.distractors, free_slots.size());
      for (std::size_t i = 0; i < n_distract; ++i) {
        const std::size_t t = free_slots[i];
        const std::size_t type = trigger >= 0 ? other_type(event) : rng.below(c.n_event_types);
        words[t] = cue_word(type);
        taken[t] = 1;
      }
      for (std::size_t t = 0; t < n; ++t)
        if (words[t].empty()) words[t] = filler_word(rng.below(c.vocab_size));

      Sentence sentence;
      for (std::size_t t = 0; t < n; ++t) {
        Token tok;
        tok.surface = words[t];
        tok.gold_label = out.corpus.labels.id(labels[t]);
        tok.embedding = out.embeddings.vectors.at(words[t]);
        sentence.tokens.push_back(std::move(tok));
      }
      for (std::size_t t = 0; t < n; ++t) {
        if (heads[t] < 0) continue;
        const auto h = static_cast<std::size_t>(heads[t]);
        std::string rel = (static_cast<std::ptrdiff_t>(h) == trigger &&
                           static_cast<std::ptrdiff_t>(t) == cue)
                              ? kCueRelation
                              : kFillerRelations[rng.below(std::size(kFillerRelations))];
        sentence.dep_edges.push_back(DependencyEdge{h, t, std::move(rel)});
      }
      doc.sentences.push_back(std::move(sentence));
    }
    out.corpus.documents.push_back(std::move(doc));
  }
  out.corpus.embedding_dim = c.k;
  return out;
}

}  // namespace daggru
