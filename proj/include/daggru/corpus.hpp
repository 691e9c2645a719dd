// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace daggru {

using LabelId = std::size_t;

/// Event label names with NIL pinned at id 0.
class LabelVocab {
 public:
  static constexpr LabelId kNil = 0;
  static constexpr const char* kNilName = "NIL";

  LabelVocab();
  /// NIL followed by `names` in the given order (NIL entries are skipped).
  explicit LabelVocab(const std::vector<std::string>& names);

  LabelId add(const std::string& name);
  std::optional<LabelId> find(const std::string& name) const;
  LabelId id(const std::string& name) const;
  const std::string& name(LabelId id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const LabelVocab& a, const LabelVocab& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::map<std::string, LabelId> index_;
};

struct Token {
  std::string surface;
  std::vector<double> embedding;
  LabelId gold_label = LabelVocab::kNil;

  friend bool operator==(const Token&, const Token&) = default;
};

struct DependencyEdge {
  std::size_t head = 0;
  std::size_t dependent = 0;
  std::string label;

  friend bool operator==(const DependencyEdge&, const DependencyEdge&) = default;
};

struct Sentence {
  std::vector<Token> tokens;
  std::vector<DependencyEdge> dep_edges;

  std::size_t size() const { return tokens.size(); }
  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct Document {
  std::string id;
  std::string domain;
  std::vector<Sentence> sentences;

  friend bool operator==(const Document&, const Document&) = default;
};

struct Corpus {
  std::vector<Document> documents;
  LabelVocab labels;
  /// Embedding length k; 0 until embeddings are attached.
  std::size_t embedding_dim = 0;

  const Document* find(const std::string& id) const;
  std::size_t sentence_count() const;
  std::size_t token_count() const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checks every type invariant; throws CorpusError naming the first violation.
void validate(const Corpus& corpus);

/// Reads the JSON-lines document format. Tokens may carry an optional
/// "embedding" array; when any do, all must, and k is inferred from them.
/// The label vocabulary is NIL followed by the distinct event names in
/// lexicographic order.
Corpus load_corpus(const std::string& path);
Corpus parse_corpus(std::istream& in, const std::string& source = "<stream>");

void save_corpus(const Corpus& corpus, const std::string& path, bool include_embeddings = false);
void write_corpus(const Corpus& corpus, std::ostream& out, bool include_embeddings = false);

/// Fixed per-surface-form vectors; never trained.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::map<std::string, std::vector<double>> vectors;
  /// Fallback for surface forms missing from `vectors`.
  std::optional<std::vector<double>> unknown;

  static constexpr const char* kUnknownKey = "<unk>";
};

/// One record per line: surface form, tab, space-separated reals. A record
/// keyed "<unk>" becomes the fallback vector.
EmbeddingTable load_embeddings(const std::string& path);
void save_embeddings(const EmbeddingTable& table, const std::string& path);

struct AttachStats {
  std::size_t attached = 0;
  std::size_t fallbacks = 0;
};

/// Gives every token its table vector. Missing words use the fallback (and
/// are counted) or raise CorpusError naming the word.
AttachStats attach(Corpus& corpus, const EmbeddingTable& table);

struct CorpusSplit {
  std::vector<std::string> train;
  std::vector<std::string> dev;
  std::vector<std::string> test;

  friend bool operator==(const CorpusSplit&, const CorpusSplit&) = default;
};

struct SplitCounts {
  std::size_t train = 529;
  std::size_t dev = 30;
  std::size_t test = 40;
};

/// Checks disjointness and membership in the corpus.
void validate_split(const Corpus& corpus, const CorpusSplit& split);

CorpusSplit load_manifest(const std::string& path);
void save_manifest(const CorpusSplit& split, const std::string& path);

/// The split exactly as listed in a manifest.
CorpusSplit standard_split(const Corpus& corpus, const CorpusSplit& manifest);

/// Uniform assignment without replacement, deterministic per seed.
CorpusSplit random_split(const Corpus& corpus, std::uint64_t seed, SplitCounts counts);

/// Sentences of the listed documents, in list order.
std::vector<const Sentence*> collect_sentences(const Corpus& corpus,
                                               const std::vector<std::string>& ids);

}  // namespace daggru
