// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "daggru/corpus.hpp"

namespace daggru {

using EdgeTypeId = std::size_t;

enum class EdgeKind { Temporal, UnknownDependency, Dependency };

/// Which role the SOURCE token (the one whose hidden state flows in) plays
/// in the dependency relation.
enum class SourceRole { Parent, Child };

struct EdgeType {
  EdgeKind kind = EdgeKind::Temporal;
  std::string label;
  SourceRole role = SourceRole::Parent;

  /// "temporal", "UNKNOWN-DEP", or "<label>-parent" / "<label>-child".
  std::string name() const;
  friend bool operator==(const EdgeType&, const EdgeType&) = default;
};

/// Edge types known to a model. Temporal is always id 0 and UNKNOWN-DEP id 1.
class EdgeVocab {
 public:
  static constexpr EdgeTypeId kTemporal = 0;
  static constexpr EdgeTypeId kUnknownDependency = 1;

  EdgeVocab();

  /// Adds a dependency type if absent and returns its id.
  EdgeTypeId intern(const std::string& label, SourceRole role);
  /// Id of a dependency type, or kUnknownDependency when it was never seen.
  EdgeTypeId lookup(const std::string& label, SourceRole role) const;

  const EdgeType& at(EdgeTypeId id) const { return types_.at(id); }
  std::size_t size() const { return types_.size(); }
  std::vector<std::string> names() const;
  /// Rebuilds a vocabulary from names(); throws std::invalid_argument if the
  /// list does not start with temporal, UNKNOWN-DEP.
  static EdgeVocab from_names(const std::vector<std::string>& names);

  friend bool operator==(const EdgeVocab& a, const EdgeVocab& b) { return a.types_ == b.types_; }

 private:
  std::vector<EdgeType> types_;
  std::map<std::string, EdgeTypeId> index_;
};

/// Deterministic vocabulary over the given documents (all documents when
/// `doc_ids` is empty): temporal, UNKNOWN-DEP, then dependency types sorted
/// by (label, role name), so "nsubj-child" precedes "nsubj-parent".
EdgeVocab edge_type_vocab(const Corpus& corpus, const std::vector<std::string>& doc_ids = {});

struct IncomingEdge {
  std::size_t source = 0;
  EdgeTypeId type = EdgeVocab::kTemporal;
  friend bool operator==(const IncomingEdge&, const IncomingEdge&) = default;
};

/// Per-token incoming edges of the forward DAG (sources earlier than the
/// node) and the backward DAG (sources later). Duplicate sources are kept,
/// one entry per edge.
struct DagGraph {
  std::vector<std::vector<IncomingEdge>> forward;
  std::vector<std::vector<IncomingEdge>> backward;

  std::size_t size() const { return forward.size(); }
};

/// Splits the temporal chain plus dependency edges into the two DAGs. Each
/// node lists its temporal edge first, then dependency edges in sentence
/// order. Unknown relation labels map to UNKNOWN-DEP.
DagGraph build_dags(const Sentence& sentence, const EdgeVocab& vocab);

/// Training-time variant that grows `vocab` with unseen relations instead.
DagGraph build_dags(const Sentence& sentence, EdgeVocab& vocab, bool extend);

}  // namespace daggru
