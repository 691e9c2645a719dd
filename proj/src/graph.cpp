// SPDX-License-Identifier: Apache-2.0
#include "daggru/graph.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <utility>

namespace daggru {

namespace {

const char* role_name(SourceRole role) { return role == SourceRole::Parent ? "parent" : "child"; }

std::string dependency_name(const std::string& label, SourceRole role) {
  return label + "-" + role_name(role);
}

}  // namespace

std::string EdgeType::name() const {
  switch (kind) {
    case EdgeKind::Temporal: return "temporal";
    case EdgeKind::UnknownDependency: return "UNKNOWN-DEP";
    case EdgeKind::Dependency: return dependency_name(label, role);
  }
  return {};
}

EdgeVocab::EdgeVocab() {
  types_.push_back(EdgeType{EdgeKind::Temporal, "", SourceRole::Parent});
  types_.push_back(EdgeType{EdgeKind::UnknownDependency, "", SourceRole::Parent});
  index_.emplace("temporal", kTemporal);
  index_.emplace("UNKNOWN-DEP", kUnknownDependency);
}

EdgeTypeId EdgeVocab::intern(const std::string& label, SourceRole role) {
  const std::string key = dependency_name(label, role);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  const EdgeTypeId id = types_.size();
  types_.push_back(EdgeType{EdgeKind::Dependency, label, role});
  index_.emplace(key, id);
  return id;
}

EdgeTypeId EdgeVocab::lookup(const std::string& label, SourceRole role) const {
  if (auto it = index_.find(dependency_name(label, role)); it != index_.end()) return it->second;
  return kUnknownDependency;
}

std::vector<std::string> EdgeVocab::names() const {
  std::vector<std::string> out;
  out.reserve(types_.size());
  for (const auto& t : types_) out.push_back(t.name());
  return out;
}

EdgeVocab EdgeVocab::from_names(const std::vector<std::string>& names) {
  if (names.size() < 2 || names[0] != "temporal" || names[1] != "UNKNOWN-DEP") {
    throw std::invalid_argument("edge vocabulary must start with temporal, UNKNOWN-DEP");
  }
  EdgeVocab vocab;
  for (std::size_t i = 2; i < names.size(); ++i) {
    const auto& n = names[i];
    const auto dash = n.rfind('-');
    if (dash == std::string::npos || dash == 0) {
      throw std::invalid_argument("malformed edge type name '" + n + "'");
    }
    const std::string suffix = n.substr(dash + 1);
    SourceRole role;
    if (suffix == "parent") {
      role = SourceRole::Parent;
    } else if (suffix == "child") {
      role = SourceRole::Child;
    } else {
      throw std::invalid_argument("malformed edge type name '" + n + "'");
    }
    if (vocab.intern(n.substr(0, dash), role) != i) {
      throw std::invalid_argument("duplicate edge type name '" + n + "'");
    }
  }
  return vocab;
}

EdgeVocab edge_type_vocab(const Corpus& corpus, const std::vector<std::string>& doc_ids) {
  std::set<std::pair<std::string, std::string>> seen;  // (label, role name)
  auto scan = [&](const Document& doc) {
    for (const auto& s : doc.sentences)
      for (const auto& e : s.dep_edges) {
        seen.emplace(e.label, role_name(SourceRole::Parent));
        seen.emplace(e.label, role_name(SourceRole::Child));
      }
  };
  if (doc_ids.empty()) {
    for (const auto& d : corpus.documents) scan(d);
  } else {
    for (const auto& id : doc_ids) {
      const Document* d = corpus.find(id);
      if (!d) throw CorpusError("document '" + id + "' not in corpus");
      scan(*d);
    }
  }
  EdgeVocab vocab;
  for (const auto& [label, role] : seen) {
    vocab.intern(label, role == std::string("parent") ? SourceRole::Parent : SourceRole::Child);
  }
  return vocab;
}

namespace {

template <typename Resolve>
DagGraph build(const Sentence& sentence, Resolve&& resolve) {
  const std::size_t n = sentence.size();
  DagGraph g;
  g.forward.resize(n);
  g.backward.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) g.forward[t].push_back(IncomingEdge{t - 1, EdgeVocab::kTemporal});
    if (t + 1 < n) g.backward[t].push_back(IncomingEdge{t + 1, EdgeVocab::kTemporal});
  }
  for (const auto& e : sentence.dep_edges) {
    const std::size_t lo = std::min(e.head, e.dependent);
    const std::size_t hi = std::max(e.head, e.dependent);
    // Forward: node hi reads lo. Backward: node lo reads hi.
    const SourceRole lo_role = lo == e.head ? SourceRole::Parent : SourceRole::Child;
    const SourceRole hi_role = hi == e.head ? SourceRole::Parent : SourceRole::Child;
    g.forward[hi].push_back(IncomingEdge{lo, resolve(e.label, lo_role)});
    g.backward[lo].push_back(IncomingEdge{hi, resolve(e.label, hi_role)});
  }
  return g;
}

}  // namespace

DagGraph build_dags(const Sentence& sentence, const EdgeVocab& vocab) {
  return build(sentence, [&](const std::string& l, SourceRole r) { return vocab.lookup(l, r); });
}

DagGraph build_dags(const Sentence& sentence, EdgeVocab& vocab, bool extend) {
  if (!extend) return build_dags(sentence, std::as_const(vocab));
  return build(sentence, [&](const std::string& l, SourceRole r) { return vocab.intern(l, r); });
}

}  // namespace daggru
