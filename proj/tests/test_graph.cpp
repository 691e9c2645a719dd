// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>

#include "daggru/graph.hpp"
#include "daggru/rng.hpp"
#include "daggru/synthetic.hpp"
#include "support.hpp"

using namespace daggru;

namespace {

Sentence plain_sentence(std::size_t n) {
  Sentence s;
  for (std::size_t i = 0; i < n; ++i) s.tokens.push_back(Token{"t" + std::to_string(i), {0.0}, 0});
  return s;
}

Corpus corpus_of(std::vector<Sentence> sentences) {
  Corpus c;
  c.embedding_dim = 1;
  Document d;
  d.id = "d";
  d.sentences = std::move(sentences);
  c.documents.push_back(d);
  return c;
}

}  // namespace

TEST(EdgeVocab, NamesAndReservedIds) {
  EdgeVocab v;
  EXPECT_EQ(v.size(), 2u);
  EXPECT_EQ(v.at(EdgeVocab::kTemporal).name(), "temporal");
  EXPECT_EQ(v.at(EdgeVocab::kUnknownDependency).name(), "UNKNOWN-DEP");
  const auto id = v.intern("nsubj", SourceRole::Child);
  EXPECT_EQ(v.at(id).name(), "nsubj-child");
  EXPECT_EQ(v.intern("nsubj", SourceRole::Child), id);
  EXPECT_EQ(v.lookup("nsubj", SourceRole::Child), id);
  EXPECT_EQ(v.lookup("nsubj", SourceRole::Parent), EdgeVocab::kUnknownDependency);
  EXPECT_EQ(EdgeVocab::from_names(v.names()), v);
}

TEST(EdgeVocab, CorpusWithOnlyNsubj) {
  Sentence s = plain_sentence(3);
  s.dep_edges.push_back({2, 0, "nsubj"});
  const EdgeVocab v = edge_type_vocab(corpus_of({s}));
  EXPECT_EQ(v.names(), (std::vector<std::string>{"temporal", "UNKNOWN-DEP", "nsubj-child", "nsubj-parent"}));
}

TEST(EdgeVocab, EmptyDependencyCorpus) {
  const EdgeVocab v = edge_type_vocab(corpus_of({plain_sentence(4)}));
  EXPECT_EQ(v.names(), (std::vector<std::string>{"temporal", "UNKNOWN-DEP"}));
}

TEST(EdgeVocab, StableAcrossBuilds) {
  const auto syn = generate_synthetic(SyntheticConfig{});
  EXPECT_EQ(edge_type_vocab(syn.corpus), edge_type_vocab(syn.corpus));
  EXPECT_EQ(edge_type_vocab(syn.corpus).names(), edge_type_vocab(syn.corpus).names());
}

TEST(BuildDags, TemporalOnly) {
  const EdgeVocab v;
  const DagGraph g = build_dags(plain_sentence(3), v);
  ASSERT_EQ(g.size(), 3u);
  EXPECT_TRUE(g.forward[0].empty());
  EXPECT_EQ(g.forward[1], (std::vector<IncomingEdge>{{0, EdgeVocab::kTemporal}}));
  EXPECT_EQ(g.forward[2], (std::vector<IncomingEdge>{{1, EdgeVocab::kTemporal}}));
  EXPECT_EQ(g.backward[0], (std::vector<IncomingEdge>{{1, EdgeVocab::kTemporal}}));
  EXPECT_EQ(g.backward[1], (std::vector<IncomingEdge>{{2, EdgeVocab::kTemporal}}));
  EXPECT_TRUE(g.backward[2].empty());
}

TEST(BuildDags, SubjectExampleOrientation) {
  // members=0 were=1 hacked=2, nsubj(head=hacked, dependent=members)
  Sentence s = plain_sentence(3);
  s.dep_edges.push_back({2, 0, "nsubj"});
  EdgeVocab v;
  const auto child = v.intern("nsubj", SourceRole::Child);
  const auto parent = v.intern("nsubj", SourceRole::Parent);
  const DagGraph g = build_dags(s, v);
  EXPECT_EQ(g.forward[2], (std::vector<IncomingEdge>{{1, EdgeVocab::kTemporal}, {0, child}}));
  EXPECT_EQ(g.backward[0], (std::vector<IncomingEdge>{{1, EdgeVocab::kTemporal}, {2, parent}}));
}

TEST(BuildDags, AdjacentDependencyDuplicatesSource) {
  Sentence s = plain_sentence(2);
  s.dep_edges.push_back({1, 0, "auxpass"});
  EdgeVocab v;
  const DagGraph g = build_dags(s, v, true);
  ASSERT_EQ(g.forward[1].size(), 2u);
  EXPECT_EQ(g.forward[1][0].source, 0u);
  EXPECT_EQ(g.forward[1][1].source, 0u);
  EXPECT_EQ(v.at(g.forward[1][1].type).name(), "auxpass-child");
  ASSERT_EQ(g.backward[0].size(), 2u);
  EXPECT_EQ(v.at(g.backward[0][1].type).name(), "auxpass-parent");
}

TEST(BuildDags, UnknownLabelMapsToUnknownDependency) {
  Sentence s = plain_sentence(3);
  s.dep_edges.push_back({0, 2, "xcomp"});
  const EdgeVocab v;
  const DagGraph g = build_dags(s, v);
  EXPECT_EQ(g.forward[2].back().type, EdgeVocab::kUnknownDependency);
  EXPECT_EQ(g.backward[0].back().type, EdgeVocab::kUnknownDependency);
}

TEST(BuildDags, RandomSentencesSatisfyInvariants) {
  Rng rng(31);
  const EdgeVocab v = testsupport::test_edge_vocab();
  for (int trial = 0; trial < 500; ++trial) {
    const Sentence s = testsupport::random_sentence(rng, 12, 1, 2, 6);
    const DagGraph g = build_dags(s, v);
    const std::size_t n = s.size();
    // Acyclic with token order as a topological order.
    for (std::size_t t = 0; t < n; ++t) {
      for (const auto& e : g.forward[t]) EXPECT_LT(e.source, t);
      for (const auto& e : g.backward[t]) EXPECT_GT(e.source, t);
    }
    // Temporal edges everywhere except direction-initial nodes.
    EXPECT_TRUE(std::none_of(g.forward[0].begin(), g.forward[0].end(),
                             [](const IncomingEdge& e) { return e.type == EdgeVocab::kTemporal; }));
    EXPECT_TRUE(std::none_of(g.backward[n - 1].begin(), g.backward[n - 1].end(),
                             [](const IncomingEdge& e) { return e.type == EdgeVocab::kTemporal; }));
    // Each dependency edge appears exactly once per side.
    std::size_t fwd_deps = 0, bwd_deps = 0;
    for (std::size_t t = 0; t < n; ++t) {
      for (const auto& e : g.forward[t]) fwd_deps += e.type != EdgeVocab::kTemporal || e.source + 1 != t;
      for (const auto& e : g.backward[t]) bwd_deps += e.type != EdgeVocab::kTemporal || e.source != t + 1;
    }
    EXPECT_EQ(fwd_deps, s.dep_edges.size());
    EXPECT_EQ(bwd_deps, s.dep_edges.size());
    for (const auto& d : s.dep_edges) {
      const std::size_t lo = std::min(d.head, d.dependent), hi = std::max(d.head, d.dependent);
      const auto fwd_role = d.head == lo ? SourceRole::Parent : SourceRole::Child;
      const auto bwd_role = d.head == hi ? SourceRole::Parent : SourceRole::Child;
      const IncomingEdge fe{lo, v.lookup(d.label, fwd_role)};
      const IncomingEdge be{hi, v.lookup(d.label, bwd_role)};
      EXPECT_EQ(std::count(g.forward[hi].begin(), g.forward[hi].end(), fe), 1);
      EXPECT_EQ(std::count(g.backward[lo].begin(), g.backward[lo].end(), be), 1);
    }
  }
}
