// SPDX-License-Identifier: Apache-2.0
#include "daggru/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "daggru/rng.hpp"

namespace daggru {

using nlohmann::json;

LabelVocab::LabelVocab() { add(kNilName); }

LabelVocab::LabelVocab(const std::vector<std::string>& names) : LabelVocab() {
  for (const auto& n : names) add(n);
}

LabelId LabelVocab::add(const std::string& name) {
  if (auto it = index_.find(name); it != index_.end()) return it->second;
  const LabelId id = names_.size();
  names_.push_back(name);
  index_.emplace(name, id);
  return id;
}

std::optional<LabelId> LabelVocab::find(const std::string& name) const {
  if (auto it = index_.find(name); it != index_.end()) return it->second;
  return std::nullopt;
}

LabelId LabelVocab::id(const std::string& name) const {
  if (auto found = find(name)) return *found;
  throw CorpusError("unknown label '" + name + "'");
}

const Document* Corpus::find(const std::string& id) const {
  for (const auto& d : documents)
    if (d.id == id) return &d;
  return nullptr;
}

std::size_t Corpus::sentence_count() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.sentences.size();
  return n;
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& d : documents)
    for (const auto& s : d.sentences) n += s.size();
  return n;
}

namespace {

std::string where(const Document& doc, std::size_t s) {
  return "document '" + doc.id + "' sentence " + std::to_string(s);
}

void validate_sentence(const Document& doc, std::size_t s_idx, const Sentence& s,
                       const LabelVocab& labels, std::size_t k) {
  if (s.tokens.empty()) throw CorpusError(where(doc, s_idx) + ": empty sentence");
  for (std::size_t t = 0; t < s.tokens.size(); ++t) {
    const Token& tok = s.tokens[t];
    if (tok.gold_label >= labels.size()) {
      throw CorpusError(where(doc, s_idx) + " token " + std::to_string(t) +
                        ": label id out of range");
    }
    if (tok.embedding.size() != k) {
      throw CorpusError(where(doc, s_idx) + " token " + std::to_string(t) + " ('" + tok.surface +
                        "'): embedding length " + std::to_string(tok.embedding.size()) +
                        " != k = " + std::to_string(k));
    }
    for (double v : tok.embedding) {
      if (!std::isfinite(v)) {
        throw CorpusError(where(doc, s_idx) + " token " + std::to_string(t) +
                          ": non-finite embedding value");
      }
    }
  }
  for (std::size_t e = 0; e < s.dep_edges.size(); ++e) {
    const auto& edge = s.dep_edges[e];
    const std::string at = where(doc, s_idx) + " dependency " + std::to_string(e);
    if (edge.head >= s.size() || edge.dependent >= s.size()) {
      throw CorpusError(at + ": dangling index (" + std::to_string(edge.head) + ", " +
                        std::to_string(edge.dependent) + ") for " + std::to_string(s.size()) +
                        " tokens");
    }
    if (edge.head == edge.dependent) throw CorpusError(at + ": self-loop");
    if (edge.label.empty()) throw CorpusError(at + ": empty relation label");
  }
}

}  // namespace

void validate(const Corpus& corpus) {
  std::set<std::string> ids;
  for (const auto& doc : corpus.documents) {
    if (!ids.insert(doc.id).second) throw CorpusError("duplicate document id '" + doc.id + "'");
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      validate_sentence(doc, s, doc.sentences[s], corpus.labels, corpus.embedding_dim);
    }
  }
}

namespace {

std::size_t as_index(const json& v, const std::string& what) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw CorpusError(what + " must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

const json& member(const json& obj, const char* key, const std::string& what) {
  if (!obj.is_object() || !obj.contains(key)) throw CorpusError(what + ": missing '" + key + "'");
  return obj.at(key);
}

struct RawToken {
  std::string surface;
  std::string label;
  std::optional<std::vector<double>> embedding;
};

}  // namespace

Corpus parse_corpus(std::istream& in, const std::string& source) {
  struct PendingDoc {
    Document doc;
    std::vector<std::vector<RawToken>> tokens;
    std::size_t line;
  };
  std::vector<PendingDoc> pending;
  std::set<std::string> event_names;
  std::optional<std::size_t> k;
  bool any_embedding = false, any_missing = false;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string at = source + ":" + std::to_string(line_no);
    try {
      const json j = json::parse(line);
      PendingDoc pd;
      pd.line = line_no;
      pd.doc.id = member(j, "id", at).get<std::string>();
      pd.doc.domain = j.value("domain", std::string());
      for (const auto& js : member(j, "sentences", at)) {
        Sentence sentence;
        std::vector<RawToken> raw;
        for (const auto& jt : member(js, "tokens", at)) {
          RawToken rt;
          rt.surface = member(jt, "surface", at).get<std::string>();
          rt.label = jt.value("label", std::string(LabelVocab::kNilName));
          if (jt.contains("embedding")) {
            rt.embedding = jt.at("embedding").get<std::vector<double>>();
            const std::size_t pos = raw.size();
            if (k && *k != rt.embedding->size()) {
              throw CorpusError("sentence " + std::to_string(pd.doc.sentences.size()) +
                                " token " + std::to_string(pos) + ": embedding length " +
                                std::to_string(rt.embedding->size()) + " != k = " +
                                std::to_string(*k));
            }
            k = rt.embedding->size();
            any_embedding = true;
          } else {
            any_missing = true;
          }
          if (rt.label != LabelVocab::kNilName) event_names.insert(rt.label);
          raw.push_back(std::move(rt));
        }
        if (js.contains("deps")) {
          for (const auto& jd : js.at("deps")) {
            if (!jd.is_array() || jd.size() != 3) {
              throw CorpusError("dependency must be [head, dependent, label]");
            }
            sentence.dep_edges.push_back(DependencyEdge{as_index(jd[0], "dependency head"),
                                                        as_index(jd[1], "dependency dependent"),
                                                        jd[2].get<std::string>()});
          }
        }
        pd.doc.sentences.push_back(std::move(sentence));
        pd.tokens.push_back(std::move(raw));
      }
      pending.push_back(std::move(pd));
    } catch (const json::exception& e) {
      throw CorpusError(at + ": malformed line: " + e.what());
    } catch (const CorpusError& e) {
      throw CorpusError(at + ": " + e.what());
    }
  }
  if (any_embedding && any_missing) {
    throw CorpusError(source + ": some tokens carry embeddings and some do not");
  }

  Corpus corpus;
  corpus.labels = LabelVocab(std::vector<std::string>(event_names.begin(), event_names.end()));
  corpus.embedding_dim = k.value_or(0);
  for (auto& pd : pending) {
    for (std::size_t s = 0; s < pd.tokens.size(); ++s) {
      for (auto& rt : pd.tokens[s]) {
        Token tok;
        tok.surface = std::move(rt.surface);
        tok.gold_label = corpus.labels.id(rt.label);
        if (rt.embedding) tok.embedding = std::move(*rt.embedding);
        pd.doc.sentences[s].tokens.push_back(std::move(tok));
      }
    }
    corpus.documents.push_back(std::move(pd.doc));
  }
  try {
    validate(corpus);
  } catch (const CorpusError& e) {
    throw CorpusError(source + ": " + e.what());
  }
  return corpus;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file '" + path + "'");
  return parse_corpus(in, path);
}

void write_corpus(const Corpus& corpus, std::ostream& out, bool include_embeddings) {
  for (const auto& doc : corpus.documents) {
    json j;
    j["id"] = doc.id;
    j["domain"] = doc.domain;
    json sentences = json::array();
    for (const auto& s : doc.sentences) {
      json tokens = json::array();
      for (const auto& t : s.tokens) {
        json jt{{"surface", t.surface}, {"label", corpus.labels.name(t.gold_label)}};
        if (include_embeddings) jt["embedding"] = t.embedding;
        tokens.push_back(std::move(jt));
      }
      json deps = json::array();
      for (const auto& d : s.dep_edges) deps.push_back(json::array({d.head, d.dependent, d.label}));
      sentences.push_back(json{{"tokens", std::move(tokens)}, {"deps", std::move(deps)}});
    }
    j["sentences"] = std::move(sentences);
    out << j.dump() << '\n';
  }
}

void save_corpus(const Corpus& corpus, const std::string& path, bool include_embeddings) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot write corpus file '" + path + "'");
  write_corpus(corpus, out, include_embeddings);
}

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open embedding file '" + path + "'");
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_dim = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string at = path + ":" + std::to_string(line_no);
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw CorpusError(at + ": expected 'surface<TAB>values'");
    std::string surface = line.substr(0, tab);
    std::vector<double> values;
    const char* p = line.data() + tab + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || !std::isfinite(v)) {
        throw CorpusError(at + ": malformed number in vector for '" + surface + "'");
      }
      values.push_back(v);
      p = next;
    }
    if (values.empty()) throw CorpusError(at + ": empty vector for '" + surface + "'");
    if (!have_dim) {
      table.dim = values.size();
      have_dim = true;
    } else if (values.size() != table.dim) {
      throw CorpusError(at + ": vector length " + std::to_string(values.size()) + " != " +
                        std::to_string(table.dim));
    }
    if (surface == EmbeddingTable::kUnknownKey) {
      table.unknown = std::move(values);
    } else if (!table.vectors.emplace(surface, std::move(values)).second) {
      throw CorpusError(at + ": duplicate surface form '" + surface + "'");
    }
  }
  return table;
}

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot write embedding file '" + path + "'");
  auto write_row = [&](const std::string& surface, const std::vector<double>& v) {
    out << surface << '\t';
    char buf[64];
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v[i]);
      if (i) out << ' ';
      out.write(buf, ptr - buf);
    }
    out << '\n';
  };
  for (const auto& [surface, v] : table.vectors) write_row(surface, v);
  if (table.unknown) write_row(EmbeddingTable::kUnknownKey, *table.unknown);
}

AttachStats attach(Corpus& corpus, const EmbeddingTable& table) {
  AttachStats stats;
  for (auto& doc : corpus.documents)
    for (auto& s : doc.sentences)
      for (auto& tok : s.tokens) {
        if (auto it = table.vectors.find(tok.surface); it != table.vectors.end()) {
          tok.embedding = it->second;
        } else if (table.unknown) {
          tok.embedding = *table.unknown;
          ++stats.fallbacks;
        } else {
          throw CorpusError("no embedding for word '" + tok.surface + "' (document '" + doc.id +
                            "') and no <unk> fallback");
        }
        ++stats.attached;
      }
  corpus.embedding_dim = table.dim;
  return stats;
}

void validate_split(const Corpus& corpus, const CorpusSplit& split) {
  std::set<std::string> seen;
  auto check = [&](const std::vector<std::string>& ids, const char* part) {
    for (const auto& id : ids) {
      if (!corpus.find(id)) {
        throw CorpusError(std::string("split ") + part + ": document '" + id + "' not in corpus");
      }
      if (!seen.insert(id).second) {
        throw CorpusError(std::string("split ") + part + ": document '" + id +
                          "' listed more than once");
      }
    }
  };
  check(split.train, "train");
  check(split.dev, "dev");
  check(split.test, "test");
}

CorpusSplit load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open split manifest '" + path + "'");
  try {
    const json j = json::parse(in);
    CorpusSplit split;
    split.train = j.at("train").get<std::vector<std::string>>();
    split.dev = j.at("dev").get<std::vector<std::string>>();
    split.test = j.at("test").get<std::vector<std::string>>();
    return split;
  } catch (const json::exception& e) {
    throw CorpusError(path + ": malformed split manifest: " + e.what());
  }
}

void save_manifest(const CorpusSplit& split, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot write split manifest '" + path + "'");
  out << json{{"train", split.train}, {"dev", split.dev}, {"test", split.test}}.dump(2) << '\n';
}

CorpusSplit standard_split(const Corpus& corpus, const CorpusSplit& manifest) {
  validate_split(corpus, manifest);
  return manifest;
}

CorpusSplit random_split(const Corpus& corpus, std::uint64_t seed, SplitCounts counts) {
  const std::size_t n = corpus.documents.size();
  if (counts.train + counts.dev + counts.test > n) {
    throw CorpusError("split counts (" + std::to_string(counts.train) + ", " +
                      std::to_string(counts.dev) + ", " + std::to_string(counts.test) +
                      ") exceed corpus size " + std::to_string(n));
  }
  std::vector<std::string> ids;
  ids.reserve(n);
  for (const auto& d : corpus.documents) ids.push_back(d.id);
  Rng rng(derive_seed(seed, 0x5917));
  rng.shuffle(ids);
  CorpusSplit split;
  auto it = ids.begin();
  split.train.assign(it, it + counts.train);
  it += counts.train;
  split.dev.assign(it, it + counts.dev);
  it += counts.dev;
  split.test.assign(it, it + counts.test);
  return split;
}

std::vector<const Sentence*> collect_sentences(const Corpus& corpus,
                                               const std::vector<std::string>& ids) {
  std::vector<const Sentence*> out;
  for (const auto& id : ids) {
    const Document* doc = corpus.find(id);
    if (!doc) throw CorpusError("document '" + id + "' not in corpus");
    for (const auto& s : doc->sentences) out.push_back(&s);
  }
  return out;
}

}  // namespace daggru
