// SPDX-License-Identifier: Apache-2.0
#include "daggru/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace daggru {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "daggru-checkpoint";

json config_to_json(const ModelConfig& c) {
  return json{{"architecture", to_string(c.architecture)},
              {"combine", to_string(c.combine)},
              {"hidden", c.hidden},
              {"edge_dim", c.edge_dim},
              {"input_dim", c.input_dim},
              {"n_labels", c.n_labels},
              {"n_edge_types", c.n_edge_types},
              {"dropout", c.dropout}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.architecture = architecture_from_string(j.at("architecture").get<std::string>());
  c.combine = combine_from_string(j.at("combine").get<std::string>());
  c.hidden = j.at("hidden").get<std::size_t>();
  c.edge_dim = j.at("edge_dim").get<std::size_t>();
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.n_labels = j.at("n_labels").get<std::size_t>();
  c.n_edge_types = j.at("n_edge_types").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  return c;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& cp) {
  json tensors = json::object();
  for (const auto& [name, t] : cp.params.tensors()) {
    tensors[name] = json{{"shape", t->shape()}, {"data", t->values()}};
  }
  const json j{{"format", kFormat},
               {"version", kCheckpointVersion},
               {"config", config_to_json(cp.params.config)},
               {"labels", cp.labels.names()},
               {"edge_types", cp.edges.names()},
               {"tensors", std::move(tensors)}};
  return j.dump() + "\n";
}

Checkpoint deserialize_checkpoint(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.value("format", std::string()) != kFormat) throw CheckpointError("not a checkpoint file");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " + j.at("version").dump());
    }
    Checkpoint cp;
    const ModelConfig config = config_from_json(j.at("config"));
    cp.params = allocate_params(config);

    const auto label_names = j.at("labels").get<std::vector<std::string>>();
    if (label_names.empty() || label_names[0] != LabelVocab::kNilName) {
      throw CheckpointError("label vocabulary must start with NIL");
    }
    cp.labels = LabelVocab(std::vector<std::string>(label_names.begin() + 1, label_names.end()));
    if (cp.labels.size() != label_names.size()) throw CheckpointError("duplicate label names");
    if (cp.labels.size() != config.n_labels) {
      throw CheckpointError("label vocabulary size disagrees with n_labels");
    }
    cp.edges = EdgeVocab::from_names(j.at("edge_types").get<std::vector<std::string>>());
    if (config.architecture == Architecture::Dag && cp.edges.size() != config.n_edge_types) {
      throw CheckpointError("edge vocabulary size disagrees with n_edge_types");
    }

    const json& tensors = j.at("tensors");
    auto active = cp.params.tensors();
    if (tensors.size() != active.size()) {
      throw CheckpointError("checkpoint holds " + std::to_string(tensors.size()) +
                            " tensors, config expects " + std::to_string(active.size()));
    }
    for (auto& [name, t] : active) {
      if (!tensors.contains(name)) throw CheckpointError("missing tensor " + name);
      const json& jt = tensors.at(name);
      const auto shape = jt.at("shape").get<Shape>();
      if (shape != t->shape()) {
        throw CheckpointError("tensor " + name + " has shape " + shape_string(shape) +
                              ", expected " + shape_string(t->shape()));
      }
      *t = Tensor(shape, jt.at("data").get<std::vector<double>>());
    }
    cp.params.validate();
    return cp;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw CheckpointError(e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(e.what());
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  out << serialize_checkpoint(checkpoint);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return deserialize_checkpoint(buf.str());
  } catch (const CheckpointError& e) {
    throw CheckpointError(path + ": " + e.what());
  }
}

}  // namespace daggru
