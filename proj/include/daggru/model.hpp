// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "daggru/corpus.hpp"
#include "daggru/graph.hpp"
#include "daggru/rng.hpp"
#include "daggru/tape.hpp"
#include "daggru/tensor.hpp"

namespace daggru {

enum class Architecture { Dag, PlainBiGru };

/// How a node merges its incoming hidden states.
enum class Combine {
  Attention,    // variant A
  Averaging,    // variant B
  PerEdgeType,  // one transform U_e per edge type instead of U_a + v_e
};

struct ModelConfig {
  Architecture architecture = Architecture::Dag;
  Combine combine = Combine::Attention;
  std::size_t hidden = 128;
  std::size_t edge_dim = 32;
  std::size_t input_dim = 0;     // k
  std::size_t n_labels = 0;      // C, including NIL
  std::size_t n_edge_types = 0;  // edge vocabulary size
  double dropout = 0.5;

  /// Throws std::invalid_argument on zero sizes or a rate outside [0, 1).
  void validate() const;
  /// Width of the per-token representation fed to the classifier.
  std::size_t classifier_width() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

std::string to_string(Architecture a);
std::string to_string(Combine c);
Architecture architecture_from_string(const std::string& s);
Combine combine_from_string(const std::string& s);

/// Recurrent weights of one reading direction.
struct DirectionParams {
  Tensor W_r, W_z, W_h;  // hidden x k
  Tensor U_r, U_z, U_h;  // hidden x hidden
  Tensor b_r, b_z, b_h;  // hidden
  Tensor U_a;            // hidden x (hidden + edge_dim)
  Tensor w_a;            // hidden
  std::vector<Tensor> U_e;  // per edge type, hidden x hidden

  friend bool operator==(const DirectionParams&, const DirectionParams&) = default;
};

/// All learnable tensors. Tensors a configuration does not use stay empty
/// and are skipped by tensors().
struct ModelParams {
  ModelConfig config;
  DirectionParams forward;
  DirectionParams backward;
  Tensor edge_embeddings;  // n_edge_types x edge_dim, shared by both directions
  Tensor W_o;              // C x classifier_width
  Tensor b_o;              // C

  /// Active tensors in a fixed order with stable dotted names.
  std::vector<std::pair<std::string, Tensor*>> tensors();
  std::vector<std::pair<std::string, const Tensor*>> tensors() const;

  /// Same config and shapes, every value zero.
  ModelParams zeros_like() const;
  std::size_t parameter_count() const;
  /// Throws ShapeError naming the first tensor whose shape disagrees with
  /// the config, or that holds a non-finite value.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Allocates zero tensors of the right shapes for `config`.
ModelParams allocate_params(const ModelConfig& config);

/// Glorot-uniform matrices, zero biases, edge embeddings uniform in
/// [-0.1, 0.1]. Deterministic per seed.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

struct BoundDirection {
  Var W_r, W_z, W_h, U_r, U_z, U_h, b_r, b_z, b_h, U_a, w_a;
  std::vector<Var> U_e;
};

struct BoundParams {
  BoundDirection forward, backward;
  Var edge_embeddings, W_o, b_o;
};

/// Registers every active tensor on the tape. With `grads` non-null,
/// backward() accumulates into the matching tensors of `grads`.
BoundParams bind(Tape& tape, const ModelParams& params, ModelParams* grads = nullptr);

/// r = σ(W_r x + U_r h + b_r), z = σ(W_z x + U_z h + b_z),
/// h̃ = tanh(W_h x + r ⊙ U_h h + b_h), out = (1 − z) ⊙ h + z ⊙ h̃.
Var gru_cell(Tape& tape, Var x, Var h_in, const BoundDirection& p);

struct Incoming {
  Var hidden;
  EdgeTypeId type = EdgeVocab::kTemporal;
};

struct Combined {
  Var h_a;
  /// Attention weights, one per incoming edge; invalid for averaging.
  Var attention;
  /// The transformed rows D_t (m x hidden).
  Var rows;
};

/// Row i is tanh(U_a [h_i ; v_e_i]) (or tanh(U_e h_i) for PerEdgeType).
/// Attention weights rows by softmax(tanh(D w_a)); averaging takes their
/// mean. Throws std::invalid_argument on an empty list.
Combined combine(Tape& tape, std::span<const Incoming> incoming, const BoundDirection& p,
                 Var edge_embeddings, Combine mode);

/// Runs one direction over a DAG side: nodes in index order when `reverse`
/// is false, reverse order otherwise. Each node's incoming states are
/// combined and fed to the GRU cell in place of h_{t-1}. A node without
/// incoming edges (the direction-initial token) reads the zero initial
/// state through a synthetic temporal edge.
std::vector<Var> run_direction(Tape& tape, std::span<const Var> inputs,
                               const std::vector<std::vector<IncomingEdge>>& incoming,
                               bool reverse, const BoundDirection& p, Var edge_embeddings,
                               const ModelConfig& config);

/// Plain sequential GRU: h_t = gru_cell(x_t, h_{t-1}), h_{-1} = 0.
std::vector<Var> run_sequential(Tape& tape, std::span<const Var> inputs, bool reverse,
                                const BoundDirection& p);

/// Token embeddings as tape constants.
std::vector<Var> embed(Tape& tape, const Sentence& sentence);

/// Per-token logits. `dropout_rng` null means eval mode (no dropout);
/// otherwise inverted dropout at config.dropout is applied to the
/// concatenated representation. Dispatches on config.architecture; the
/// graph is ignored by the plain BiGRU.
std::vector<Var> forward(Tape& tape, const Sentence& sentence, const DagGraph& graph,
                         const BoundParams& p, const ModelConfig& config, Rng* dropout_rng);

/// [h_f,t ; h_b,t] per token -> dropout -> linear classifier.
std::vector<Var> forward_dag(Tape& tape, const Sentence& sentence, const DagGraph& graph,
                             const BoundParams& p, const ModelConfig& config, Rng* dropout_rng);

/// [h_f,t ; h_b,t ; h_f,n-1 ; h_b,0] per token -> dropout -> classifier.
std::vector<Var> forward_plain_bigru(Tape& tape, const Sentence& sentence, const BoundParams& p,
                                     const ModelConfig& config, Rng* dropout_rng);

/// Sum of per-token cross-entropies, multiplied by `scale`.
Var sentence_loss(Tape& tape, std::span<const Var> logits, const Sentence& sentence,
                  double scale = 1.0);

/// Eval-mode logits as plain tensors.
std::vector<Tensor> eval_logits(const Sentence& sentence, const EdgeVocab& edges,
                                const ModelParams& params);

/// Index of the largest entry; the smallest index wins ties.
LabelId argmax(const Tensor& logits);

/// Eval-mode argmax labels per token.
std::vector<LabelId> predict(const Sentence& sentence, const EdgeVocab& edges,
                             const ModelParams& params);

}  // namespace daggru
