// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "daggru/tensor.hpp"

namespace daggru {

/// Handle to a value recorded on a Tape. Only meaningful for the tape that
/// produced it.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

enum class ElementwiseOp { Add, Sub, Mul, Sigmoid, Tanh };

double stable_sigmoid(double x);

/// Reverse-mode computation record. Each op appends one node whose operands
/// are earlier nodes, so the node list is always in topological order and
/// backward() is a single reverse sweep.
///
/// Parameters are bound by reference: the tape reads the caller's tensor
/// without copying it and backward() accumulates straight into the caller's
/// gradient buffer. Both must outlive the tape's use.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// `grad` may be null, in which case the parameter is treated as a constant.
  Var parameter(const Tensor& value, Tensor* grad);

  /// (m x n)(n x p) -> (m x p), or (m x n)(n) -> (m).
  Var matmul(Var a, Var b);
  Var elementwise(ElementwiseOp op, Var a, Var b);
  Var elementwise(ElementwiseOp op, Var a);
  Var add(Var a, Var b) { return elementwise(ElementwiseOp::Add, a, b); }
  Var sub(Var a, Var b) { return elementwise(ElementwiseOp::Sub, a, b); }
  Var mul(Var a, Var b) { return elementwise(ElementwiseOp::Mul, a, b); }
  Var sigmoid(Var a) { return elementwise(ElementwiseOp::Sigmoid, a); }
  Var tanh(Var a) { return elementwise(ElementwiseOp::Tanh, a); }
  /// 1 - a, elementwise.
  Var one_minus(Var a);
  Var scale(Var a, double factor);

  Var softmax(Var v);
  Var concat(Var a, Var b);
  /// Stacks equal-length vectors into an (m x n) matrix.
  Var stack_rows(std::span<const Var> rows);
  /// Row r of a matrix as a vector.
  Var row(Var matrix, std::size_t r);
  Var transpose(Var matrix);
  Var sum(Var a);
  /// -log softmax(logits)[gold], a scalar.
  Var cross_entropy(Var logits, std::size_t gold);

  const Tensor& value(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  /// Propagates d(loss)/d(node) to every bound parameter gradient. Gradients
  /// add into the existing buffers, so several backward passes over
  /// different tapes accumulate.
  void backward(Var loss);

 private:
  enum class Op : std::uint8_t {
    Constant, Parameter, MatMul, Add, Sub, Mul, Sigmoid, Tanh, OneMinus,
    Scale, Softmax, Concat, StackRows, Row, Transpose, Sum, CrossEntropy
  };

  struct Node {
    Op op = Op::Constant;
    std::uint32_t a = UINT32_MAX;
    std::uint32_t b = UINT32_MAX;
    std::size_t index = 0;  // gold class, row number
    double factor = 0.0;
    Tensor value;
    Tensor grad;
    const Tensor* external = nullptr;
    Tensor* external_grad = nullptr;
    std::vector<std::uint32_t> operands;  // stack_rows only
  };

  Var push(Node node);
  const Node& node(Var v) const;
  const Tensor& value_of(std::uint32_t id) const;
  /// Accumulation target for node `id`, allocated on first use; null when the
  /// node cannot carry gradient.
  Tensor* grad_target(std::uint32_t id);

  std::vector<Node> nodes_;
};

}  // namespace daggru
