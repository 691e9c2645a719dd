// SPDX-License-Identifier: Apache-2.0
#include "daggru/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace daggru {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                     " vs " + shape_string(b.shape()));
  }
}

void require_vector(const Tensor& a, const char* op) {
  if (a.rank() != 1) {
    throw ShapeError(std::string(op) + ": expected a vector, got " + shape_string(a.shape()));
  }
}

void require_matrix(const Tensor& a, const char* op) {
  if (a.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
  }
}

void add_into(Tensor& dst, const Tensor& src, double factor = 1.0) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * s[i];
}

}  // namespace

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw std::out_of_range("invalid tape variable");
  return nodes_[v.id];
}

const Tensor& Tape::value_of(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

const Tensor& Tape::value(Var v) const {
  node(v);
  return value_of(v.id);
}

Tensor* Tape::grad_target(std::uint32_t id) {
  Node& n = nodes_[id];
  switch (n.op) {
    case Op::Constant:
      return nullptr;
    case Op::Parameter:
      return n.external_grad;
    default:
      if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) {
        n.grad = Tensor(n.value.shape());
      }
      return &n.grad;
  }
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(const Tensor& value, Tensor* grad) {
  if (grad && !grad->same_shape(value)) {
    throw ShapeError("parameter gradient shape " + shape_string(grad->shape()) +
                     " does not match value " + shape_string(value.shape()));
  }
  Node n;
  n.op = Op::Parameter;
  n.external = &value;
  n.external_grad = grad;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_matrix(A, "matmul");
  if (B.rank() == 0 || B.rank() > 2 || B.shape()[0] != A.cols()) {
    throw ShapeError("matmul: inner extents disagree " + shape_string(A.shape()) + " x " +
                     shape_string(B.shape()));
  }
  const std::size_t m = A.rows(), n = A.cols();
  Tensor out;
  if (B.rank() == 1) {
    out = Tensor(Shape{m});
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = A.data().data() + i * n;
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += arow[k] * B[k];
      out[i] = s;
    }
  } else {
    const std::size_t p = B.cols();
    out = Tensor(Shape{m, p});
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        const double aik = A.at(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < p; ++j) out.at(i, j) += aik * B.at(k, j);
      }
    }
  }
  Node node;
  node.op = Op::MatMul;
  node.a = a.id;
  node.b = b.id;
  node.value = std::move(out);
  return push(std::move(node));
}

Var Tape::elementwise(ElementwiseOp op, Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  Node node;
  node.a = a.id;
  node.b = b.id;
  switch (op) {
    case ElementwiseOp::Add: node.op = Op::Add; break;
    case ElementwiseOp::Sub: node.op = Op::Sub; break;
    case ElementwiseOp::Mul: node.op = Op::Mul; break;
    default: throw std::invalid_argument("elementwise: unary op given two operands");
  }
  require_same_shape(A, B, "elementwise");
  Tensor out(A.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    switch (node.op) {
      case Op::Add: out[i] = A[i] + B[i]; break;
      case Op::Sub: out[i] = A[i] - B[i]; break;
      default: out[i] = A[i] * B[i]; break;
    }
  }
  node.value = std::move(out);
  return push(std::move(node));
}

Var Tape::elementwise(ElementwiseOp op, Var a) {
  const Tensor& A = value(a);
  Node node;
  node.a = a.id;
  Tensor out(A.shape());
  switch (op) {
    case ElementwiseOp::Sigmoid:
      node.op = Op::Sigmoid;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(A[i]);
      break;
    case ElementwiseOp::Tanh:
      node.op = Op::Tanh;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(A[i]);
      break;
    default:
      throw std::invalid_argument("elementwise: binary op given one operand");
  }
  node.value = std::move(out);
  return push(std::move(node));
}

Var Tape::one_minus(Var a) {
  const Tensor& A = value(a);
  Tensor out(A.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - A[i];
  Node node;
  node.op = Op::OneMinus;
  node.a = a.id;
  node.value = std::move(out);
  return push(std::move(node));
}

Var Tape::scale(Var a, double factor) {
  const Tensor& A = value(a);
  Tensor out(A.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * A[i];
  Node node;
  node.op = Op::Scale;
  node.a = a.id;
  node.factor = factor;
  node.value = std::move(out);
  return push(std::move(node));
}

Var Tape::softmax(Var v) {
  const Tensor& V = value(v);
  require_vector(V, "softmax");
  if (V.size() == 0) throw ShapeError("softmax: empty input");
  const double mx = *std::max_element(V.data().begin(), V.data().end());
  Tensor out(V.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < V.size(); ++i) {
    out[i] = std::exp(V[i] - mx);
    total += out[i];
  }
  for (std::size_t i = 0; i < V.size(); ++i) out[i] /= total;
  Node node;
  node.op = Op::Softmax;
  node.a = v.id;
  node.value = std::move(out);
  return push(std::move(node));
}

Var Tape::concat(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_vector(A, "concat");
  require_vector(B, "concat");
  std::vector<double> data;
  data.reserve(A.size() + B.size());
  data.insert(data.end(), A.data().begin(), A.data().end());
  data.insert(data.end(), B.data().begin(), B.data().end());
  Node node;
  node.op = Op::Concat;
  node.a = a.id;
  node.b = b.id;
  node.value = Tensor::vector(std::move(data));
  return push(std::move(node));
}

Var Tape::stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const std::size_t n = value(rows[0]).size();
  Tensor out(Shape{rows.size(), n});
  Node node;
  node.op = Op::StackRows;
  node.operands.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Tensor& r = value(rows[i]);
    require_vector(r, "stack_rows");
    if (r.size() != n) {
      throw ShapeError("stack_rows: row " + std::to_string(i) + " has length " +
                       std::to_string(r.size()) + ", expected " + std::to_string(n));
    }
    std::copy(r.data().begin(), r.data().end(), out.data().begin() + i * n);
    node.operands.push_back(rows[i].id);
  }
  node.value = std::move(out);
  return push(std::move(node));
}

Var Tape::row(Var matrix, std::size_t r) {
  const Tensor& M = value(matrix);
  require_matrix(M, "row");
  if (r >= M.rows()) {
    throw ShapeError("row: index " + std::to_string(r) + " out of range for " +
                     shape_string(M.shape()));
  }
  const auto begin = M.data().begin() + r * M.cols();
  Node node;
  node.op = Op::Row;
  node.a = matrix.id;
  node.index = r;
  node.value = Tensor::vector(std::vector<double>(begin, begin + M.cols()));
  return push(std::move(node));
}

Var Tape::transpose(Var matrix) {
  const Tensor& M = value(matrix);
  require_matrix(M, "transpose");
  Tensor out(Shape{M.cols(), M.rows()});
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = 0; j < M.cols(); ++j) out.at(j, i) = M.at(i, j);
  Node node;
  node.op = Op::Transpose;
  node.a = matrix.id;
  node.value = std::move(out);
  return push(std::move(node));
}

Var Tape::sum(Var a) {
  double s = 0.0;
  for (double v : value(a).data()) s += v;
  Node node;
  node.op = Op::Sum;
  node.a = a.id;
  node.value = Tensor::scalar(s);
  return push(std::move(node));
}

Var Tape::cross_entropy(Var logits, std::size_t gold) {
  const Tensor& L = value(logits);
  require_vector(L, "cross_entropy");
  if (gold >= L.size()) {
    throw std::out_of_range("cross_entropy: gold index " + std::to_string(gold) +
                            " out of range for " + std::to_string(L.size()) + " classes");
  }
  const double mx = *std::max_element(L.data().begin(), L.data().end());
  double total = 0.0;
  for (double v : L.data()) total += std::exp(v - mx);
  Node node;
  node.op = Op::CrossEntropy;
  node.a = logits.id;
  node.index = gold;
  node.value = Tensor::scalar(mx + std::log(total) - L[gold]);
  return push(std::move(node));
}

void Tape::backward(Var loss) {
  const Tensor& L = value(loss);
  if (L.size() != 1 || L.rank() > 1) {
    throw ShapeError("backward: loss must be a scalar, got " + shape_string(L.shape()));
  }
  for (auto& n : nodes_) {
    if (n.op != Op::Parameter && n.op != Op::Constant) n.grad = Tensor();
  }
  if (Tensor* seed = grad_target(loss.id)) (*seed)[0] += 1.0;
  if (nodes_[loss.id].op == Op::Parameter || nodes_[loss.id].op == Op::Constant) return;

  for (std::int64_t i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.op == Op::Constant || n.op == Op::Parameter) continue;
    if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) continue;
    const Tensor& g = n.grad;
    const Tensor& y = n.value;
    switch (n.op) {
      case Op::MatMul: {
        const Tensor& A = value_of(n.a);
        const Tensor& B = value_of(n.b);
        const std::size_t m = A.rows(), k = A.cols();
        Tensor* dA = grad_target(n.a);
        Tensor* dB = grad_target(n.b);
        if (B.rank() == 1) {
          if (dA) {
            for (std::size_t r = 0; r < m; ++r) {
              const double gr = g[r];
              if (gr == 0.0) continue;
              double* drow = dA->data().data() + r * k;
              for (std::size_t c = 0; c < k; ++c) drow[c] += gr * B[c];
            }
          }
          if (dB) {
            for (std::size_t r = 0; r < m; ++r) {
              const double gr = g[r];
              if (gr == 0.0) continue;
              const double* arow = A.data().data() + r * k;
              for (std::size_t c = 0; c < k; ++c) (*dB)[c] += gr * arow[c];
            }
          }
        } else {
          const std::size_t p = B.cols();
          if (dA) {
            for (std::size_t r = 0; r < m; ++r)
              for (std::size_t c = 0; c < k; ++c) {
                double s = 0.0;
                for (std::size_t j = 0; j < p; ++j) s += g.at(r, j) * B.at(c, j);
                dA->at(r, c) += s;
              }
          }
          if (dB) {
            for (std::size_t r = 0; r < m; ++r)
              for (std::size_t c = 0; c < k; ++c) {
                const double arc = A.at(r, c);
                for (std::size_t j = 0; j < p; ++j) dB->at(c, j) += arc * g.at(r, j);
              }
          }
        }
        break;
      }
      case Op::Add:
        if (Tensor* d = grad_target(n.a)) add_into(*d, g);
        if (Tensor* d = grad_target(n.b)) add_into(*d, g);
        break;
      case Op::Sub:
        if (Tensor* d = grad_target(n.a)) add_into(*d, g);
        if (Tensor* d = grad_target(n.b)) add_into(*d, g, -1.0);
        break;
      case Op::Mul: {
        const Tensor& A = value_of(n.a);
        const Tensor& B = value_of(n.b);
        if (Tensor* d = grad_target(n.a))
          for (std::size_t j = 0; j < g.size(); ++j) (*d)[j] += g[j] * B[j];
        if (Tensor* d = grad_target(n.b))
          for (std::size_t j = 0; j < g.size(); ++j) (*d)[j] += g[j] * A[j];
        break;
      }
      case Op::Sigmoid:
        if (Tensor* d = grad_target(n.a))
          for (std::size_t j = 0; j < g.size(); ++j) (*d)[j] += g[j] * y[j] * (1.0 - y[j]);
        break;
      case Op::Tanh:
        if (Tensor* d = grad_target(n.a))
          for (std::size_t j = 0; j < g.size(); ++j) (*d)[j] += g[j] * (1.0 - y[j] * y[j]);
        break;
      case Op::OneMinus:
        if (Tensor* d = grad_target(n.a)) add_into(*d, g, -1.0);
        break;
      case Op::Scale:
        if (Tensor* d = grad_target(n.a)) add_into(*d, g, n.factor);
        break;
      case Op::Softmax:
        if (Tensor* d = grad_target(n.a)) {
          double dot = 0.0;
          for (std::size_t j = 0; j < g.size(); ++j) dot += g[j] * y[j];
          for (std::size_t j = 0; j < g.size(); ++j) (*d)[j] += y[j] * (g[j] - dot);
        }
        break;
      case Op::Concat: {
        const std::size_t na = value_of(n.a).size();
        if (Tensor* d = grad_target(n.a))
          for (std::size_t j = 0; j < na; ++j) (*d)[j] += g[j];
        if (Tensor* d = grad_target(n.b))
          for (std::size_t j = na; j < g.size(); ++j) (*d)[j - na] += g[j];
        break;
      }
      case Op::StackRows: {
        const std::size_t width = y.cols();
        for (std::size_t r = 0; r < n.operands.size(); ++r) {
          if (Tensor* d = grad_target(n.operands[r]))
            for (std::size_t j = 0; j < width; ++j) (*d)[j] += g.at(r, j);
        }
        break;
      }
      case Op::Row:
        if (Tensor* d = grad_target(n.a)) {
          const std::size_t width = g.size();
          for (std::size_t j = 0; j < width; ++j) d->at(n.index, j) += g[j];
        }
        break;
      case Op::Transpose:
        if (Tensor* d = grad_target(n.a))
          for (std::size_t r = 0; r < y.rows(); ++r)
            for (std::size_t c = 0; c < y.cols(); ++c) d->at(c, r) += g.at(r, c);
        break;
      case Op::Sum:
        if (Tensor* d = grad_target(n.a))
          for (auto& v : d->data()) v += g[0];
        break;
      case Op::CrossEntropy:
        if (Tensor* d = grad_target(n.a)) {
          const Tensor& logits = value_of(n.a);
          const double mx = *std::max_element(logits.data().begin(), logits.data().end());
          double total = 0.0;
          for (double v : logits.data()) total += std::exp(v - mx);
          for (std::size_t j = 0; j < logits.size(); ++j) {
            const double p = std::exp(logits[j] - mx) / total;
            (*d)[j] += g[0] * (p - (j == n.index ? 1.0 : 0.0));
          }
        }
        break;
      case Op::Constant:
      case Op::Parameter:
        break;
    }
  }
}

}  // namespace daggru
