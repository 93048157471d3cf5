#pragma once

// Minimal reverse-mode automatic differentiation over dense matrices.
//
// A Tensor is a handle to a graph node holding a value and (for nodes that
// require gradients) an accumulated gradient. Operations record a backward
// closure when at least one input requires gradients and grad mode is on.
// Gradients accumulate into leaves until zero_grad() is called.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "adgen/matrix.hpp"

namespace adgen::ag {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Node&)> backward_fn;

  Matrix& ensure_grad() {
    if (grad.size() != value.size()) grad = Matrix(value.rows(), value.cols());
    return grad;
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(Matrix value);
  // Leaf that accumulates gradients.
  static Tensor parameter(Matrix value);

  bool defined() const noexcept { return node_ != nullptr; }
  const Matrix& value() const noexcept { return node_->value; }
  // Direct access for optimizers and initializers; bypasses the graph.
  Matrix& mutable_value() noexcept { return node_->value; }
  const Matrix& grad() const noexcept { return node_->grad; }
  Matrix& mutable_grad() noexcept { return node_->ensure_grad(); }
  bool requires_grad() const noexcept { return node_->requires_grad; }
  void set_requires_grad(bool on) noexcept { node_->requires_grad = on; }
  std::size_t rows() const noexcept { return node_->value.rows(); }
  std::size_t cols() const noexcept { return node_->value.cols(); }
  double item() const noexcept { return node_->value(0, 0); }
  void zero_grad();

  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

bool grad_enabled() noexcept;

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Seeds d(root)/d(root) = 1 for a 1×1 root and propagates to every reachable
// node that requires gradients.
void backward(const Tensor& root);

Tensor matmul(const Tensor& a, const Tensor& b);
// x·W + b, with W stored in×out and b a 1×out row.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
// Row-wise normalization with a 1×cols gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
// tanh approximation
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
// Multi-head scaled dot-product attention over already-projected q, k, v.
// Heads split the columns evenly. `causal` requires q and k to have the same
// row count and masks keys after the query position.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                 bool causal);
Tensor gather_rows(const Tensor& table, std::span<const int> ids);
// For j in [0, targets.size()): log softmax(logits[first_row + j])[targets[j]],
// returned as an n×1 column.
Tensor log_softmax_pick(const Tensor& logits, std::size_t first_row, std::span<const int> targets);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Elementwise max(0, x); the subgradient at exactly 0 is 0.
Tensor hinge(const Tensor& a);
// Mean binary cross-entropy of sigmoid(logits) (n×1) against 0/1 labels.
// Positive terms are multiplied by positive_weight.
Tensor bce_with_logits(const Tensor& logits, std::span<const double> labels,
                       double positive_weight = 1.0);

}  // namespace adgen::ag
