#pragma once

// Dense tensors with tape-based reverse-mode differentiation.
//
// Every tensor is a rank-2 row-major Eigen matrix: vectors are 1 x n rows
// (or n x 1 columns where a column is the natural orientation), scalars are
// 1 x 1. A Tensor is a cheap handle; copies share the underlying node, like
// framework tensors. Use clone() for a deep copy.
//
// Operations whose inputs require gradients append their result node to the
// calling thread's tape. backward() walks that tape in reverse recording
// order, which is a reverse topological order of the computation.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mmgnn/errors.hpp"

namespace mmgnn::ad {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

namespace detail {

template <typename Scalar>
struct Node {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;  // empty until the first accumulation
  bool requires_grad = false;
  bool recorded = false;  // produced by an op and sitting on a tape
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> propagate;

  template <typename Derived>
  void accumulate(const Eigen::MatrixBase<Derived>& delta) {
    if (grad.size() == 0) {
      grad = delta;
    } else {
      grad += delta;
    }
  }

  Node& input(std::size_t i) { return *inputs[i]; }
};

}  // namespace detail

/// Ordered record of differentiable operations executed on this thread.
template <typename Scalar>
class Tape {
 public:
  using NodePtr = std::shared_ptr<detail::Node<Scalar>>;

  static Tape& current() {
    static thread_local Tape tape;
    return tape;
  }

  void record(NodePtr node) {
    node->recorded = true;
    nodes_.push_back(std::move(node));
  }

  std::size_t size() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }
  void set_grad_enabled(bool on) { grad_enabled_ = on; }

  /// Drops the recorded graph. Result tensors still held by callers become
  /// constants.
  void clear() {
    for (auto& n : nodes_) release(*n);
    nodes_.clear();
  }

  /// Runs reverse accumulation over the recorded nodes, then clears.
  void run_backward() {
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      auto& n = **it;
      if (n.grad.size() == 0 || !n.propagate) continue;
      n.propagate(n);
    }
    clear();
  }

 private:
  static void release(detail::Node<Scalar>& n) {
    n.inputs.clear();
    n.propagate = nullptr;
    n.grad.resize(0, 0);
    n.requires_grad = false;
    n.recorded = false;
  }

  std::vector<NodePtr> nodes_;
  bool grad_enabled_ = true;
};

/// Disables recording on the current thread for its lifetime.
template <typename Scalar>
class NoGradGuard {
 public:
  NoGradGuard() : previous_(Tape<Scalar>::current().grad_enabled()) {
    Tape<Scalar>::current().set_grad_enabled(false);
  }
  ~NoGradGuard() { Tape<Scalar>::current().set_grad_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename Scalar>
class Tensor {
 public:
  using Mat = Matrix<Scalar>;
  using NodePtr = std::shared_ptr<detail::Node<Scalar>>;

  Tensor() : node_(std::make_shared<detail::Node<Scalar>>()) {}

  explicit Tensor(Mat value, bool requires_grad = false) : Tensor() {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  static Tensor scalar(Scalar v, bool requires_grad = false) {
    Mat m(1, 1);
    m(0, 0) = v;
    return Tensor(std::move(m), requires_grad);
  }

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false) {
    return Tensor(Mat::Zero(rows, cols), requires_grad);
  }

  static Tensor constant(Index rows, Index cols, Scalar v) {
    return Tensor(Mat::Constant(rows, cols, v));
  }

  static Tensor row(const std::vector<Scalar>& values, bool requires_grad = false) {
    Mat m(1, static_cast<Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) m(0, static_cast<Index>(i)) = values[i];
    return Tensor(std::move(m), requires_grad);
  }

  static Tensor from_node(NodePtr node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }
  std::vector<std::size_t> shape() const {
    return {static_cast<std::size_t>(rows()), static_cast<std::size_t>(cols())};
  }
  std::string shape_string() const {
    return "[" + std::to_string(rows()) + "x" + std::to_string(cols()) + "]";
  }

  const Mat& value() const { return node_->value; }

  /// In-place access for optimizers; only valid on leaves.
  Mat& mutable_value() {
    if (node_->recorded) throw ContractError("mutable_value on a non-leaf tensor");
    return node_->value;
  }

  Scalar item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string());
    return node_->value(0, 0);
  }

  Scalar operator()(Index r, Index c) const { return node_->value(r, c); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) {
    if (node_->recorded) throw ContractError("set_requires_grad on a non-leaf tensor");
    node_->requires_grad = on;
  }

  bool has_grad() const { return node_->grad.size() != 0; }

  /// Accumulated gradient; zeros when nothing has been accumulated.
  Mat grad() const {
    if (!has_grad()) return Mat::Zero(rows(), cols());
    return node_->grad;
  }

  void zero_grad() { node_->grad.resize(0, 0); }

  /// Constant copy of the current value, detached from any graph.
  Tensor detach() const { return Tensor(node_->value); }

  /// Deep copy as a fresh leaf with the same requires_grad flag.
  Tensor clone() const { return Tensor(node_->value, node_->requires_grad); }

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// Seeds d(root)/d(root) = 1 and accumulates gradients into every leaf that
/// requires them. The tape is cleared afterwards.
template <typename Scalar>
void backward(const Tensor<Scalar>& root) {
  if (root.rows() != 1 || root.cols() != 1) {
    throw ContractError("backward requires a scalar, got shape " + root.shape_string());
  }
  auto& tape = Tape<Scalar>::current();
  if (!root.requires_grad()) {
    tape.clear();
    return;
  }
  root.node()->accumulate(Matrix<Scalar>::Ones(1, 1));
  tape.run_backward();
}

/// Builds an op result. When recording is enabled and any input requires a
/// gradient, the node keeps its inputs and joins the tape.
template <typename Scalar, typename Propagate>
Tensor<Scalar> make_result(Matrix<Scalar> value, std::vector<Tensor<Scalar>> inputs,
                           Propagate&& propagate) {
  auto node = std::make_shared<detail::Node<Scalar>>();
  node->value = std::move(value);
  auto& tape = Tape<Scalar>::current();
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (any && tape.grad_enabled()) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.node());
    node->propagate = std::forward<Propagate>(propagate);
    tape.record(node);
  }
  return Tensor<Scalar>::from_node(std::move(node));
}

}  // namespace mmgnn::ad
