#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "radgan/tensor.hpp"

namespace radgan {

// One vertex of the reverse-mode tape. A node owns its forward value, a
// lazily allocated gradient, and the closure that pushes its gradient into
// its inputs.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad();
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  static Var parameter(Tensor value) { return Var(std::move(value), true); }

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& value_mut() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& grad_mut() { return node_->ensure_grad(); }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  const Shape& shape() const { return node_->value.shape(); }
  int64_t dim(int axis) const { return node_->value.dim(axis); }
  int64_t numel() const { return node_->value.numel(); }
  double item() const { return node_->value.item(); }

  void zero_grad();
  Var detach() const { return Var(node_->value, false); }

  const std::shared_ptr<Node>& node() const noexcept { return node_; }
  static Var from_node(std::shared_ptr<Node> node);

 private:
  std::shared_ptr<Node> node_;
};

bool grad_enabled() noexcept;

// Disables tape recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Wraps an op result. The backward closure is attached only when recording is
// on and at least one input requires a gradient.
Var make_result(Tensor value, const std::vector<Var>& inputs, std::function<void(Node&)> backward);

// Reverse sweep from a scalar root. Leaf gradients accumulate across calls.
void backward(const Var& root);

}  // namespace radgan
