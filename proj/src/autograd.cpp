#include "radgan/autograd.hpp"

#include <stdexcept>
#include <unordered_set>

namespace radgan {

namespace {
thread_local bool g_grad_enabled = true;
}

Tensor& Node::ensure_grad() {
  if (grad.empty() && value.numel() > 0) grad = Tensor(value.shape(), 0.0);
  if (grad.shape() != value.shape()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Var::from_node(std::shared_ptr<Node> node) {
  Var v;
  v.node_ = std::move(node);
  return v;
}

void Var::zero_grad() {
  if (node_ && !node_->grad.empty()) node_->grad.fill(0.0);
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var make_result(Tensor value, const std::vector<Var>& inputs, std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const Var& in : inputs) any = any || in.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (const Var& in : inputs) node->inputs.push_back(in.node());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Var::from_node(std::move(node));
}

void backward(const Var& root) {
  if (!root.defined() || root.numel() != 1) throw std::logic_error("backward() requires a scalar root");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; reversed post-order is a valid reverse sweep.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->backward_fn) n->grad = Tensor();  // interior grads are per-sweep
  }
  root.node()->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

}  // namespace radgan
