#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "srunit/core/tensor.hpp"

namespace srunit {

template <typename Scalar>
struct Node;

template <typename Scalar>
using NodePtr = std::shared_ptr<Node<Scalar>>;

/// One vertex of the reverse-mode tape. `backward_fn` reads `grad` of this node and
/// accumulates into the grads of `parents` (only those that require grad).
template <typename Scalar>
struct Node {
  using Vector = typename Tensor<Scalar>::Vector;

  Tensor<Scalar> value;
  Vector grad;
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<NodePtr<Scalar>> parents;
  std::function<void(Node&)> backward_fn;

  Vector& grad_buffer() {
    if (grad.size() != value.numel()) grad = Vector::Zero(value.numel());
    return grad;
  }
  bool has_grad() const { return grad.size() == value.numel() && value.numel() > 0; }
};

/// Handle to a tape node. Copies share the node.
template <typename Scalar_>
class Var {
 public:
  using Scalar = Scalar_;
  using Vector = typename Tensor<Scalar>::Vector;

  Var() = default;
  explicit Var(Tensor<Scalar> value, bool requires_grad = false)
      : node_(std::make_shared<Node<Scalar>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(NodePtr<Scalar> node) : node_(std::move(node)) {}

  static Var scalar(Scalar v) { return Var(Tensor<Scalar>::scalar(v)); }

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<Scalar>& value() const { return node_->value; }
  /// Direct access to the stored value; used by optimizers on leaf parameters.
  Tensor<Scalar>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  Scalar item() const { return node_->value.item(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool is_leaf() const { return node_->is_leaf; }

  bool has_grad() const { return node_->has_grad(); }
  /// Gradient as a tensor (zeros if nothing was accumulated).
  Tensor<Scalar> grad() const {
    if (!node_->has_grad()) return Tensor<Scalar>(shape());
    return Tensor<Scalar>(shape(), node_->grad);
  }
  const Vector& grad_vec() const { return node_->grad; }
  void zero_grad() { node_->grad.resize(0); }

  /// Leaf copy of the value, cut from the tape.
  Var detach() const { return Var(node_->value, false); }

  const NodePtr<Scalar>& node() const { return node_; }

 private:
  NodePtr<Scalar> node_;
};

/// Builds a tape node. If no parent requires grad the result is a constant and the
/// backward closure is dropped.
template <typename Scalar>
Var<Scalar> make_op(Tensor<Scalar> value, std::vector<Var<Scalar>> parents,
                    std::function<void(Node<Scalar>&)> backward_fn) {
  auto node = std::make_shared<Node<Scalar>>();
  node->value = std::move(value);
  node->is_leaf = false;
  for (const auto& p : parents) node->requires_grad = node->requires_grad || p.requires_grad();
  if (node->requires_grad) {
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Var<Scalar>(std::move(node));
}

/// Accumulates d(root)/d(leaf) into every reachable leaf that requires grad.
/// `seed` defaults to ones (root is usually a scalar). Interior gradients are reset
/// on every call, so a tape can be differentiated more than once.
template <typename Scalar>
void backward(const Var<Scalar>& root, const Tensor<Scalar>* seed = nullptr) {
  using NodeT = Node<Scalar>;
  if (!root.requires_grad()) return;

  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> seen;
  // Iterative post-order DFS.
  std::vector<std::pair<NodeT*, size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodeT* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (NodeT* n : order)
    if (!n->is_leaf) n->grad.resize(0);

  NodeT* r = root.node().get();
  if (seed) {
    require_same_shape(seed->shape(), r->value.shape(), "backward seed");
    r->grad_buffer() += seed->vec();
  } else {
    r->grad_buffer().array() += Scalar(1);
  }

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT* n = *it;
    if (n->is_leaf || !n->has_grad() || !n->backward_fn) continue;
    n->backward_fn(*n);
  }
}

template <typename Scalar>
using VarList = std::vector<Var<Scalar>>;

}  // namespace srunit
