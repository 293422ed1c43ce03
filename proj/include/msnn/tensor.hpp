#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "msnn/common.hpp"

namespace msnn {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace detail {

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

// One node of the recorded computation. `backward` reads this node's grad and
// accumulates into the parents' grads; parents keep the forward values alive.
struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily, same length as data
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(TensorNode&)> backward;

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

// Forward recording can be suspended for pure evaluation (eval-mode model
// forwards, data plumbing). Thread-local so independent graphs on separate
// threads never interact.
class GradMode {
 public:
  static bool enabled() { return flag(); }
  static void set_enabled(bool on) { flag() = on; }

 private:
  static bool& flag() {
    thread_local bool f = true;
    return f;
  }
};

class NoGradGuard {
 public:
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Dense row-major 64-bit float tensor with optional gradient tracking.
// Copying a Tensor copies the handle, not the storage.
class Tensor {
 public:
  Tensor() : node_(std::make_shared<detail::TensorNode>()) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return filled(std::move(shape), 0.0, requires_grad);
  }

  static Tensor filled(Shape shape, double value, bool requires_grad = false) {
    Tensor t;
    validate_shape(shape);
    t.node_->shape = std::move(shape);
    t.node_->data.assign(static_cast<std::size_t>(numel(t.node_->shape)), value);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false) {
    validate_shape(shape);
    if (numel(shape) != static_cast<std::int64_t>(data.size())) {
      throw InvalidArgument("tensor data length " + std::to_string(data.size()) +
                            " does not match shape " + shape_string(shape));
    }
    Tensor t;
    t.node_->shape = std::move(shape);
    t.node_->data = std::move(data);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return from_data({1}, {value}, requires_grad);
  }

  const Shape& shape() const { return node_->shape; }
  std::int64_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::int64_t size() const { return node_->size(); }
  std::size_t rank() const { return node_->shape.size(); }

  double* data() { return node_->data.data(); }
  const double* data() const { return node_->data.data(); }
  std::vector<double>& values() { return node_->data; }
  const std::vector<double>& values() const { return node_->data; }

  double item() const {
    if (size() != 1) throw InvalidArgument("item() requires a single-element tensor, got " + shape_string(shape()));
    return node_->data[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool tracked() const { return node_->requires_grad || !node_->parents.empty(); }

  bool has_grad() const { return node_->grad.size() == node_->data.size() && !node_->data.empty(); }
  const std::vector<double>& grad() const {
    if (!has_grad()) throw InvalidArgument("tensor has no gradient (run backward first)");
    return node_->grad;
  }
  void zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

  /// Detached copy of the values (no graph history, not tracked).
  Tensor detached() const { return from_data(shape(), values(), false); }

  bool all_finite() const {
    for (double v : node_->data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  detail::NodePtr node() const { return node_; }

 private:
  static void validate_shape(const Shape& shape) {
    for (auto d : shape)
      if (d <= 0) throw InvalidArgument("tensor extents must be positive, got " + shape_string(shape));
  }

  detail::NodePtr node_;
};

namespace detail {

/// Attach recording metadata to `out` if grad mode is on and any input is
/// part of a tracked graph.
inline void record(Tensor& out, std::vector<Tensor> inputs, std::function<void(TensorNode&)> backward) {
  if (!GradMode::enabled()) return;
  bool any = false;
  for (const auto& in : inputs) any = any || in.tracked();
  if (!any) return;
  auto node = out.node();
  node->parents.reserve(inputs.size());
  for (auto& in : inputs) node->parents.push_back(in.node());
  node->backward = std::move(backward);
}

inline bool wants_grad(const TensorNode& n) { return n.requires_grad || !n.parents.empty(); }

}  // namespace detail

/// Reverse-mode sweep from a scalar loss. Populates grads of every tracked
/// tensor reachable from `loss`. Gradients accumulate; call zero_grad (or
/// rebuild the graph) between sweeps for fresh values. Deterministic: the
/// traversal order depends only on graph structure.
inline void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw InvalidArgument("backward requires a scalar loss, got shape " + shape_string(loss.shape()));
  }
  using detail::TensorNode;
  auto root = loss.node();

  // Iterative postorder DFS; reverse postorder is a topological order.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* p = node->parents[next++].get();
      if (!seen.count(p) && (p->backward || p->requires_grad)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior results get a fresh gradient each sweep; only leaves accumulate
  // across invocations.
  for (TensorNode* node : order) {
    if (node->backward) node->grad.assign(node->data.size(), 0.0);
  }
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* node = *it;
    if (!node->backward) continue;
    node->ensure_grad();
    for (auto& p : node->parents)
      if (detail::wants_grad(*p)) p->ensure_grad();
    node->backward(*node);
  }
}

}  // namespace msnn
