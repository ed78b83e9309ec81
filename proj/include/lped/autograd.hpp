#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "lped/tensor.hpp"

namespace lped {

// One vertex of the reverse-mode graph. Leaves created with requires_grad are
// parameters; interior nodes carry a backward closure that pushes `grad`
// into the grads of `inputs`.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node& self)> backward;

  // Zero-initialised gradient buffer with the value's shape.
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  // Accumulated gradient; empty tensor if none has reached this node.
  const Tensor& grad() const { return node_->grad; }
  void zero_grad();

  // Scalar value; the tensor must hold exactly one element.
  double item() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Graph recording is on by default. While a guard is alive on this thread,
// ops produce constant results.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Builds an op result. Recording happens only when grad mode is on and at
// least one input requires grad; otherwise `backward` is dropped.
Var make_result(Tensor value, std::vector<Var> inputs,
                std::function<void(Node& self)> backward);

// Constant copy of `v` cut off from the graph.
Var detach(const Var& v);

// Seeds d(root)/d(root) = 1 and propagates through the recorded graph.
// `root` must hold a single element.
void backward(const Var& root);

}  // namespace lped
