#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "waferseg/tensor.hpp"

namespace waferseg {

// Minimal reverse-mode tape. Each op produces a Node holding its value, the
// handles of its inputs and a closure that scatters the node's gradient into
// the inputs' gradient buffers. Values are immutable once produced; gradient
// accumulation during one backward pass is single-owner.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily; same shape as value
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backprop;  // reads this->grad, writes parents' grads

  // Set by softmax_pixelwise so the loss can attach its fused gradient
  // directly to the logits.
  bool is_softmax_output = false;

  Tensor& ensure_grad() {
    if (grad.size() != value.size()) grad = Tensor(value.shape());
    return grad;
  }
  void zero_grad() {
    if (grad.size() == value.size()) grad.fill(0.0);
  }
};

Var make_var(Tensor value, bool requires_grad = false);
inline Var constant(Tensor value) { return make_var(std::move(value), false); }

// Records whether ops should build backward closures. Inference paths disable
// recording to skip gradient bookkeeping.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Reverse-mode sweep from a scalar root (seeds its gradient with 1) in
// deterministic topological order.
void backward(const Var& root);

}  // namespace waferseg
