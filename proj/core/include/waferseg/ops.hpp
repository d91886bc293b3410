#pragma once

#include <array>

#include "waferseg/autodiff.hpp"
#include "waferseg/tensor.hpp"

namespace waferseg {

// Primitive differentiable ops. All ops are pure functions of their inputs
// (batchnorm's running-statistics update in training mode being the one
// documented exception) and deterministic: fixed summation order, no
// data-dependent parallel reductions.

// 2-D convolution, stride 1. weights shape (outC, inC, kH, kW), bias (outC).
// pad is applied symmetrically on all sides; 3x3 kernels use pad 1 ("same"),
// 1x1 kernels pad 0.
Var conv2d(const Var& input, const Var& weights, const Var& bias, int pad);

// Spatial batch normalization over (N,H,W) per channel.
struct BatchNormState {
  Tensor running_mean;  // (1,C,1,1)
  Tensor running_var;   // (1,C,1,1), elementwise >= 0
  double epsilon = 1e-5;
  double momentum = 0.1;  // running = (1-m)*running + m*batch
};
// Training mode normalizes with batch statistics and updates `state`'s
// running moments; inference mode normalizes with the running moments.
Var batchnorm(const Var& input, const Var& gamma, const Var& beta, BatchNormState& state,
              bool training);

Var relu(const Var& input);

// 2x2 max pooling, stride 2, ceiling output size; edge windows that overhang
// are truncated. Gradient routes to the first argmax in row-major scan order.
Var maxpool2(const Var& input);

// Corner-aligned bilinear interpolation to (outH, outW).
Var bilinear_resize(const Var& input, int outH, int outW);

Var add(const Var& a, const Var& b);

// Channel-axis softmax per pixel, stabilized by max subtraction. Tags its
// output so weighted_cross_entropy can fuse its gradient into the logits.
Var softmax_pixelwise(const Var& input);

// Mean over all pixels of w[trueClass] * (-ln p[trueClass]). `probabilities`
// should come from softmax_pixelwise; the combined softmax+loss gradient
// w[t]*(p - y)/pixelCount is then attached directly to the logits. A
// non-softmax input falls back to the plain d/dp path.
// `one_hot` has the same shape as `probabilities` with exactly one 1 per pixel.
Var weighted_cross_entropy(const Var& probabilities, const Tensor& one_hot,
                           const std::array<double, 3>& class_weights);

}  // namespace waferseg
