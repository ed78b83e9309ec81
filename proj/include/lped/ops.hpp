#pragma once

#include <vector>

#include "lped/autograd.hpp"

// Differentiable tensor operations. All inputs are NCHW; elementwise ops
// require identical shapes (no implicit broadcasting).
namespace lped::ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

Var leaky_relu(const Var& x, double slope = 0.2);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var abs(const Var& x);
Var square(const Var& x);

// Reductions to a 1x1x1x1 scalar.
Var sum(const Var& x);
Var mean(const Var& x);

// Weighted sum of scalars, e.g. total objectives.
Var weighted_sum(const std::vector<Var>& terms,
                 const std::vector<double>& weights);

// Mean absolute difference, E|a - b|.
Var l1_loss(const Var& a, const Var& b);
// Mean squared offset from a constant target, E[(x - target)^2].
Var mse_to_constant(const Var& x, double target);

// 2-D cross-correlation with zero padding. weight is (out, in, k, k), bias is
// (1, out, 1, 1) or undefined.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride,
           int padding);

// Per-sample, per-channel normalisation over the spatial plane, no affine.
Var instance_norm(const Var& x, double eps = 1e-5);

Var upsample_nearest2x(const Var& x);
Var max_pool2x(const Var& x);
Var concat_channels(const Var& a, const Var& b);
// Repeats a single-channel tensor `times` along C.
Var replicate_channels(const Var& x, int times);

// Single-level orthonormal Haar subbands. low: (N, C, H/2, W/2). high:
// (N, 3C, H/2, W/2) laid out channel-major as [c0:LH, c0:HL, c0:HH, c1:...].
Var haar_low(const Var& x);
Var haar_high(const Var& x);

// weight / (u^T W v) with W viewed as (out, in*k*k). u and v are held
// constant; the gradient flows through both the numerator and sigma.
Var spectral_normalize(const Var& weight, const std::vector<double>& u,
                       const std::vector<double>& v);

}  // namespace lped::ops
