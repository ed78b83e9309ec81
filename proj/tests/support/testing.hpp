#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lped/autograd.hpp"
#include "lped/tensor.hpp"

namespace lped::testing {

using Rng = std::mt19937_64;

Tensor uniform(const Shape& shape, Rng& rng, double lo = 0.0, double hi = 1.0);
Tensor normal(const Shape& shape, Rng& rng, double sigma = 1.0);

// Smooth colour-ish content: a few random low-frequency waves per channel,
// scaled into [0.1, 0.9].
Tensor smooth_image(int channels, int height, int width, Rng& rng);

struct GradReport {
  double worst = 0.0;       // worst per-element relative error
  std::string where;        // "input k, element i" of the worst entry
  std::size_t checked = 0;
};

// Central finite differences of the scalar `f(inputs)` against reverse-mode
// gradients. Relative error per element is |a - n| / max(|a|, |n|, floor).
GradReport check_gradients(const std::function<Var(const std::vector<Var>&)>& f,
                           const std::vector<Tensor>& inputs, double step = 1e-6,
                           double floor = 1e-3);

// Same, perturbing parameters already held by Vars (e.g. network weights).
GradReport check_param_gradients(const std::function<Var()>& f,
                                 const std::vector<Var>& params, double step = 1e-6,
                                 double floor = 1e-3);

}  // namespace lped::testing
