#pragma once

#include "lped/autograd.hpp"
#include "lped/tensor.hpp"

namespace lped::wavelet {

// Single-level orthonormal Haar decomposition.
//
// For every 2x2 tile (a b; c d) of every channel:
//   LL = (a + b + c + d) / 2      low
//   LH = (a - b + c - d) / 2      detail across columns
//   HL = (a + b - c - d) / 2      detail across rows
//   HH = (a - b - c + d) / 2      diagonal detail
//
// `high` stacks the three detail bands per source channel in LH, HL, HH
// order, so channel 3*c + k holds band k of source channel c. This layout is
// what the patch discriminators consume and must stay stable.
struct FreqSplit {
  Tensor low;   // (N, C, H/2, W/2)
  Tensor high;  // (N, 3C, H/2, W/2)
};

// H and W must be even; odd axes raise a Dimension error naming the axis.
FreqSplit dwt2(const Tensor& image);
Tensor idwt2(const FreqSplit& split);

Tensor low_part(const Tensor& image);
Tensor high_part(const Tensor& image);

// Graph-recording variants used inside the noise-learner objectives.
Var low_part(const Var& image);
Var high_part(const Var& image);

}  // namespace lped::wavelet
