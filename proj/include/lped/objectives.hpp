#pragma once

#include <functional>

#include "lped/autograd.hpp"

namespace lped::objectives {

// Any differentiable image-to-image or image-to-score map: a generator, a
// discriminator, a feature extractor, or a test double.
using Mapping = std::function<Var(const Var&)>;

struct NeganWeights {
  double lambda_low = 10.0;
  double lambda_cycle = 10.0;
  // Throws a Config error on negative weights.
  void validate() const;
};

struct IeganWeights {
  double lambda_percep = 10.0;
  double lambda_g = 0.1;
  void validate() const;
};

// ---- noise learner

// E|G(x)_L - x_L| + E|F(G(x))_L - x_L| over Haar LL bands.
Var l_low(const Mapping& g, const Mapping& f, const Var& x);
// Same objective from already computed translations.
Var l_low_from(const Var& g_x, const Var& f_g_x, const Var& x);

// Discriminator side: E[D(fake)^2] + E[(D(real) - 1)^2].
// Inputs must be Haar detail stacks (channel count a multiple of 3).
Var l_high_disc(const Mapping& d, const Var& fake_high, const Var& real_high);
// Generator side: E[(D(fake) - 1)^2].
Var l_high_gen(const Mapping& d, const Var& fake_high);

// Least-squares adversarial terms without the subband check, used when the
// frequency split is disabled and the critics see whole images.
Var lsq_disc(const Mapping& d, const Var& fake, const Var& real);
Var lsq_gen(const Mapping& d, const Var& fake);

// E|F(G(x)) - x| + E|G(F(n)) - n|.
Var l_cycle(const Mapping& g, const Mapping& f, const Var& x, const Var& n);
Var l_cycle_from(const Var& f_g_x, const Var& x, const Var& g_f_n, const Var& n);

struct NeganParts {
  Var low;
  Var cycle;
  Var high_g;  // adversarial term of G against D_N
  Var high_f;  // adversarial term of F against D_X
};

// lambda_low * low + lambda_cycle * cycle + high_g + high_f. An undefined
// `low` counts as zero (frequency split disabled).
Var l_negan_total(const NeganWeights& weights, const NeganParts& parts);

// ---- image editor

// Mean absolute error.
Var l1(const Var& t1, const Var& t2);

// Mean absolute difference of extractor features. Both inputs must have
// three channels; replicating gray inputs is the caller's job.
Var l_perceptual(const Mapping& extractor, const Var& t1, const Var& t2);

// 1/2 E[(D(fake) - 1)^2].
Var lsgan_g(const Mapping& d, const Var& fake);
// 1/2 E[(D(real) - 1)^2] + 1/2 E[D(fake)^2].
Var lsgan_d(const Mapping& d, const Var& real, const Var& fake);

// l1c + l1r + lambda_percep * lperc + lambda_g * lgr. Undefined terms count
// as zero (ablated losses).
Var l_iegan_total(const IeganWeights& weights, const Var& l1c, const Var& l1r,
                  const Var& lperc, const Var& lgr);

}  // namespace lped::objectives
