#include "lped/objectives.hpp"

#include <string>

#include "lped/error.hpp"
#include "lped/ops.hpp"
#include "lped/wavelet.hpp"

namespace lped::objectives {
namespace {

void require_subbands(const Var& x, const char* what) {
  if (x.shape().c % 3 != 0) {
    fail(ErrorKind::Shape,
         std::string(what) + ": expected a Haar detail stack (channels a "
                             "multiple of 3), got " + x.shape().str());
  }
}

Var weighted(std::vector<Var> terms, std::vector<double> weights) {
  std::vector<Var> kept;
  std::vector<double> kept_w;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (!terms[i].defined()) continue;
    kept.push_back(terms[i]);
    kept_w.push_back(weights[i]);
  }
  if (kept.empty()) return Var(Tensor::scalar(0.0));
  return ops::weighted_sum(kept, kept_w);
}

}  // namespace

void NeganWeights::validate() const {
  if (lambda_low < 0.0 || lambda_cycle < 0.0) {
    fail(ErrorKind::Config, "noise learner loss weights must be non-negative");
  }
}

void IeganWeights::validate() const {
  if (lambda_percep < 0.0 || lambda_g < 0.0) {
    fail(ErrorKind::Config, "editor loss weights must be non-negative");
  }
}

Var l_low_from(const Var& g_x, const Var& f_g_x, const Var& x) {
  const Var x_low = wavelet::low_part(x);
  return ops::add(ops::l1_loss(wavelet::low_part(g_x), x_low),
                  ops::l1_loss(wavelet::low_part(f_g_x), x_low));
}

Var l_low(const Mapping& g, const Mapping& f, const Var& x) {
  const Var g_x = g(x);
  return l_low_from(g_x, f(g_x), x);
}

Var lsq_disc(const Mapping& d, const Var& fake, const Var& real) {
  return ops::add(ops::mse_to_constant(d(fake), 0.0),
                  ops::mse_to_constant(d(real), 1.0));
}

Var lsq_gen(const Mapping& d, const Var& fake) {
  return ops::mse_to_constant(d(fake), 1.0);
}

Var l_high_disc(const Mapping& d, const Var& fake_high, const Var& real_high) {
  require_subbands(fake_high, "l_high_disc fake");
  require_subbands(real_high, "l_high_disc real");
  return lsq_disc(d, fake_high, real_high);
}

Var l_high_gen(const Mapping& d, const Var& fake_high) {
  require_subbands(fake_high, "l_high_gen fake");
  return lsq_gen(d, fake_high);
}

Var l_cycle_from(const Var& f_g_x, const Var& x, const Var& g_f_n,
                 const Var& n) {
  return ops::add(ops::l1_loss(f_g_x, x), ops::l1_loss(g_f_n, n));
}

Var l_cycle(const Mapping& g, const Mapping& f, const Var& x, const Var& n) {
  return l_cycle_from(f(g(x)), x, g(f(n)), n);
}

Var l_negan_total(const NeganWeights& weights, const NeganParts& parts) {
  weights.validate();
  return weighted({parts.low, parts.cycle, parts.high_g, parts.high_f},
                  {weights.lambda_low, weights.lambda_cycle, 1.0, 1.0});
}

Var l1(const Var& t1, const Var& t2) { return ops::l1_loss(t1, t2); }

Var l_perceptual(const Mapping& extractor, const Var& t1, const Var& t2) {
  for (const Var* t : {&t1, &t2}) {
    if (t->shape().c != 3) {
      fail(ErrorKind::Shape, "perceptual loss needs 3-channel inputs, got " +
                                 t->shape().str());
    }
  }
  return ops::l1_loss(extractor(t1), extractor(t2));
}

Var lsgan_g(const Mapping& d, const Var& fake) {
  return ops::scale(ops::mse_to_constant(d(fake), 1.0), 0.5);
}

Var lsgan_d(const Mapping& d, const Var& real, const Var& fake) {
  return ops::scale(ops::add(ops::mse_to_constant(d(real), 1.0),
                             ops::mse_to_constant(d(fake), 0.0)),
                    0.5);
}

Var l_iegan_total(const IeganWeights& weights, const Var& l1c, const Var& l1r,
                  const Var& lperc, const Var& lgr) {
  weights.validate();
  return weighted({l1c, l1r, lperc, lgr},
                  {1.0, 1.0, weights.lambda_percep, weights.lambda_g});
}

}  // namespace lped::objectives
