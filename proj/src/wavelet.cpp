#include "lped/wavelet.hpp"

#include "lped/error.hpp"
#include "lped/ops.hpp"

namespace lped::wavelet {

FreqSplit dwt2(const Tensor& image) {
  NoGradGuard guard;
  Var x(image);
  return FreqSplit{ops::haar_low(x).value(), ops::haar_high(x).value()};
}

Tensor idwt2(const FreqSplit& split) {
  const Shape ls = split.low.shape();
  const Shape hs = split.high.shape();
  if (hs.n != ls.n || hs.c != 3 * ls.c || hs.h != ls.h || hs.w != ls.w) {
    fail(ErrorKind::Shape, "idwt2: low band " + ls.str() +
                               " inconsistent with high stack " + hs.str());
  }
  Tensor out(Shape{ls.n, ls.c, ls.h * 2, ls.w * 2});
  const int w2 = ls.w * 2;
  for (int n = 0; n < ls.n; ++n) {
    for (int c = 0; c < ls.c; ++c) {
      const double* ll = split.low.plane(n, c);
      const double* lh = split.high.plane(n, 3 * c);
      const double* hl = split.high.plane(n, 3 * c + 1);
      const double* hh = split.high.plane(n, 3 * c + 2);
      double* dst = out.plane(n, c);
      for (int y = 0; y < ls.h; ++y) {
        double* r0 = dst + (2 * y) * w2;
        double* r1 = r0 + w2;
        for (int x = 0; x < ls.w; ++x) {
          const int o = y * ls.w + x;
          r0[2 * x] = 0.5 * (ll[o] + lh[o] + hl[o] + hh[o]);
          r0[2 * x + 1] = 0.5 * (ll[o] - lh[o] + hl[o] - hh[o]);
          r1[2 * x] = 0.5 * (ll[o] + lh[o] - hl[o] - hh[o]);
          r1[2 * x + 1] = 0.5 * (ll[o] - lh[o] - hl[o] + hh[o]);
        }
      }
    }
  }
  return out;
}

Tensor low_part(const Tensor& image) {
  NoGradGuard guard;
  return ops::haar_low(Var(image)).value();
}

Tensor high_part(const Tensor& image) {
  NoGradGuard guard;
  return ops::haar_high(Var(image)).value();
}

Var low_part(const Var& image) { return ops::haar_low(image); }
Var high_part(const Var& image) { return ops::haar_high(image); }

}  // namespace lped::wavelet
