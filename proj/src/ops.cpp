#include "lped/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include <Eigen/Core>

#include "lped/error.hpp"

namespace lped::ops {
namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

Node& input(Node& self, std::size_t i) { return *self.inputs[i]; }

// Elementwise unary op helper: d(out)/d(in) from (in, out) pair.
template <typename Fwd, typename Deriv>
Var unary(const Var& x, Fwd fwd, Deriv deriv) {
  Tensor out(x.shape());
  const Tensor& in = x.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return make_result(std::move(out), {x}, [deriv](Node& self) {
    Node& a = input(self, 0);
    if (!a.requires_grad) return;
    Tensor& ga = a.grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) {
      ga[i] += self.grad[i] * deriv(a.value[i], self.value[i]);
    }
  });
}

void require_plane_even(const Shape& s, const char* what) {
  if (s.h % 2 != 0) {
    fail(ErrorKind::Dimension,
         std::string(what) + ": height " + std::to_string(s.h) +
             " is odd (axis H must be even)");
  }
  if (s.w % 2 != 0) {
    fail(ErrorKind::Dimension,
         std::string(what) + ": width " + std::to_string(s.w) +
             " is odd (axis W must be even)");
  }
}

void im2col(const double* x, int channels, int height, int width, int k,
            int stride, int pad, int out_h, int out_w, double* col) {
  for (int c = 0; c < channels; ++c) {
    const double* plane = x + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = col + (static_cast<std::size_t>((c * k + ky) * k + kx)) *
                                out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          double* row = dst + static_cast<std::size_t>(oy) * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(row, row + out_w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            row[ox] = (ix >= 0 && ix < width) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* col, int channels, int height, int width, int k,
            int stride, int pad, int out_h, int out_w, double* x) {
  for (int c = 0; c < channels; ++c) {
    double* plane = x + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* src =
            col + (static_cast<std::size_t>((c * k + ky) * k + kx)) * out_h *
                      out_w;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          const double* row = src + static_cast<std::size_t>(oy) * out_w;
          double* dst = plane + static_cast<std::size_t>(iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < width) dst[ix] += row[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      Node& in = input(self, k);
      if (!in.requires_grad) continue;
      Tensor& g = in.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      Node& in = input(self, k);
      if (!in.requires_grad) continue;
      const double sign = k == 0 ? 1.0 : -1.0;
      Tensor& g = in.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& x = input(self, 0);
    Node& y = input(self, 1);
    if (x.requires_grad) {
      Tensor& g = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y.value[i];
    }
    if (y.requires_grad) {
      Tensor& g = y.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x.value[i];
    }
  });
}

Var scale(const Var& a, double s) {
  return unary(a, [s](double v) { return v * s; },
               [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, [s](double v) { return v + s; },
               [](double, double) { return 1.0; });
}

Var leaky_relu(const Var& x, double slope) {
  return unary(x, [slope](double v) { return v > 0.0 ? v : slope * v; },
               [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Var relu(const Var& x) { return leaky_relu(x, 0.0); }

Var sigmoid(const Var& x) {
  return unary(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
               [](double, double y) { return y * (1.0 - y); });
}

Var abs(const Var& x) {
  return unary(x, [](double v) { return std::abs(v); },
               [](double v, double) {
                 return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
               });
}

Var square(const Var& x) {
  return unary(x, [](double v) { return v * v; },
               [](double v, double) { return 2.0 * v; });
}

Var sum(const Var& x) {
  return make_result(Tensor::scalar(x.value().sum()), {x}, [](Node& self) {
    Node& a = input(self, 0);
    if (!a.requires_grad) return;
    Tensor& g = a.grad_buffer();
    const double gs = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gs;
  });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(x.value().size());
  return scale(sum(x), 1.0 / n);
}

Var weighted_sum(const std::vector<Var>& terms,
                 const std::vector<double>& weights) {
  if (terms.size() != weights.size()) {
    fail(ErrorKind::Shape, "weighted_sum: terms and weights differ in length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    total += weights[i] * terms[i].item();
  }
  return make_result(Tensor::scalar(total), terms, [weights](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& in = input(self, i);
      if (in.requires_grad) in.grad_buffer()[0] += weights[i] * self.grad[0];
    }
  });
}

Var l1_loss(const Var& a, const Var& b) {
  require_same_shape(a.shape(), b.shape(), "l1_loss");
  const std::size_t n = a.value().size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += std::abs(a.value()[i] - b.value()[i]);
  return make_result(
      Tensor::scalar(total / static_cast<double>(n)), {a, b}, [n](Node& self) {
        Node& x = input(self, 0);
        Node& y = input(self, 1);
        const double gs = self.grad[0] / static_cast<double>(n);
        for (int k = 0; k < 2; ++k) {
          Node& in = k == 0 ? x : y;
          if (!in.requires_grad) continue;
          const double sign = k == 0 ? gs : -gs;
          Tensor& g = in.grad_buffer();
          for (std::size_t i = 0; i < n; ++i) {
            const double d = x.value[i] - y.value[i];
            g[i] += d > 0.0 ? sign : (d < 0.0 ? -sign : 0.0);
          }
        }
      });
}

Var mse_to_constant(const Var& x, double target) {
  const std::size_t n = x.value().size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x.value()[i] - target;
    total += d * d;
  }
  return make_result(Tensor::scalar(total / static_cast<double>(n)), {x},
                     [n, target](Node& self) {
                       Node& a = input(self, 0);
                       if (!a.requires_grad) return;
                       const double gs = 2.0 * self.grad[0] / static_cast<double>(n);
                       Tensor& g = a.grad_buffer();
                       for (std::size_t i = 0; i < n; ++i) {
                         g[i] += gs * (a.value[i] - target);
                       }
                     });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride,
           int padding) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.h != ws.w) fail(ErrorKind::Shape, "conv2d: kernel must be square");
  if (xs.c != ws.c) {
    fail(ErrorKind::Shape, "conv2d: input has " + std::to_string(xs.c) +
                               " channels, kernel expects " +
                               std::to_string(ws.c));
  }
  if (bias.defined() && !(bias.shape() == Shape{1, ws.n, 1, 1})) {
    fail(ErrorKind::Shape, "conv2d: bias shape " + bias.shape().str());
  }
  const int k = ws.h;
  const int out_h = (xs.h + 2 * padding - k) / stride + 1;
  const int out_w = (xs.w + 2 * padding - k) / stride + 1;
  if (out_h <= 0 || out_w <= 0) {
    fail(ErrorKind::Dimension, "conv2d: input " + xs.str() + " too small");
  }
  const int rows = ws.c * k * k;
  const int cols = out_h * out_w;
  const bool direct = k == 1 && stride == 1 && padding == 0;

  Tensor out(Shape{xs.n, ws.n, out_h, out_w});
  ConstMatMap wmat(weight.value().data(), ws.n, rows);
  std::vector<double> col(direct ? 0 : static_cast<std::size_t>(rows) * cols);
  for (int n = 0; n < xs.n; ++n) {
    const double* src = x.value().plane(n, 0);
    if (!direct) {
      im2col(src, xs.c, xs.h, xs.w, k, stride, padding, out_h, out_w, col.data());
    }
    ConstMatMap cmat(direct ? src : col.data(), rows, cols);
    MatMap omat(out.plane(n, 0), ws.n, cols);
    omat.noalias() = wmat * cmat;
    if (bias.defined()) {
      for (int o = 0; o < ws.n; ++o) omat.row(o).array() += bias.value()[o];
    }
  }

  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(
      std::move(out), std::move(inputs),
      [xs, ws, k, stride, padding, out_h, out_w, rows, cols, direct](Node& self) {
        Node& xn = input(self, 0);
        Node& wn = input(self, 1);
        Node* bn = self.inputs.size() > 2 ? self.inputs[2].get() : nullptr;
        ConstMatMap wmat(wn.value.data(), ws.n, rows);
        std::vector<double> col(static_cast<std::size_t>(rows) * cols);
        for (int n = 0; n < xs.n; ++n) {
          ConstMatMap gmat(self.grad.plane(n, 0), ws.n, cols);
          if (wn.requires_grad) {
            const double* src = xn.value.plane(n, 0);
            if (!direct) {
              im2col(src, xs.c, xs.h, xs.w, k, stride, padding, out_h, out_w,
                     col.data());
            }
            ConstMatMap cmat(direct ? src : col.data(), rows, cols);
            MatMap gw(wn.grad_buffer().data(), ws.n, rows);
            gw.noalias() += gmat * cmat.transpose();
          }
          if (bn != nullptr && bn->requires_grad) {
            Tensor& gb = bn->grad_buffer();
            for (int o = 0; o < ws.n; ++o) {
              const double* g = self.grad.plane(n, 0) + static_cast<std::size_t>(o) * cols;
              gb[o] += std::accumulate(g, g + cols, 0.0);
            }
          }
          if (xn.requires_grad) {
            double* gx = xn.grad_buffer().plane(n, 0);
            if (direct) {
              MatMap gxm(gx, rows, cols);
              gxm.noalias() += wmat.transpose() * gmat;
            } else {
              MatMap gcol(col.data(), rows, cols);
              gcol.noalias() = wmat.transpose() * gmat;
              col2im(col.data(), xs.c, xs.h, xs.w, k, stride, padding, out_h,
                     out_w, gx);
            }
          }
        }
      });
}

Var instance_norm(const Var& x, double eps) {
  const Shape s = x.shape();
  const std::size_t plane = s.plane();
  Tensor out(s);
  std::vector<double> inv_std(static_cast<std::size_t>(s.n) * s.c);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* src = x.value().plane(n, c);
      double mu = 0.0;
      for (std::size_t i = 0; i < plane; ++i) mu += src[i];
      mu /= static_cast<double>(plane);
      double var = 0.0;
      for (std::size_t i = 0; i < plane; ++i) var += (src[i] - mu) * (src[i] - mu);
      var /= static_cast<double>(plane);
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std[static_cast<std::size_t>(n) * s.c + c] = is;
      double* dst = out.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) dst[i] = (src[i] - mu) * is;
    }
  }
  return make_result(std::move(out), {x}, [s, plane, inv_std](Node& self) {
    Node& a = input(self, 0);
    if (!a.requires_grad) return;
    Tensor& ga = a.grad_buffer();
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const double* g = self.grad.plane(n, c);
        const double* y = self.value.plane(n, c);
        double mean_g = 0.0;
        double mean_gy = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
          mean_g += g[i];
          mean_gy += g[i] * y[i];
        }
        mean_g /= static_cast<double>(plane);
        mean_gy /= static_cast<double>(plane);
        const double is = inv_std[static_cast<std::size_t>(n) * s.c + c];
        double* dst = ga.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) {
          dst[i] += is * (g[i] - mean_g - y[i] * mean_gy);
        }
      }
    }
  });
}

Var upsample_nearest2x(const Var& x) {
  const Shape s = x.shape();
  const Shape os{s.n, s.c, s.h * 2, s.w * 2};
  Tensor out(os);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* src = x.value().plane(n, c);
      double* dst = out.plane(n, c);
      for (int y = 0; y < os.h; ++y) {
        for (int xx = 0; xx < os.w; ++xx) {
          dst[y * os.w + xx] = src[(y / 2) * s.w + xx / 2];
        }
      }
    }
  }
  return make_result(std::move(out), {x}, [s, os](Node& self) {
    Node& a = input(self, 0);
    if (!a.requires_grad) return;
    Tensor& ga = a.grad_buffer();
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const double* g = self.grad.plane(n, c);
        double* dst = ga.plane(n, c);
        for (int y = 0; y < os.h; ++y) {
          for (int xx = 0; xx < os.w; ++xx) {
            dst[(y / 2) * s.w + xx / 2] += g[y * os.w + xx];
          }
        }
      }
    }
  });
}

Var max_pool2x(const Var& x) {
  const Shape s = x.shape();
  require_plane_even(s, "max_pool2x");
  const Shape os{s.n, s.c, s.h / 2, s.w / 2};
  Tensor out(os);
  std::vector<std::uint32_t> argmax(os.numel());
  std::size_t o = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* src = x.value().plane(n, c);
      double* dst = out.plane(n, c);
      for (int y = 0; y < os.h; ++y) {
        for (int xx = 0; xx < os.w; ++xx, ++o) {
          std::uint32_t best = static_cast<std::uint32_t>((2 * y) * s.w + 2 * xx);
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const auto idx =
                  static_cast<std::uint32_t>((2 * y + dy) * s.w + 2 * xx + dx);
              if (src[idx] > src[best]) best = idx;
            }
          }
          argmax[o] = best;
          dst[y * os.w + xx] = src[best];
        }
      }
    }
  }
  return make_result(std::move(out), {x}, [s, os, argmax](Node& self) {
    Node& a = input(self, 0);
    if (!a.requires_grad) return;
    Tensor& ga = a.grad_buffer();
    const std::size_t oplane = os.plane();
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * oplane;
        const double* g = self.grad.plane(n, c);
        double* dst = ga.plane(n, c);
        for (std::size_t i = 0; i < oplane; ++i) dst[argmax[base + i]] += g[i];
      }
    }
  });
}

Var concat_channels(const Var& a, const Var& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    fail(ErrorKind::Shape,
         "concat_channels: " + sa.str() + " vs " + sb.str());
  }
  const Shape os{sa.n, sa.c + sb.c, sa.h, sa.w};
  Tensor out(os);
  const std::size_t pa = sa.c * sa.plane();
  const std::size_t pb = sb.c * sb.plane();
  for (int n = 0; n < sa.n; ++n) {
    std::copy_n(a.value().plane(n, 0), pa, out.plane(n, 0));
    std::copy_n(b.value().plane(n, 0), pb, out.plane(n, sa.c));
  }
  return make_result(std::move(out), {a, b}, [sa, pa, pb](Node& self) {
    Node& x = input(self, 0);
    Node& y = input(self, 1);
    for (int n = 0; n < sa.n; ++n) {
      if (x.requires_grad) {
        double* dst = x.grad_buffer().plane(n, 0);
        const double* g = self.grad.plane(n, 0);
        for (std::size_t i = 0; i < pa; ++i) dst[i] += g[i];
      }
      if (y.requires_grad) {
        double* dst = y.grad_buffer().plane(n, 0);
        const double* g = self.grad.plane(n, sa.c);
        for (std::size_t i = 0; i < pb; ++i) dst[i] += g[i];
      }
    }
  });
}

Var replicate_channels(const Var& x, int times) {
  const Shape s = x.shape();
  if (s.c != 1) {
    fail(ErrorKind::Shape, "replicate_channels: expected 1 channel, got " +
                               std::to_string(s.c));
  }
  const Shape os{s.n, times, s.h, s.w};
  Tensor out(os);
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < times; ++c) {
      std::copy_n(x.value().plane(n, 0), plane, out.plane(n, c));
    }
  }
  return make_result(std::move(out), {x}, [s, times, plane](Node& self) {
    Node& a = input(self, 0);
    if (!a.requires_grad) return;
    Tensor& ga = a.grad_buffer();
    for (int n = 0; n < s.n; ++n) {
      double* dst = ga.plane(n, 0);
      for (int c = 0; c < times; ++c) {
        const double* g = self.grad.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) dst[i] += g[i];
      }
    }
  });
}

// Haar tile (a b; c d) -> LL = (a+b+c+d)/2, LH = (a-b+c-d)/2,
// HL = (a+b-c-d)/2, HH = (a-b-c+d)/2.
Var haar_low(const Var& x) {
  const Shape s = x.shape();
  require_plane_even(s, "dwt2");
  const Shape os{s.n, s.c, s.h / 2, s.w / 2};
  Tensor out(os);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* src = x.value().plane(n, c);
      double* dst = out.plane(n, c);
      for (int y = 0; y < os.h; ++y) {
        const double* r0 = src + (2 * y) * s.w;
        const double* r1 = r0 + s.w;
        for (int xx = 0; xx < os.w; ++xx) {
          dst[y * os.w + xx] =
              0.5 * (r0[2 * xx] + r0[2 * xx + 1] + r1[2 * xx] + r1[2 * xx + 1]);
        }
      }
    }
  }
  return make_result(std::move(out), {x}, [s, os](Node& self) {
    Node& a = input(self, 0);
    if (!a.requires_grad) return;
    Tensor& ga = a.grad_buffer();
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const double* g = self.grad.plane(n, c);
        double* dst = ga.plane(n, c);
        for (int y = 0; y < os.h; ++y) {
          double* r0 = dst + (2 * y) * s.w;
          double* r1 = r0 + s.w;
          for (int xx = 0; xx < os.w; ++xx) {
            const double v = 0.5 * g[y * os.w + xx];
            r0[2 * xx] += v;
            r0[2 * xx + 1] += v;
            r1[2 * xx] += v;
            r1[2 * xx + 1] += v;
          }
        }
      }
    }
  });
}

Var haar_high(const Var& x) {
  const Shape s = x.shape();
  require_plane_even(s, "dwt2");
  const Shape os{s.n, 3 * s.c, s.h / 2, s.w / 2};
  Tensor out(os);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* src = x.value().plane(n, c);
      double* lh = out.plane(n, 3 * c);
      double* hl = out.plane(n, 3 * c + 1);
      double* hh = out.plane(n, 3 * c + 2);
      for (int y = 0; y < os.h; ++y) {
        const double* r0 = src + (2 * y) * s.w;
        const double* r1 = r0 + s.w;
        for (int xx = 0; xx < os.w; ++xx) {
          const double a = r0[2 * xx], b = r0[2 * xx + 1];
          const double cc = r1[2 * xx], d = r1[2 * xx + 1];
          const int o = y * os.w + xx;
          lh[o] = 0.5 * (a - b + cc - d);
          hl[o] = 0.5 * (a + b - cc - d);
          hh[o] = 0.5 * (a - b - cc + d);
        }
      }
    }
  }
  return make_result(std::move(out), {x}, [s, os](Node& self) {
    Node& in = input(self, 0);
    if (!in.requires_grad) return;
    Tensor& ga = in.grad_buffer();
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const double* lh = self.grad.plane(n, 3 * c);
        const double* hl = self.grad.plane(n, 3 * c + 1);
        const double* hh = self.grad.plane(n, 3 * c + 2);
        double* dst = ga.plane(n, c);
        for (int y = 0; y < os.h; ++y) {
          double* r0 = dst + (2 * y) * s.w;
          double* r1 = r0 + s.w;
          for (int xx = 0; xx < os.w; ++xx) {
            const int o = y * os.w + xx;
            r0[2 * xx] += 0.5 * (lh[o] + hl[o] + hh[o]);
            r0[2 * xx + 1] += 0.5 * (-lh[o] + hl[o] - hh[o]);
            r1[2 * xx] += 0.5 * (lh[o] - hl[o] - hh[o]);
            r1[2 * xx + 1] += 0.5 * (-lh[o] - hl[o] + hh[o]);
          }
        }
      }
    }
  });
}

Var spectral_normalize(const Var& weight, const std::vector<double>& u,
                       const std::vector<double>& v) {
  const Shape ws = weight.shape();
  const int rows = ws.n;
  const int cols = static_cast<int>(ws.numel() / ws.n);
  if (static_cast<int>(u.size()) != rows || static_cast<int>(v.size()) != cols) {
    fail(ErrorKind::Shape, "spectral_normalize: singular-vector sizes do not "
                           "match weight " + ws.str());
  }
  double raw_sigma = 0.0;
  for (int r = 0; r < rows; ++r) {
    const double* row = weight.value().data() + static_cast<std::size_t>(r) * cols;
    raw_sigma += u[r] * std::inner_product(row, row + cols, v.begin(), 0.0);
  }
  const bool floored = !(raw_sigma > 1e-12);
  const double sigma = floored ? 1e-12 : raw_sigma;

  Tensor out(ws);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = weight.value()[i] / sigma;
  return make_result(
      std::move(out), {weight}, [u, v, rows, cols, sigma, floored](Node& self) {
        Node& wn = input(self, 0);
        if (!wn.requires_grad) return;
        Tensor& gw = wn.grad_buffer();
        double gdotw = 0.0;
        for (std::size_t i = 0; i < gw.size(); ++i) {
          gdotw += self.grad[i] * wn.value[i];
        }
        const double coef = floored ? 0.0 : gdotw / (sigma * sigma);
        for (int r = 0; r < rows; ++r) {
          for (int c = 0; c < cols; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * cols + c;
            gw[i] += self.grad[i] / sigma - coef * u[r] * v[c];
          }
        }
      });
}

}  // namespace lped::ops
