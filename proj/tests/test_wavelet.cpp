#include <doctest.h>

#include <array>
#include <cmath>

#include "lped/error.hpp"
#include "lped/ops.hpp"
#include "lped/wavelet.hpp"
#include "support/testing.hpp"

using namespace lped;
using lped::testing::Rng;

namespace {

// Orthonormal 2x2 Haar basis applied to the tile vector (a, b, c, d).
std::array<double, 4> haar_matrix_oracle(double a, double b, double c, double d) {
  static constexpr double H[4][4] = {{0.5, 0.5, 0.5, 0.5},
                                     {0.5, -0.5, 0.5, -0.5},
                                     {0.5, 0.5, -0.5, -0.5},
                                     {0.5, -0.5, -0.5, 0.5}};
  const double v[4] = {a, b, c, d};
  std::array<double, 4> out{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) out[i] += H[i][j] * v[j];
  }
  return out;
}

double energy(const Tensor& t) {
  double e = 0.0;
  for (double v : t.values()) e += v * v;
  return e;
}

}  // namespace

TEST_CASE("haar matrix rows are orthonormal") {
  // Basis vectors through the oracle give the matrix; check H H^T = I.
  std::array<std::array<double, 4>, 4> cols;
  for (int k = 0; k < 4; ++k) {
    double e[4] = {0, 0, 0, 0};
    e[k] = 1.0;
    cols[k] = haar_matrix_oracle(e[0], e[1], e[2], e[3]);
  }
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 4; ++k) dot += cols[k][i] * cols[k][j];
      CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("constant 2x2 image has only a low band") {
  const auto s = wavelet::dwt2(Tensor(Shape{1, 1, 2, 2}, 0.5));
  CHECK(s.low.shape() == Shape{1, 1, 1, 1});
  CHECK(s.low[0] == 1.0);
  CHECK(s.high.shape() == Shape{1, 3, 1, 1});
  for (double v : s.high.values()) CHECK(v == 0.0);
}

TEST_CASE("worked 2x2 example matches the Haar matrix exactly") {
  const Tensor x(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  const auto s = wavelet::dwt2(x);
  const auto oracle = haar_matrix_oracle(1, 2, 3, 4);
  CHECK(s.low[0] == oracle[0]);
  CHECK(s.high[0] == oracle[1]);
  CHECK(s.high[1] == oracle[2]);
  CHECK(s.high[2] == oracle[3]);
  CHECK(s.low[0] == 5.0);
  CHECK(s.high[0] == -1.0);
  CHECK(s.high[1] == -2.0);
  CHECK(s.high[2] == 0.0);
  CHECK(energy(s.low) + energy(s.high) == 30.0);
}

TEST_CASE("random tiles agree with the matrix oracle per channel") {
  Rng rng(11);
  const Tensor x = testing::uniform(Shape{2, 3, 6, 8}, rng);
  const auto s = wavelet::dwt2(x);
  for (int n = 0; n < 2; ++n) {
    for (int c = 0; c < 3; ++c) {
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 4; ++j) {
          const auto o = haar_matrix_oracle(x.at(n, c, 2 * i, 2 * j), x.at(n, c, 2 * i, 2 * j + 1),
                                            x.at(n, c, 2 * i + 1, 2 * j),
                                            x.at(n, c, 2 * i + 1, 2 * j + 1));
          CHECK(s.low.at(n, c, i, j) == doctest::Approx(o[0]).epsilon(1e-14));
          for (int k = 0; k < 3; ++k) {
            CHECK(s.high.at(n, 3 * c + k, i, j) == doctest::Approx(o[k + 1]).epsilon(1e-14));
          }
        }
      }
    }
  }
}

TEST_CASE("inverse of the unit low coefficient is a 0.5 constant") {
  wavelet::FreqSplit s{Tensor(Shape{1, 1, 1, 1}, 1.0), Tensor(Shape{1, 3, 1, 1}, 0.0)};
  const Tensor x = wavelet::idwt2(s);
  CHECK(x.shape() == Shape{1, 1, 2, 2});
  for (double v : x.values()) CHECK(v == 0.5);
}

TEST_CASE("all-zero split reconstructs zeros") {
  wavelet::FreqSplit s{Tensor(Shape{1, 2, 3, 3}), Tensor(Shape{1, 6, 3, 3})};
  const Tensor x = wavelet::idwt2(s);
  CHECK(x.shape() == Shape{1, 2, 6, 6});
  CHECK(x.max_abs() == 0.0);
}

TEST_CASE("round trip and Parseval on random images") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<int> side(1, 32);
    const Tensor x = testing::uniform(Shape{1, 2, 2 * side(rng), 2 * side(rng)}, rng);
    const auto s = wavelet::dwt2(x);
    CHECK(max_abs_diff(wavelet::idwt2(s), x) < 1e-5);
    const double e = energy(x);
    CHECK(std::abs(energy(s.low) + energy(s.high) - e) / e < 1e-5);
  }
  const Tensor x = testing::uniform(Shape{1, 1, 64, 64}, rng);
  const auto s = wavelet::dwt2(x);
  CHECK(std::abs(energy(s.low) + energy(s.high) - energy(x)) / energy(x) < 1e-5);
}

TEST_CASE("odd sizes are rejected naming the axis") {
  try {
    wavelet::dwt2(Tensor(Shape{1, 1, 3, 4}));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Dimension);
    CHECK(std::string(e.what()).find("height") != std::string::npos);
  }
  try {
    wavelet::high_part(Tensor(Shape{1, 1, 4, 5}));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Dimension);
    CHECK(std::string(e.what()).find("width") != std::string::npos);
  }
}

TEST_CASE("mismatched subbands are a shape error") {
  wavelet::FreqSplit s{Tensor(Shape{1, 1, 2, 2}), Tensor(Shape{1, 2, 2, 2})};
  CHECK_THROWS_AS(wavelet::idwt2(s), Error);
  wavelet::FreqSplit t{Tensor(Shape{1, 1, 2, 2}), Tensor(Shape{1, 3, 2, 3})};
  try {
    wavelet::idwt2(t);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Shape);
  }
}

TEST_CASE("constant offset shifts only the low band, by twice the offset") {
  Rng rng(3);
  const Tensor x = testing::uniform(Shape{1, 1, 8, 8}, rng);
  Tensor y = x;
  for (double& v : y.values()) v += 0.3;
  CHECK(max_abs_diff(wavelet::high_part(x), wavelet::high_part(y)) < 1e-12);
  const Tensor lx = wavelet::low_part(x), ly = wavelet::low_part(y);
  for (std::size_t i = 0; i < lx.size(); ++i) CHECK(ly[i] - lx[i] == doctest::Approx(0.6));
  CHECK(wavelet::high_part(Tensor(Shape{1, 1, 4, 4}, 0.7)).max_abs() == 0.0);
}

TEST_CASE("pixel checkerboard puts all energy in HH") {
  Tensor x(Shape{1, 1, 4, 4});
  for (int y = 0; y < 4; ++y) {
    for (int xx = 0; xx < 4; ++xx) x.at(0, 0, y, xx) = ((y + xx) % 2) ? -1.0 : 1.0;
  }
  const auto s = wavelet::dwt2(x);
  CHECK(s.low.max_abs() == 0.0);
  const auto o = haar_matrix_oracle(1, -1, -1, 1);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      CHECK(s.high.at(0, 0, i, j) == 0.0);
      CHECK(s.high.at(0, 1, i, j) == 0.0);
      CHECK(s.high.at(0, 2, i, j) == o[3]);
    }
  }
  CHECK(energy(s.high) == energy(x));
}

TEST_CASE("linearity on random 8x8 inputs") {
  Rng rng(9);
  const Tensor x = testing::uniform(Shape{1, 2, 8, 8}, rng);
  const Tensor y = testing::uniform(Shape{1, 2, 8, 8}, rng);
  const double a = 0.7, b = -1.3;
  Tensor comb(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) comb[i] = a * x[i] + b * y[i];
  const auto sx = wavelet::dwt2(x), sy = wavelet::dwt2(y), sc = wavelet::dwt2(comb);
  for (std::size_t i = 0; i < sc.low.size(); ++i) {
    CHECK(std::abs(sc.low[i] - (a * sx.low[i] + b * sy.low[i])) < 1e-6);
  }
  for (std::size_t i = 0; i < sc.high.size(); ++i) {
    CHECK(std::abs(sc.high[i] - (a * sx.high[i] + b * sy.high[i])) < 1e-6);
  }
}

TEST_CASE("input gradients of the subbands match finite differences") {
  Rng rng(21);
  const Tensor x = testing::uniform(Shape{1, 2, 4, 4}, rng);
  const Tensor w = testing::normal(Shape{1, 6, 2, 2}, rng);
  const Tensor wl = testing::normal(Shape{1, 2, 2, 2}, rng);
  // Plain sum of the high stack has a constant gradient; weight it as well so
  // the check exercises every position.
  auto high_sum = [](const std::vector<Var>& in) { return ops::sum(wavelet::high_part(in[0])); };
  CHECK(testing::check_gradients(high_sum, {x}).worst < 1e-4);
  auto weighted = [&](const std::vector<Var>& in) {
    return ops::add(ops::sum(ops::mul(wavelet::high_part(in[0]), Var(w))),
                    ops::sum(ops::mul(wavelet::low_part(in[0]), Var(wl))));
  };
  CHECK(testing::check_gradients(weighted, {x}).worst < 1e-4);
}
