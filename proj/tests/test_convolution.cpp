#include <catch_amalgamated.hpp>

#include <random>

#include "fplearn/convolution.hpp"

using namespace fplearn;

namespace {

Tensor3 random_tensor(int nx, int ny, int nt, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor3 t(nx, ny, nt);
  for (auto& v : t.data) v = u(rng);
  return t;
}

}  // namespace

TEST_CASE("delta stencil is the identity on the valid region", "[convolution]") {
  const auto field = random_tensor(10, 9, 8, 1);
  Tensor3 delta(3, 3, 3);
  delta(1, 1, 1) = 1.0;

  const auto out = direct_convolve(field, delta);
  REQUIRE(out.nx == 8);
  REQUIRE(out.ny == 7);
  REQUIRE(out.nt == 6);
  for (int n = 0; n < out.nt; ++n)
    for (int j = 0; j < out.ny; ++j)
      for (int i = 0; i < out.nx; ++i)
        CHECK(out(i, j, n) == Catch::Approx(field(i + 1, j + 1, n + 1)).margin(1e-15));
}

TEST_CASE("fft and direct convolution agree on random fields", "[convolution]") {
  const auto field = random_tensor(16, 16, 16, 2);
  const auto stencil = random_tensor(5, 7, 3, 3);

  const auto a = direct_convolve(field, stencil);
  const auto b = fft_convolve(field, stencil);
  REQUIRE(a.size() == b.size());

  double max_abs = 0.0;
  for (double v : a.data) max_abs = std::max(max_abs, std::abs(v));
  for (std::size_t k = 0; k < a.size(); ++k)
    CHECK(std::abs(a.data[k] - b.data[k]) <= 1e-10 * max_abs);
}

TEST_CASE("separable correlation equals full convolution of the flipped stencil",
          "[convolution]") {
  const auto field = random_tensor(14, 12, 10, 4);
  SeparableStencil s;
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  s.x.resize(5);
  s.y.resize(3);
  s.t.resize(3);
  for (auto& v : s.x) v = u(rng);
  for (auto& v : s.y) v = u(rng);
  for (auto& v : s.t) v = u(rng);

  // Correlation with s equals convolution with the point-reflected stencil.
  Tensor3 flipped(5, 3, 3);
  for (int c = 0; c < 3; ++c)
    for (int b = 0; b < 3; ++b)
      for (int a = 0; a < 5; ++a)
        flipped(a, b, c) = s.x[4 - a] * s.y[2 - b] * s.t[2 - c];

  const auto corr = separable_correlate(field, s);
  const auto conv = direct_convolve(field, flipped);
  REQUIRE(corr.size() == conv.size());
  for (std::size_t k = 0; k < corr.size(); ++k)
    CHECK(corr.data[k] == Catch::Approx(conv.data[k]).margin(1e-12));
}

TEST_CASE("same-extent frame convolution matches brute force", "[convolution]") {
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Frame f(9, 8);
  for (auto& v : f.data) v = u(rng);
  Frame ker(5, 3);
  for (auto& v : ker.data) v = u(rng);
  const int rx = 2, ry = 1;

  const auto out = fft_convolve_frame_same(f, ker);
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i) {
      double acc = 0.0;
      for (int b = -ry; b <= ry; ++b)
        for (int a = -rx; a <= rx; ++a) {
          const int ii = i - a, jj = j - b;
          if (ii < 0 || ii >= f.nx || jj < 0 || jj >= f.ny) continue;
          acc += ker(a + rx, b + ry) * f(ii, jj);
        }
      CHECK(out(i, j) == Catch::Approx(acc).margin(1e-12));
    }
}

TEST_CASE("even stencil extents are rejected", "[convolution]") {
  const auto field = random_tensor(8, 8, 8, 7);
  CHECK_THROWS_AS(direct_convolve(field, Tensor3(2, 3, 3)), std::invalid_argument);
  CHECK_THROWS_AS(fft_convolve(field, Tensor3(3, 3, 4)), std::invalid_argument);
  CHECK_THROWS_AS(direct_convolve(Tensor3(2, 2, 2), Tensor3(3, 3, 3)),
                  std::invalid_argument);
}
