#include <catch_amalgamated.hpp>

#include <random>

#include "fplearn/regression.hpp"

using namespace fplearn;

namespace {

Eigen::MatrixXd random_matrix(long rows, long cols, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (long j = 0; j < cols; ++j)
    for (long i = 0; i < rows; ++i) m(i, j) = g(rng);
  return m;
}

}  // namespace

TEST_CASE("ols solves trivial and hand-checked systems", "[regression]") {
  SECTION("identity block") {
    Eigen::MatrixXd g = Eigen::MatrixXd::Identity(4, 4);
    Eigen::VectorXd b = Eigen::VectorXd::Unit(4, 0);
    CHECK((ols(g, b) - b).norm() < 1e-14);
  }
  SECTION("overdetermined 3x2 vs normal equations") {
    Eigen::MatrixXd g(3, 2);
    g << 1, 0, 1, 1, 1, 2;
    Eigen::VectorXd b(3);
    b << 1, 2, 4;
    const Eigen::VectorXd w = ols(g, b);
    const Eigen::VectorXd ref =
        (g.transpose() * g).ldlt().solve(g.transpose() * b);
    CHECK((w - ref).norm() < 1e-12);
    // Residual orthogonality.
    CHECK((g.transpose() * (b - g * w)).norm() < 1e-12);
  }
  SECTION("rank deficiency names dependent columns") {
    Eigen::MatrixXd g(4, 3);
    g.col(0) = Eigen::Vector4d(1, 2, 3, 4);
    g.col(1) = Eigen::Vector4d(0, 1, 0, 1);
    g.col(2) = 2.0 * g.col(0);
    CHECK_THROWS_WITH(ols(g, Eigen::Vector4d::Ones()),
                      Catch::Matchers::ContainsSubstring("dependent columns"));
  }
}

TEST_CASE("mstls recovers a planted sparse model", "[regression]") {
  const long rows = 200, cols = 8;
  Eigen::MatrixXd g = random_matrix(rows, cols, 31);
  Eigen::VectorXd w_true = Eigen::VectorXd::Zero(cols);
  w_true(2) = 3.0;
  w_true(5) = -1.0;
  Eigen::VectorXd b = g * w_true;
  std::mt19937 rng(32);
  std::normal_distribution<double> noise(0.0, 1e-6);
  for (long i = 0; i < rows; ++i) b(i) += noise(rng);

  const auto model = mstls(g, b, 1e-2);
  REQUIRE(model.support == std::vector<int>{2, 5});
  CHECK(model.weights(2) == Catch::Approx(3.0).margin(1e-4));
  CHECK(model.weights(5) == Catch::Approx(-1.0).margin(1e-4));
  for (long j = 0; j < cols; ++j)
    if (j != 2 && j != 5) CHECK(model.weights(j) == 0.0);
}

TEST_CASE("mstls limits", "[regression]") {
  Eigen::MatrixXd g = random_matrix(50, 4, 33);
  Eigen::VectorXd b = random_matrix(50, 1, 34);

  SECTION("tiny lambda reproduces least squares") {
    const Eigen::VectorXd w_ls = ols(g, b);
    const auto model = mstls(g, b, 1e-8);
    CHECK((model.weights - w_ls).norm() < 1e-10);
    CHECK_FALSE(model.zero_model);
  }
  SECTION("harsh lambda yields the flagged zero model") {
    // Shrink b so every coefficient falls below the lower bracket.
    const auto model = mstls(g, 1e-8 * b, 0.9);
    CHECK(model.zero_model);
    CHECK(model.weights.norm() == 0.0);
    CHECK(model.support.empty());
  }
  SECTION("lambda outside (0,1) is rejected") {
    CHECK_THROWS_AS(mstls(g, b, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(mstls(g, b, 1.0), std::invalid_argument);
  }
}

TEST_CASE("mstls output is a fixed point", "[regression]") {
  Eigen::MatrixXd g = random_matrix(120, 6, 35);
  Eigen::VectorXd w_true = Eigen::VectorXd::Zero(6);
  w_true(1) = 2.0;
  w_true(4) = -0.7;
  Eigen::VectorXd b = g * w_true + 1e-5 * random_matrix(120, 1, 36);

  const auto first = mstls(g, b, 5e-2);
  const auto again = mstls(g, b, 5e-2);
  CHECK(first.support == again.support);
  CHECK((first.weights - again.weights).norm() == 0.0);

  // Restricted OLS on the returned support reproduces the returned weights.
  detail::GramCache cache(g, b);
  const Eigen::VectorXd re = detail::restricted_ols(g, b, cache, first.support);
  CHECK((re - first.weights).norm() < 1e-12);
}

TEST_CASE("sweep selects sparse truth with monotone support size", "[regression]") {
  const long rows = 300, cols = 12;
  Eigen::MatrixXd g = random_matrix(rows, cols, 41);
  Eigen::VectorXd w_true = Eigen::VectorXd::Zero(cols);
  w_true(3) = 4.0;
  w_true(9) = -2.5;
  Eigen::VectorXd b = g * w_true + 1e-4 * random_matrix(rows, 1, 42);

  const auto best = mstls_sweep(g, b);
  CHECK(best.support == std::vector<int>{3, 9});
  CHECK(best.r2 > 0.999);

  // Support size is non-increasing along the lambda grid.
  int prev = cols + 1;
  for (int i = 0; i < 50; ++i) {
    const double lambda = std::pow(10.0, -4.0 + 3.92 * i / 49.0);
    const auto m = mstls(g, b, lambda);
    const int k = static_cast<int>(m.support.size());
    CHECK(k <= prev);
    prev = k;
  }
}

TEST_CASE("sweep is scale equivariant", "[regression]") {
  // Work in the ||b|| > ||G_j|| regime where the bracket scales with b.
  // Moderate coefficients keep the dominant-balance bounds inactive at the
  // selected threshold, where the normalized loss makes the sweep equivariant.
  const long rows = 150, cols = 6;
  Eigen::MatrixXd g = random_matrix(rows, cols, 43);
  Eigen::VectorXd w_true = Eigen::VectorXd::Zero(cols);
  w_true(0) = 0.5;
  w_true(4) = -0.3;
  Eigen::VectorXd b = g * w_true + 1e-5 * random_matrix(rows, 1, 44);

  const auto base = mstls_sweep(g, b);
  const auto scaled = mstls_sweep(g, 2.0 * b);
  REQUIRE(base.support == scaled.support);
  CHECK((scaled.weights - 2.0 * base.weights).norm() < 1e-8 * base.weights.norm());
}

TEST_CASE("single-column sweep returns the least-squares scalar", "[regression]") {
  Eigen::MatrixXd g = random_matrix(80, 1, 45);
  Eigen::VectorXd w_true(1);
  w_true << 5.0;
  Eigen::VectorXd b = g * w_true;
  const auto model = mstls_sweep(g, b);
  CHECK(model.weights(0) == Catch::Approx(5.0).epsilon(1e-10));
  CHECK(model.support == std::vector<int>{0});
}

TEST_CASE("r squared reference points", "[regression]") {
  Eigen::MatrixXd g = random_matrix(60, 3, 46);
  Eigen::VectorXd w(3);
  w << 1.0, -2.0, 0.5;
  Eigen::VectorXd b = g * w;

  CHECK(r_squared(g, b, w) == Catch::Approx(1.0).margin(1e-12));

  Eigen::VectorXd centered = b.array() - b.mean();
  CHECK(r_squared(g, centered, Eigen::VectorXd::Zero(3)) ==
        Catch::Approx(0.0).margin(1e-12));

  Eigen::VectorXd flat = Eigen::VectorXd::Constant(60, 2.0);
  CHECK(std::isnan(r_squared(g, flat, w)));
}

TEST_CASE("aic bookkeeping", "[regression]") {
  Eigen::VectorXd w(4);
  w << 1.0, 0.0, -2.0, 0.0;
  Eigen::VectorXd r(5);
  r << 0.1, -0.2, 0.05, 0.0, 0.15;

  const double base = aic(w, r, 100);
  SECTION("identical models give zero delta") {
    CHECK(delta_aic(base, base) == 0.0);
  }
  SECTION("appending an unused zero column changes nothing") {
    Eigen::VectorXd w5(5);
    w5 << 1.0, 0.0, -2.0, 0.0, 0.0;
    CHECK(aic(w5, r, 100) == base);
  }
  SECTION("matches the direct formula") {
    const double rss = r.squaredNorm();
    CHECK(base == Catch::Approx(2.0 * 2 + 100.0 * std::log(rss)));
  }
  SECTION("zero residual is flagged infinite likelihood") {
    CHECK(aic(w, Eigen::VectorXd::Zero(5), 100) ==
          -std::numeric_limits<double>::infinity());
  }
  SECTION("nested models order by residual as the likelihood ratio predicts") {
    Eigen::MatrixXd g = random_matrix(200, 3, 47);
    Eigen::VectorXd truth(3);
    truth << 1.0, 2.0, -1.0;
    Eigen::VectorXd b = g * truth + 0.01 * random_matrix(200, 1, 48);

    const Eigen::VectorXd w_full = ols(g, b);
    const Eigen::VectorXd w_sub = ols(g.leftCols(2), b);
    Eigen::VectorXd w_sub_full = Eigen::VectorXd::Zero(3);
    w_sub_full.head(2) = w_sub;

    const double aic_full = aic(w_full, b - g * w_full, 200);
    const double aic_sub = aic(w_sub_full, b - g * w_sub_full, 200);
    CHECK(delta_aic(aic_full, aic_sub) < 0.0);  // dropping a real term hurts
  }
}

TEST_CASE("robust standard errors", "[regression]") {
  SECTION("zero residual gives zero sigma") {
    Eigen::MatrixXd g = random_matrix(40, 3, 51);
    const auto sigma = robust_standard_errors(g, Eigen::VectorXd::Zero(40));
    CHECK(sigma.norm() == 0.0);
  }
  SECTION("homoskedastic noise approaches the classical covariance") {
    const long rows = 4000, cols = 3;
    Eigen::MatrixXd g = random_matrix(rows, cols, 52);
    const double s = 0.3;
    std::mt19937 rng(53);
    std::normal_distribution<double> noise(0.0, s);
    Eigen::VectorXd r(rows);
    for (long i = 0; i < rows; ++i) r(i) = noise(rng);

    const auto sigma = robust_standard_errors(g, r);
    const Eigen::MatrixXd classical =
        s * s * (g.transpose() * g).inverse();
    for (long j = 0; j < cols; ++j)
      CHECK(sigma(j) == Catch::Approx(std::sqrt(classical(j, j))).epsilon(0.15));
  }
  SECTION("off-support entries are zero") {
    Eigen::MatrixXd g = random_matrix(50, 5, 54);
    Eigen::VectorXd r = 0.1 * random_matrix(50, 1, 55);
    const auto sigma = robust_standard_errors(g, r, {1, 3});
    CHECK(sigma(0) == 0.0);
    CHECK(sigma(2) == 0.0);
    CHECK(sigma(4) == 0.0);
    CHECK(sigma(1) > 0.0);
    CHECK(sigma(3) > 0.0);
  }
}
