#include <catch_amalgamated.hpp>

#include <random>

#include "fplearn/empirical_stats.hpp"
#include "fplearn/sde_sim.hpp"

using namespace fplearn;

namespace {

SnapshotSet frozen_set() {
  SnapshotSet s;
  s.times = {0.0, 1.0, 4.0};
  s.frames.resize(3);
  for (auto& frame : s.frames)
    for (int i = 0; i < 5; ++i) {
      PositionRecord r;
      r.x = 60.0 + 8.0 * i;
      r.y = 90.0 - 3.0 * i;
      frame.push_back(r);
    }
  return s;
}

SnapshotSet shifted(const SnapshotSet& s, double dx, double dy) {
  SnapshotSet out = s;
  for (auto& frame : out.frames)
    for (auto& r : frame) {
      r.x += dx;
      r.y += dy;
    }
  return out;
}

SnapshotSet rotated_quarter(const SnapshotSet& s) {
  // (x, y) -> (y, L - x): a 90 degree rotation within the square domain.
  SnapshotSet out = s;
  for (auto& frame : out.frames)
    for (auto& r : frame) {
      const double x = r.x, y = r.y;
      r.x = y;
      r.y = out.domain.length_x - x;
    }
  return out;
}

SnapshotSet diffusion_sample(double dx_var, double dy_var, int n, unsigned seed) {
  SimConfig cfg;
  cfg.n_particles = n;
  cfg.sigma = Eigen::Matrix2d::Zero();
  cfg.sigma(0, 0) = std::sqrt(2.0 * dx_var);
  cfg.sigma(1, 1) = std::sqrt(2.0 * dy_var);
  cfg.dt = 0.1;
  cfg.seed = seed;
  return simulate(cfg);
}

}  // namespace

TEST_CASE("frozen particles report zero diffusion", "[empirical_stats]") {
  const auto est = covariance_rate(frozen_set());
  CHECK(est.d.norm() == Catch::Approx(0.0).margin(1e-12));
  CHECK(est.d_eff == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("covariance rate recovers simulated diffusion", "[empirical_stats]") {
  const auto data = diffusion_sample(8.0, 9.0, 2000, 101);
  const auto est = covariance_rate(data);
  CHECK(est.d(0, 0) == Catch::Approx(8.0).epsilon(0.10));
  CHECK(est.d(1, 1) == Catch::Approx(9.0).epsilon(0.10));
  CHECK(std::abs(est.d(0, 1)) < 0.1 * 8.5);
}

TEST_CASE("covariance rate needs a usable positive-time frame", "[empirical_stats]") {
  SnapshotSet s;
  s.times = {0.0};
  s.frames.resize(1);
  for (int i = 0; i < 4; ++i) {
    PositionRecord r;
    r.x = 10.0 * i;
    r.y = 5.0;
    s.frames[0].push_back(r);
  }
  CHECK_THROWS_AS(covariance_rate(s), std::runtime_error);
}

TEST_CASE("displacement fit is exact on its own model curve", "[empirical_stats]") {
  const double d_true = 5.0;
  SnapshotSet s;
  s.times = {0.0, 1.0, 2.0, 4.0, 8.0};
  s.frames.resize(s.times.size());
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    PositionRecord r;
    r.x = 87.5 + std::sqrt(M_PI * d_true * s.times[k]);
    r.y = 87.5;
    s.frames[k].push_back(r);
  }
  const auto est = fit_displacement(s, DisplacementAxis::Radial);
  CHECK(est.d_eff == Catch::Approx(d_true).margin(1e-10));
  CHECK_FALSE(est.degenerate);
}

TEST_CASE("displacement fit recovers simulated diffusion at field scale",
          "[empirical_stats]") {
  const auto data = diffusion_sample(8.0, 8.0, 160, 103);
  const auto est = fit_displacement(data, DisplacementAxis::Radial);
  CHECK(est.d_eff == Catch::Approx(8.0).epsilon(0.15));
}

TEST_CASE("degenerate displacement yields the zero flag", "[empirical_stats]") {
  const auto est = fit_displacement(frozen_set(), DisplacementAxis::Radial);
  CHECK(est.degenerate);
  CHECK(est.d_eff == 0.0);
}

TEST_CASE("marginal axes use the 4/pi model", "[empirical_stats]") {
  const auto data = diffusion_sample(6.0, 12.0, 2000, 104);
  const auto ex = fit_displacement(data, DisplacementAxis::X);
  const auto ey = fit_displacement(data, DisplacementAxis::Y);
  CHECK(ex.d(0, 0) == Catch::Approx(6.0).epsilon(0.15));
  CHECK(ey.d(1, 1) == Catch::Approx(12.0).epsilon(0.15));
}

TEST_CASE("estimators are translation invariant", "[empirical_stats]") {
  const auto data = diffusion_sample(4.0, 7.0, 400, 105);
  const auto moved = shifted(data, 3.7, -2.1);

  const auto a = covariance_rate(data);
  const auto b = covariance_rate(moved);
  CHECK((a.d - b.d).norm() < 1e-10);

  const auto fa = fit_displacement(data, DisplacementAxis::Radial);
  const auto fb = fit_displacement(moved, DisplacementAxis::Radial);
  CHECK(fa.d_eff == Catch::Approx(fb.d_eff).margin(1e-10));
}

TEST_CASE("quarter rotation swaps the axes and negates the cross term",
          "[empirical_stats]") {
  auto data = diffusion_sample(4.0, 9.0, 600, 106);
  data.domain.length_x = data.domain.length_y = 175.0;
  const auto rot = rotated_quarter(data);

  const auto a = covariance_rate(data);
  const auto b = covariance_rate(rot);
  CHECK(b.d(0, 0) == Catch::Approx(a.d(1, 1)).margin(1e-10));
  CHECK(b.d(1, 1) == Catch::Approx(a.d(0, 0)).margin(1e-10));
  CHECK(b.d(0, 1) == Catch::Approx(-a.d(0, 1)).margin(1e-10));
}

TEST_CASE("bootstrap basics", "[empirical_stats]") {
  const auto data = frozen_set();

  SECTION("constant statistic has zero spread") {
    const auto r = bootstrap_se([](const SnapshotSet&) { return 42.0; }, data, 50, 1);
    CHECK(r.std_error == 0.0);
    CHECK(r.ci_lo == 42.0);
    CHECK(r.ci_hi == 42.0);
  }
  SECTION("B = 1 collapses the interval") {
    const auto r = bootstrap_se(
        [](const SnapshotSet& s) { return s.frames[0][0].x; }, data, 1, 2);
    CHECK(r.ci_lo == r.ci_hi);
    CHECK(r.std_error == 0.0);
  }
  SECTION("deterministic under a fixed seed") {
    auto stat = [](const SnapshotSet& s) {
      double m = 0.0;
      for (const auto& r : s.frames[0]) m += r.x;
      return m / s.frames[0].size();
    };
    const auto a = bootstrap_se(stat, data, 200, 7);
    const auto b = bootstrap_se(stat, data, 200, 7);
    CHECK(a.std_error == b.std_error);
    CHECK(a.ci_lo == b.ci_lo);
    const auto c = bootstrap_se(stat, data, 200, 8);
    CHECK(a.std_error != c.std_error);
  }
}

TEST_CASE("bootstrap matches the CLT for a sample mean", "[empirical_stats]") {
  SnapshotSet s;
  s.times = {0.0};
  s.frames.resize(1);
  std::mt19937 rng(107);
  std::normal_distribution<double> g(80.0, 5.0);
  const int n = 400;
  for (int i = 0; i < n; ++i) {
    PositionRecord r;
    r.x = g(rng);
    r.y = 80.0;
    s.frames[0].push_back(r);
  }
  double mean = 0.0;
  for (const auto& r : s.frames[0]) mean += r.x;
  mean /= n;
  double var = 0.0;
  for (const auto& r : s.frames[0]) var += (r.x - mean) * (r.x - mean);
  var /= (n - 1);

  const auto boot = bootstrap_se(
      [](const SnapshotSet& set) {
        double m = 0.0;
        for (const auto& r : set.frames[0]) m += r.x;
        return m / set.frames[0].size();
      },
      s, 1000, 9);
  CHECK(boot.std_error == Catch::Approx(std::sqrt(var / n)).epsilon(0.10));
}

TEST_CASE("covariance-rate and displacement estimates agree on isotropic truth",
          "[empirical_stats]") {
  const auto data = diffusion_sample(8.0, 8.0, 1000, 108);
  const auto cov = covariance_rate(data);
  const auto disp = fit_displacement(data, DisplacementAxis::Radial);
  const auto boot = bootstrap_se(
      [](const SnapshotSet& s) {
        return fit_displacement(s, DisplacementAxis::Radial).d_eff;
      },
      data, 200, 11);
  // Combined two-sigma window around the displacement estimate.
  CHECK(std::abs(cov.d_eff - disp.d_eff) < 4.0 * boot.std_error + 0.1 * 8.0);
}
