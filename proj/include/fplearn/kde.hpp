#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "fplearn/data_model.hpp"
#include "fplearn/grid.hpp"

namespace fplearn {

/// Probability-density values (cm^-2) on a uniform space-time grid.
struct DensityField {
  Tensor3 values;
  Grid grid;

  /// Trapezoidal mass of frame n.
  double mass(int n) const {
    Frame f(values.nx, values.ny);
    std::copy(values.frame_ptr(n), values.frame_ptr(n) + f.size(), f.data.begin());
    return frame_mass(f, grid.dx(), grid.dy());
  }
};

struct CovarianceEstimate {
  Eigen::Matrix2d cov;   // cm^2, unbiased (1/(N-1))
  Eigen::Vector2d mean;  // cm
  int count = 0;
  bool singular = false;
};

inline CovarianceEstimate sample_covariance(const std::vector<Eigen::Vector2d>& pts) {
  const int n = static_cast<int>(pts.size());
  if (n < 2)
    throw std::runtime_error("sample_covariance: need at least 2 points");
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= n;
  Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) {
    const Eigen::Vector2d d = p - mean;
    c += d * d.transpose();
  }
  c /= (n - 1);
  CovarianceEstimate out{c, mean, n, false};
  const double tr = c.trace();
  out.singular = (c.determinant() <= 1e-12 * std::max(tr * tr, 1e-300));
  return out;
}

inline std::vector<Eigen::Vector2d> positions_of(const std::vector<PositionRecord>& recs) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.emplace_back(r.x, r.y);
  return out;
}

/// Silverman bandwidth h = N^(-1/6).
inline double silverman_bandwidth(int n) {
  if (n < 1) throw std::invalid_argument("silverman_bandwidth: N >= 1 required");
  return std::pow(static_cast<double>(n), -1.0 / 6.0);
}

/// Anisotropic Gaussian KDE frame on the spatial grid:
///   frame(x) = (1/N) sum_i K(x - x_i),  K ~ N(0, h^2 * C),
/// normalized to unit mass on R^2.  No boundary renormalization.  A singular
/// covariance falls back to an isotropic kernel with variance h^2 tr(C)/2.
/// Kernel evaluation is truncated at Mahalanobis radius 6 (relative error < 1e-7).
inline Frame estimate_density(const std::vector<Eigen::Vector2d>& pts,
                              const CovarianceEstimate& cov, double h,
                              const Grid& grid,
                              bool* used_isotropic_fallback = nullptr) {
  if (pts.empty()) throw std::runtime_error("estimate_density: no positions");
  if (h <= 0.0) throw std::invalid_argument("estimate_density: bandwidth must be positive");

  Eigen::Matrix2d c = cov.cov;
  bool fallback = cov.singular;
  if (fallback) c = (cov.cov.trace() / 2.0) * Eigen::Matrix2d::Identity();
  if (used_isotropic_fallback) *used_isotropic_fallback = fallback;
  if (c.determinant() <= 0.0)
    throw std::runtime_error("estimate_density: degenerate covariance");

  const Eigen::Matrix2d cinv = c.inverse();
  const double h2 = h * h;
  const double norm = 1.0 / (2.0 * M_PI * h2 * std::sqrt(c.determinant()));
  constexpr double kMahalanobisCut = 6.0;
  const double cut2 = kMahalanobisCut * kMahalanobisCut * h2;
  // Per-axis half-extent of the truncation ellipse.
  const double ex = kMahalanobisCut * h * std::sqrt(c(0, 0));
  const double ey = kMahalanobisCut * h * std::sqrt(c(1, 1));

  Frame frame(grid.nx(), grid.ny());
  const double inv_n = 1.0 / static_cast<double>(pts.size());
  for (const auto& p : pts) {
    const int i0 = std::max(0, static_cast<int>(std::ceil((p.x() - ex) / grid.dx())));
    const int i1 = std::min(grid.nx() - 1,
                            static_cast<int>(std::floor((p.x() + ex) / grid.dx())));
    const int j0 = std::max(0, static_cast<int>(std::ceil((p.y() - ey) / grid.dy())));
    const int j1 = std::min(grid.ny() - 1,
                            static_cast<int>(std::floor((p.y() + ey) / grid.dy())));
    for (int j = j0; j <= j1; ++j) {
      const double qy = grid.y(j) - p.y();
      for (int i = i0; i <= i1; ++i) {
        const double qx = grid.x(i) - p.x();
        const double m = cinv(0, 0) * qx * qx + 2.0 * cinv(0, 1) * qx * qy +
                         cinv(1, 1) * qy * qy;
        if (m > cut2) continue;
        frame(i, j) += inv_n * norm * std::exp(-m / (2.0 * h2));
      }
    }
  }
  return frame;
}

/// Linear temporal interpolation of snapshot frames onto a uniform grid of
/// target_nt times over [t_first, t_last]; exact at snapshot times.
inline DensityField interpolate_time(const std::vector<Frame>& frames,
                                     const std::vector<double>& snapshot_times,
                                     int target_nt, const Grid& spatial_grid) {
  if (frames.size() < 2)
    throw std::runtime_error("interpolate_time: need at least 2 snapshot frames");
  if (frames.size() != snapshot_times.size())
    throw std::runtime_error("interpolate_time: frames/times length mismatch");
  if (target_nt < static_cast<int>(frames.size()))
    throw std::runtime_error("interpolate_time: target nt below snapshot count");

  DensityField out;
  out.grid = Grid(spatial_grid.length_x(), spatial_grid.length_y(),
                  snapshot_times.front(), snapshot_times.back(),
                  spatial_grid.nx(), spatial_grid.ny(), target_nt);
  out.values = Tensor3(spatial_grid.nx(), spatial_grid.ny(), target_nt);

  std::size_t seg = 0;
  for (int n = 0; n < target_nt; ++n) {
    const double t = out.grid.t(n);
    while (seg + 2 < snapshot_times.size() && t > snapshot_times[seg + 1]) ++seg;
    const double ta = snapshot_times[seg], tb = snapshot_times[seg + 1];
    double a = (t - ta) / (tb - ta);
    a = std::min(1.0, std::max(0.0, a));
    const Frame& fa = frames[seg];
    const Frame& fb = frames[seg + 1];
    double* dst = out.values.frame_ptr(n);
    for (std::size_t k = 0; k < fa.size(); ++k)
      dst[k] = (1.0 - a) * fa.data[k] + a * fb.data[k];
  }
  return out;
}

/// Leading-order expected KDE bias under i.i.d. Gaussian measurement noise of
/// standard deviation sigma: (sigma^2/N) sum_i (Laplacian G)(x - x_i; C_h).
inline Frame kde_bias_estimate(const std::vector<Eigen::Vector2d>& pts,
                               double sigma, const Eigen::Matrix2d& c_h,
                               const Grid& grid) {
  if (sigma < 0.0) throw std::invalid_argument("kde_bias_estimate: sigma >= 0 required");
  Frame frame(grid.nx(), grid.ny());
  if (sigma == 0.0 || pts.empty()) return frame;
  if (c_h.determinant() <= 0.0)
    throw std::runtime_error("kde_bias_estimate: degenerate covariance");

  const Eigen::Matrix2d cinv = c_h.inverse();
  const double norm = 1.0 / (2.0 * M_PI * std::sqrt(c_h.determinant()));
  const double tr_cinv = cinv.trace();
  const double pref = sigma * sigma / static_cast<double>(pts.size());

  for (const auto& p : pts)
    for (int j = 0; j < grid.ny(); ++j) {
      const double qy = grid.y(j) - p.y();
      for (int i = 0; i < grid.nx(); ++i) {
        const double qx = grid.x(i) - p.x();
        const Eigen::Vector2d q(qx, qy);
        const Eigen::Vector2d cq = cinv * q;
        const double m = q.dot(cq);
        if (m > 80.0) continue;
        const double g = norm * std::exp(-0.5 * m);
        // Laplacian of the Gaussian: G * (|C^-1 q|^2 - tr C^-1).
        frame(i, j) += pref * g * (cq.squaredNorm() - tr_cinv);
      }
    }
  return frame;
}

/// Full snapshot-to-density pipeline stage: per-time covariance-scaled KDE
/// frames, then linear interpolation onto the configured time grid.
inline DensityField density_from_snapshots(const SnapshotSet& set) {
  set.validate();
  const auto& dom = set.domain;
  Grid spatial(dom.length_x, dom.length_y, set.times.front(), set.times.back(),
               dom.grid_nx, dom.grid_ny, dom.grid_nt);

  // Kernel variance floor: a kernel much narrower than the grid spacing
  // cannot be resolved by the trapezoid quadrature, so the per-frame mass
  // invariant would silently fail (for example a point-release frame at
  // t = 0).  Kernels wider than half a cell are left untouched; their
  // quadrature error already cancels across particle offsets.
  const double floor_var = spatial.dx() * spatial.dy();
  const double trigger_var = 0.25 * floor_var;

  std::vector<Frame> frames;
  frames.reserve(set.frames.size());
  for (const auto& recs : set.frames) {
    auto pts = positions_of(recs);
    const double h = silverman_bandwidth(static_cast<int>(pts.size()));
    CovarianceEstimate cov;
    if (pts.size() < 2)
      cov = {Eigen::Matrix2d::Zero(), pts[0], 1, false};
    else
      cov = sample_covariance(pts);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov.cov);
    const double lam_min = std::max(0.0, es.eigenvalues().minCoeff());
    if (lam_min * h * h < trigger_var) {
      cov.cov += (floor_var / (h * h) - lam_min) * Eigen::Matrix2d::Identity();
      cov.singular = false;
    }
    frames.push_back(estimate_density(pts, cov, h, spatial));
  }
  return interpolate_time(frames, set.times, dom.grid_nt, spatial);
}

}  // namespace fplearn
