#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "fplearn/data_model.hpp"
#include "fplearn/kde.hpp"

namespace fplearn {

enum class DiffusionMethod { CovarianceRate, DisplacementFit };
enum class DisplacementAxis { Radial, X, Y, Z };

/// Model-free diffusion estimate (cm^2/hr).
struct DiffusionEstimate {
  Eigen::Matrix2d d = Eigen::Matrix2d::Zero();
  double d_eff = 0.0;
  Eigen::Matrix2d uncertainty =
      Eigen::Matrix2d::Constant(std::numeric_limits<double>::quiet_NaN());
  double d_eff_uncertainty = std::numeric_limits<double>::quiet_NaN();
  DiffusionMethod method = DiffusionMethod::CovarianceRate;
  bool degenerate = false;  // frozen data: zero-variance flag
};

/// Covariance-rate estimator D_t = (C_t - C_0) / (2t) per usable time,
/// combined with a precision-weighted average (weights ~ (N_t - 1) t^2, so
/// later frames count more, matching the 1/t error heuristic).  The C_0
/// subtraction reduces to C_t / (2t) for point-cluster starts and makes
/// frozen ensembles report zero diffusion.
inline DiffusionEstimate covariance_rate(const SnapshotSet& set) {
  Eigen::Matrix2d c0 = Eigen::Matrix2d::Zero();
  if (!set.frames.empty() && set.times.front() == 0.0 && set.frames[0].size() >= 2)
    c0 = sample_covariance(positions_of(set.frames[0])).cov;

  Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
  double wsum = 0.0;
  int used = 0;
  for (std::size_t k = 0; k < set.times.size(); ++k) {
    const double t = set.times[k];
    if (t <= 0.0 || set.frames[k].size() < 2) continue;
    const auto cov = sample_covariance(positions_of(set.frames[k]));
    const double w = (cov.count - 1) * t * t;
    acc += w * ((cov.cov - c0) / (2.0 * t));
    wsum += w;
    ++used;
  }
  if (used == 0)
    throw std::runtime_error("covariance_rate: no usable frames with t > 0");

  DiffusionEstimate out;
  out.method = DiffusionMethod::CovarianceRate;
  out.d = acc / wsum;
  out.d_eff = 0.5 * out.d.trace();
  return out;
}

/// Per-time covariance-rate matrix for one frame index (t > 0 required).
inline Eigen::Matrix2d covariance_rate_at(const SnapshotSet& set, std::size_t k) {
  const double t = set.times.at(k);
  if (t <= 0.0) throw std::runtime_error("covariance_rate_at: t > 0 required");
  return sample_covariance(positions_of(set.frames[k])).cov / (2.0 * t);
}

namespace detail {

// Mean displacement curve values per snapshot time, measured against the
// initial center of mass and offset by the t0 baseline.
inline std::vector<double> displacement_curve(const SnapshotSet& set,
                                              DisplacementAxis axis) {
  // Initial center of mass.
  double mx0 = 0.0, my0 = 0.0;
  for (const auto& r : set.frames.front()) {
    mx0 += r.x;
    my0 += r.y;
  }
  mx0 /= set.frames.front().size();
  my0 /= set.frames.front().size();

  std::vector<double> curve;
  curve.reserve(set.times.size());
  for (const auto& frame : set.frames) {
    double mean = 0.0;
    if (axis == DisplacementAxis::Radial) {
      for (const auto& r : frame) mean += std::hypot(r.x - mx0, r.y - my0);
    } else {
      // Marginal mean absolute deviation about the per-time mean.
      double mu = 0.0;
      int n = 0;
      for (const auto& r : frame) {
        if (axis == DisplacementAxis::Z && !r.z) continue;
        mu += (axis == DisplacementAxis::X)   ? r.x
              : (axis == DisplacementAxis::Y) ? r.y
                                              : r.z.value();
        ++n;
      }
      if (n == 0) throw std::runtime_error("displacement_curve: no z values");
      mu /= n;
      for (const auto& r : frame) {
        if (axis == DisplacementAxis::Z && !r.z) continue;
        const double v = (axis == DisplacementAxis::X)   ? r.x
                         : (axis == DisplacementAxis::Y) ? r.y
                                                         : r.z.value();
        mean += std::abs(v - mu);
      }
      mean /= n;
      curve.push_back(mean);
      continue;
    }
    mean /= frame.size();
    curve.push_back(mean);
  }
  // Subtract the initial baseline so the curve starts at zero.
  const double base = curve.front();
  for (auto& v : curve) v -= base;
  return curve;
}

}  // namespace detail

/// Least-squares fit of the mean displacement curve:
///   radial:   <rho>(t) = sqrt(pi D t)
///   marginal: <|x_j - mu_j|>(t) = sqrt((4/pi) D t)
/// Unweighted over the snapshot times (closed form in c = slope vs sqrt(t)).
inline DiffusionEstimate fit_displacement(const SnapshotSet& set,
                                          DisplacementAxis axis) {
  if (set.times.size() < 3)
    throw std::runtime_error("fit_displacement: need at least 3 times");
  const auto curve = detail::displacement_curve(set, axis);

  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < set.times.size(); ++k) {
    const double st = std::sqrt(set.times[k]);
    num += curve[k] * st;
    den += set.times[k];
  }
  const double c = (den > 0.0) ? num / den : 0.0;

  DiffusionEstimate out;
  out.method = DiffusionMethod::DisplacementFit;
  bool all_zero = true;
  for (double v : curve)
    if (v != 0.0) all_zero = false;
  if (all_zero) {
    out.degenerate = true;
    return out;
  }
  const double d = (axis == DisplacementAxis::Radial) ? c * c / M_PI
                                                      : (M_PI / 4.0) * c * c;
  out.d_eff = d;
  if (axis == DisplacementAxis::X) out.d(0, 0) = d;
  if (axis == DisplacementAxis::Y) out.d(1, 1) = d;
  if (axis == DisplacementAxis::Radial) out.d = d * Eigen::Matrix2d::Identity();
  return out;
}

struct BootstrapResult {
  double std_error = 0.0;
  double ci_lo = 0.0;   // 2.5 percentile
  double ci_hi = 0.0;   // 97.5 percentile
  double point = 0.0;
};

/// Bootstrap over per-time resampling with replacement (frames are unlabeled
/// ensembles, so each frame resamples independently).  Deterministic given
/// the seed; replicate r uses its own stream seeded from (seed, r).
inline BootstrapResult bootstrap_se(
    const std::function<double(const SnapshotSet&)>& statistic,
    const SnapshotSet& data, int b = 1000, unsigned long seed = 0) {
  if (data.frames.empty()) throw std::runtime_error("bootstrap_se: empty data");
  if (b < 1) throw std::invalid_argument("bootstrap_se: B >= 1 required");

  std::vector<double> values;
  values.reserve(b);
  for (int rep = 0; rep < b; ++rep) {
    std::seed_seq sq{static_cast<unsigned long>(seed), static_cast<unsigned long>(rep)};
    std::mt19937_64 rng(sq);
    SnapshotSet sample = data;
    for (std::size_t k = 0; k < data.frames.size(); ++k) {
      const auto& src = data.frames[k];
      std::uniform_int_distribution<std::size_t> pick(0, src.size() - 1);
      for (auto& rec : sample.frames[k]) rec = src[pick(rng)];
    }
    values.push_back(statistic(sample));
  }

  BootstrapResult out;
  out.point = statistic(data);
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= values.size();
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  out.std_error = (values.size() > 1) ? std::sqrt(var / (values.size() - 1)) : 0.0;

  std::sort(values.begin(), values.end());
  auto pct = [&](double q) {
    const double pos = q * (values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - lo;
    return values[lo] * (1.0 - frac) + values[hi] * frac;
  };
  out.ci_lo = pct(0.025);
  out.ci_hi = pct(0.975);
  return out;
}

}  // namespace fplearn
