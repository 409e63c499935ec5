#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "fplearn/convolution.hpp"
#include "fplearn/grid.hpp"
#include "fplearn/kde.hpp"
#include "fplearn/library.hpp"

namespace fplearn {

/// Characteristic dimensional constants and the coordinate map x = A xi.
struct ScaleSet {
  Eigen::Matrix2d a = Eigen::Matrix2d::Identity();  // cm
  double t_c = 48.0;                                // hr
  double u_c = 0.0;                                 // cm^-2
  double v_c = 0.0;                                 // cm^2/hr
  double k_c = 0.0;                                 // cm^2/hr
  bool empty_model = false;

  Eigen::Matrix2d lambda() const { return a.transpose() * a; }

  void validate() const {
    if ((a - a.transpose()).norm() > 1e-10 * std::max(1.0, a.norm()))
      throw std::runtime_error("ScaleSet: A must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(a);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw std::runtime_error("ScaleSet: A must be positive definite");
  }
};

/// Dimensionless strength groups; the scalar reductions are valid when the
/// diffusion matrix is isotropic.
struct PiGroups {
  Eigen::Matrix2d pi_v = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d pi_k = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d pi_d = Eigen::Matrix2d::Zero();
  bool isotropic = false;
  double pi_v_scalar = 0.0;  // V_c / D
  double pi_k_scalar = 0.0;  // t_c K_c U_c
};

/// Diffusion-centric coordinate map A = (D t_c)^{1/2} (matrix square root).
inline Eigen::Matrix2d diffusion_centric_map(const Eigen::Matrix2d& d, double t_c) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(0.5 * (d + d.transpose()));
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::runtime_error("diffusion_centric_map: D must be positive definite");
  return es.operatorSqrt() * std::sqrt(t_c);
}

namespace detail {

// Weighted L2 norm of a vector field over the spatial grid.
inline double field_l2_norm(const Frame& fx, const Frame& fy, const Grid& grid) {
  double sum = 0.0;
  for (int j = 0; j < grid.ny(); ++j) {
    const double wj = trapezoid_weight(j, grid.ny());
    for (int i = 0; i < grid.nx(); ++i) {
      const double w = wj * trapezoid_weight(i, grid.nx());
      sum += w * (fx(i, j) * fx(i, j) + fy(i, j) * fy(i, j));
    }
  }
  return std::sqrt(sum * grid.dx() * grid.dy());
}

}  // namespace detail

/// Learned potential field V_w = sum_j w_j V_nm on the spatial grid
/// (non-potential terms are skipped).
inline Frame potential_field(const Eigen::VectorXd& weights,
                             const std::vector<TermDescriptor>& terms,
                             const Grid& grid) {
  Frame out(grid.nx(), grid.ny());
  for (std::size_t j = 0; j < terms.size(); ++j) {
    if (terms[j].kind != TermKind::EnvPotential || weights(j) == 0.0) continue;
    const Frame mode = env_basis_value(terms[j].n, terms[j].m, grid);
    for (std::size_t k = 0; k < out.size(); ++k)
      out.data[k] += weights(j) * mode.data[k];
  }
  return out;
}

/// Characteristic scales from a fitted weight vector and the density it was
/// fitted to:
///   V_c = || grad V_w ||_2   (weighted grid L2 norm),
///   K_c = || grad K_w * u ||_2  (RMS over time frames of the spatial norm),
///   U_c = sup-norm of the density.
/// K weights are interpreted against kernels pre-scaled by 1/U_c, matching the
/// assembled system columns.
inline ScaleSet characteristic_scales(const Eigen::VectorXd& weights,
                                      const std::vector<TermDescriptor>& terms,
                                      const DensityField& density,
                                      const LibrarySpec& lib = LibrarySpec{},
                                      double t_c = 48.0) {
  if (static_cast<std::size_t>(weights.size()) != terms.size())
    throw std::invalid_argument("characteristic_scales: weights/terms mismatch");
  const Grid& grid = density.grid;

  ScaleSet out;
  out.t_c = t_c;
  for (double v : density.values.data) out.u_c = std::max(out.u_c, std::abs(v));
  out.empty_model = (weights.lpNorm<Eigen::Infinity>() == 0.0);
  if (out.empty_model) return out;

  // Environmental potential gradient norm.
  Frame gx(grid.nx(), grid.ny()), gy(grid.nx(), grid.ny());
  bool have_v = false;
  for (std::size_t j = 0; j < terms.size(); ++j) {
    if (terms[j].kind != TermKind::EnvPotential || weights(j) == 0.0) continue;
    have_v = true;
    const auto grad = env_basis_gradient(terms[j].n, terms[j].m, grid);
    for (std::size_t k = 0; k < gx.size(); ++k) {
      gx.data[k] += weights(j) * grad.gx.data[k];
      gy.data[k] += weights(j) * grad.gy.data[k];
    }
  }
  if (have_v) out.v_c = detail::field_l2_norm(gx, gy, grid);

  // Interaction gradient norm, averaged over time frames.
  std::vector<std::size_t> k_cols;
  for (std::size_t j = 0; j < terms.size(); ++j)
    if (terms[j].kind == TermKind::InteractionKernel && weights(j) != 0.0)
      k_cols.push_back(j);
  if (!k_cols.empty() && out.u_c > 0.0) {
    const auto kernels =
        interaction_kernel_fields(lib.j_k, lib.rho0, lib.kernel_radius_cells, grid);
    const int r = kernels.front().radius_cells;
    Frame kx(2 * r + 1, 2 * r + 1), ky(2 * r + 1, 2 * r + 1);
    for (std::size_t j : k_cols) {
      const auto& ker = kernels[terms[j].n - 1];
      const double w = weights(j) / out.u_c;  // undo the column scaling
      for (std::size_t k = 0; k < kx.size(); ++k) {
        kx.data[k] += w * ker.gx.data[k];
        ky.data[k] += w * ker.gy.data[k];
      }
    }
    const double da = grid.dx() * grid.dy();
    double acc = 0.0;
    for (int n = 0; n < density.values.nt; ++n) {
      Frame u(grid.nx(), grid.ny());
      const double* src = density.values.frame_ptr(n);
      for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i)
          u(i, j) = src[i + static_cast<std::size_t>(grid.nx()) * j] * da *
                    trapezoid_weight(i, grid.nx()) * trapezoid_weight(j, grid.ny());
      const Frame fx = fft_convolve_frame_same(u, kx);
      const Frame fy = fft_convolve_frame_same(u, ky);
      const double norm = detail::field_l2_norm(fx, fy, grid);
      acc += norm * norm;
    }
    out.k_c = std::sqrt(acc / density.values.nt);
  }
  return out;
}

/// Dimensionless groups
///   Pi_V = t_c V_c Lambda^-1,
///   Pi_K = t_c K_c U_c |Lambda|^{1/2} Lambda^-1,
///   Pi_D = t_c A^-1 D A^-1,       Lambda = A^T A.
inline PiGroups pi_groups(const ScaleSet& scales, const Eigen::Matrix2d& d) {
  scales.validate();
  const Eigen::Matrix2d lambda = scales.lambda();
  if (std::abs(lambda.determinant()) < 1e-300)
    throw std::runtime_error("pi_groups: singular coordinate map");
  if (std::abs(d.determinant()) < 1e-300)
    throw std::runtime_error("pi_groups: singular diffusion matrix");

  const Eigen::Matrix2d lam_inv = lambda.inverse();
  const Eigen::Matrix2d a_inv = scales.a.inverse();

  PiGroups out;
  out.pi_v = scales.t_c * scales.v_c * lam_inv;
  out.pi_k = scales.t_c * scales.k_c * scales.u_c *
             std::sqrt(lambda.determinant()) * lam_inv;
  out.pi_d = scales.t_c * a_inv * d * a_inv;

  const double d_iso = 0.5 * d.trace();
  out.isotropic = ((d - d_iso * Eigen::Matrix2d::Identity()).norm() <=
                   1e-10 * std::max(1.0, d.norm()));
  if (out.isotropic) {
    out.pi_v_scalar = scales.v_c / d_iso;
    out.pi_k_scalar = scales.t_c * scales.k_c * scales.u_c;
  }
  return out;
}

/// Stationary Boltzmann profile U* = exp(-Pi_V V), normalized to unit
/// trapezoidal mass so it is comparable with density frames.
inline Frame boltzmann_stationary(const Frame& v, double pi_v, double dx, double dy) {
  Frame out(v.nx, v.ny);
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!std::isfinite(v.data[k]))
      throw std::runtime_error("boltzmann_stationary: non-finite potential value");
    out.data[k] = std::exp(-pi_v * v.data[k]);
  }
  const double mass = frame_mass(out, dx, dy);
  for (auto& x : out.data) x /= mass;
  return out;
}

}  // namespace fplearn
