#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fplearn/convolution.hpp"
#include "fplearn/data_model.hpp"
#include "fplearn/grid.hpp"
#include "fplearn/library.hpp"
#include "fplearn/nondim.hpp"

namespace fplearn {

enum class BoundaryPolicy { Reflect, None };
enum class InitialCondition { Center, Uniform, Custom };

/// Interacting-particle simulation setup.  The integrated dynamics are
///   dx = -(grad V(x) + (1/N) sum_{j != i} grad K(x - x_j)) dt + sigma dB,
/// with diffusion matrix D = sigma sigma^T / 2.
struct SimConfig {
  int n_particles = 1000;
  Eigen::Matrix2d sigma = Eigen::Matrix2d::Identity();  // cm/sqrt(hr)
  Eigen::VectorXd v_weights;  // cosine modes, (n,m) row-major over 1..j_v
  Eigen::VectorXd k_weights;  // Bessel kernels, 1..j_k
  LibrarySpec lib;            // spatial parameters of the bases
  DomainConfig domain;
  double dt = 0.05;                       // hr
  std::vector<double> snapshot_times{0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 24.0, 48.0};
  BoundaryPolicy boundary = BoundaryPolicy::Reflect;
  InitialCondition init = InitialCondition::Center;
  std::vector<Eigen::Vector2d> initial_positions;  // used when init = Custom
  unsigned long seed = 0;

  Eigen::Matrix2d diffusion() const { return 0.5 * sigma * sigma.transpose(); }

  void validate() const {
    domain.validate();
    if (n_particles < 1) throw std::invalid_argument("SimConfig: N >= 1 required");
    if (dt <= 0.0) throw std::invalid_argument("SimConfig: dt > 0 required");
    if (snapshot_times.size() < 2 || snapshot_times.front() != 0.0)
      throw std::invalid_argument("SimConfig: snapshot times must start at 0");
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < snapshot_times.size(); ++k) {
      const double gap = snapshot_times[k] - snapshot_times[k - 1];
      if (gap <= 0.0)
        throw std::invalid_argument("SimConfig: snapshot times must increase");
      min_gap = std::min(min_gap, gap);
    }
    if (dt > min_gap / 10.0 + 1e-12)
      throw std::invalid_argument("SimConfig: dt must be <= min snapshot gap / 10");
    if (init == InitialCondition::Custom &&
        static_cast<int>(initial_positions.size()) != n_particles)
      throw std::invalid_argument("SimConfig: initial position count mismatch");
  }
};

namespace detail {

// Active cosine modes of the simulated environmental potential.
struct PotentialMode {
  double w, kx, ky;
};

inline std::vector<PotentialMode> active_modes(const SimConfig& cfg) {
  std::vector<PotentialMode> modes;
  const int jv = cfg.lib.j_v;
  for (long idx = 0; idx < cfg.v_weights.size(); ++idx) {
    if (cfg.v_weights(idx) == 0.0) continue;
    const int n = static_cast<int>(idx) / jv + 1;
    const int m = static_cast<int>(idx) % jv + 1;
    modes.push_back({cfg.v_weights(idx), 2.0 * M_PI * n / cfg.domain.length_x,
                     2.0 * M_PI * m / cfg.domain.length_y});
  }
  return modes;
}

inline Eigen::Vector2d potential_gradient(const std::vector<PotentialMode>& modes,
                                          const Eigen::Vector2d& p) {
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (const auto& mo : modes) {
    g.x() += -mo.w * mo.kx * std::sin(mo.kx * p.x()) * std::cos(mo.ky * p.y());
    g.y() += -mo.w * mo.ky * std::cos(mo.kx * p.x()) * std::sin(mo.ky * p.y());
  }
  return g;
}

// Pairwise kernel gradient sum(w_n grad K_n)(d) for a displacement d.
inline Eigen::Vector2d kernel_gradient(const SimConfig& cfg, const Eigen::Vector2d& d) {
  const double rho = d.norm();
  if (rho < 1e-14) return Eigen::Vector2d::Zero();  // analytic limit
  double kp = 0.0;
  for (long n = 0; n < cfg.k_weights.size(); ++n)
    if (cfg.k_weights(n) != 0.0)
      kp += cfg.k_weights(n) *
            bessel_kernel_deriv(static_cast<int>(n) + 1, rho, cfg.lib.rho0);
  return (kp / rho) * d;
}

inline void reflect_into(double& v, double length) {
  // Fold excursions back into [0, length].
  while (v < 0.0 || v > length) {
    if (v < 0.0) v = -v;
    if (v > length) v = 2.0 * length - v;
  }
}

}  // namespace detail

/// Euler-Maruyama forward simulation; deterministic for a fixed (config, seed).
inline SnapshotSet simulate(const SimConfig& cfg) {
  cfg.validate();
  std::seed_seq sq{cfg.seed, cfg.seed >> 32, 0xf0cca5ul};
  std::mt19937_64 rng(sq);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> ux(0.0, cfg.domain.length_x);
  std::uniform_real_distribution<double> uy(0.0, cfg.domain.length_y);

  std::vector<Eigen::Vector2d> pos(cfg.n_particles);
  switch (cfg.init) {
    case InitialCondition::Center:
      for (auto& p : pos)
        p = Eigen::Vector2d(cfg.domain.length_x / 2.0, cfg.domain.length_y / 2.0);
      break;
    case InitialCondition::Uniform:
      for (auto& p : pos) p = Eigen::Vector2d(ux(rng), uy(rng));
      break;
    case InitialCondition::Custom:
      pos = cfg.initial_positions;
      break;
  }

  const auto modes = detail::active_modes(cfg);
  const bool has_k = (cfg.k_weights.size() > 0) &&
                     (cfg.k_weights.lpNorm<Eigen::Infinity>() > 0.0);
  const double inv_n = 1.0 / cfg.n_particles;

  SnapshotSet out;
  out.domain = cfg.domain;
  out.times = cfg.snapshot_times;
  out.frames.resize(cfg.snapshot_times.size());
  auto record = [&](std::size_t k) {
    auto& frame = out.frames[k];
    frame.reserve(pos.size());
    for (const auto& p : pos) {
      PositionRecord r;
      r.x = p.x();
      r.y = p.y();
      r.plot_id = "sim";
      r.replicate_id = "sim";
      frame.push_back(std::move(r));
    }
  };
  record(0);

  std::vector<Eigen::Vector2d> force(cfg.n_particles);
  long step_no = 0;
  for (std::size_t k = 1; k < cfg.snapshot_times.size(); ++k) {
    const double gap = cfg.snapshot_times[k] - cfg.snapshot_times[k - 1];
    const int steps = static_cast<int>(std::ceil(gap / cfg.dt - 1e-12));
    const double h = gap / steps;
    const double sqrt_h = std::sqrt(h);
    for (int s = 0; s < steps; ++s) {
      ++step_no;
      for (int i = 0; i < cfg.n_particles; ++i) {
        force[i] = detail::potential_gradient(modes, pos[i]);
        if (has_k)
          for (int j = 0; j < cfg.n_particles; ++j) {
            if (j == i) continue;
            force[i] += inv_n * detail::kernel_gradient(cfg, pos[i] - pos[j]);
          }
      }
      for (int i = 0; i < cfg.n_particles; ++i) {
        const Eigen::Vector2d z(gauss(rng), gauss(rng));
        pos[i] += -force[i] * h + sqrt_h * (cfg.sigma * z);
        if (!pos[i].allFinite())
          throw std::runtime_error("simulate: non-finite position at step " +
                                   std::to_string(step_no));
        if (cfg.boundary == BoundaryPolicy::Reflect) {
          detail::reflect_into(pos[i].x(), cfg.domain.length_x);
          detail::reflect_into(pos[i].y(), cfg.domain.length_y);
        }
      }
    }
    record(k);
  }
  return out;
}

/// Exact free-space diffusion propagator applied on the grid:
///   u(x, t) = (u0 * H_D(., t))(x),
///   H_D(x, t) = exp(-x^T D^-1 x / 4t) / (4 pi t |D|^{1/2}),
/// via FFT convolution with a truncated kernel stencil (zero-flux effects
/// outside the support are ignored, so u0 should live in the interior).
inline Frame heat_kernel_density(const Frame& u0, const Eigen::Matrix2d& d,
                                 double t, const Grid& grid) {
  if (t <= 0.0) throw std::invalid_argument("heat_kernel_density: t > 0 required");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(0.5 * (d + d.transpose()));
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("heat_kernel_density: D must be positive definite");
  if (u0.nx != grid.nx() || u0.ny != grid.ny())
    throw std::invalid_argument("heat_kernel_density: frame/grid mismatch");

  // Kernel support: 6 standard deviations of the widest axis.
  const double std_max = std::sqrt(2.0 * es.eigenvalues().maxCoeff() * t);
  const int rx = std::max(1, static_cast<int>(std::ceil(6.0 * std_max / grid.dx())));
  const int ry = std::max(1, static_cast<int>(std::ceil(6.0 * std_max / grid.dy())));

  const Eigen::Matrix2d dinv = d.inverse();
  const double norm = 1.0 / (4.0 * M_PI * t * std::sqrt(d.determinant()));
  Frame kernel(2 * rx + 1, 2 * ry + 1);
  for (int j = -ry; j <= ry; ++j)
    for (int i = -rx; i <= rx; ++i) {
      const Eigen::Vector2d q(i * grid.dx(), j * grid.dy());
      kernel(i + rx, j + ry) = norm * std::exp(-q.dot(dinv * q) / (4.0 * t));
    }

  // Quadrature-weighted source so the FFT product approximates the integral.
  Frame weighted(u0.nx, u0.ny);
  const double da = grid.dx() * grid.dy();
  for (int j = 0; j < u0.ny; ++j)
    for (int i = 0; i < u0.nx; ++i)
      weighted(i, j) = u0(i, j) * da * trapezoid_weight(i, u0.nx) *
                       trapezoid_weight(j, u0.ny);
  return fft_convolve_frame_same(weighted, kernel);
}

/// One simulation per (Pi_V, Pi_K) pair on the Cartesian product of the two
/// lists, with potentials rescaled so the isotropic groups hit the targets:
///   Pi_V = V_c / D       with V_c the grid L2 norm of grad V,
///   Pi_K = t_c K_c U_c   with K_c taken as the kernel-patch gradient norm and
///                        U_c the uniform-density reference 1 / (L W).
/// Outputs are ordered row-major over (Pi_V, Pi_K); seeds increment per cell.
inline std::vector<SnapshotSet> regime_gallery(const std::vector<double>& pi_v_list,
                                               const std::vector<double>& pi_k_list,
                                               const SimConfig& base,
                                               double t_c = 48.0) {
  if (pi_v_list.empty() || pi_k_list.empty())
    throw std::invalid_argument("regime_gallery: empty target list");
  base.validate();
  const Eigen::Matrix2d d = base.diffusion();
  const double d_iso = 0.5 * d.trace();
  if (d_iso <= 0.0) throw std::invalid_argument("regime_gallery: D must be positive");

  // Reference norms of the base potential shapes at unit scale.
  const Grid grid = Grid::from_domain(base.domain, 0.0, base.snapshot_times.back());
  double v_c_base = 0.0;
  {
    Frame gx(grid.nx(), grid.ny()), gy(grid.nx(), grid.ny());
    for (long idx = 0; idx < base.v_weights.size(); ++idx) {
      if (base.v_weights(idx) == 0.0) continue;
      const int n = static_cast<int>(idx) / base.lib.j_v + 1;
      const int m = static_cast<int>(idx) % base.lib.j_v + 1;
      const auto grad = env_basis_gradient(n, m, grid);
      for (std::size_t q = 0; q < gx.size(); ++q) {
        gx.data[q] += base.v_weights(idx) * grad.gx.data[q];
        gy.data[q] += base.v_weights(idx) * grad.gy.data[q];
      }
    }
    v_c_base = detail::field_l2_norm(gx, gy, grid);
  }
  double k_c_base = 0.0;
  if (base.k_weights.size() > 0 && base.k_weights.lpNorm<Eigen::Infinity>() > 0.0) {
    const auto kernels = interaction_kernel_fields(base.lib.j_k, base.lib.rho0,
                                                   base.lib.kernel_radius_cells, grid);
    const int r = kernels.front().radius_cells;
    Frame kx(2 * r + 1, 2 * r + 1), ky(2 * r + 1, 2 * r + 1);
    for (long n = 0; n < base.k_weights.size(); ++n) {
      if (base.k_weights(n) == 0.0) continue;
      const auto& ker = kernels[n];
      for (std::size_t q = 0; q < kx.size(); ++q) {
        kx.data[q] += base.k_weights(n) * ker.gx.data[q];
        ky.data[q] += base.k_weights(n) * ker.gy.data[q];
      }
    }
    double sum = 0.0;
    for (std::size_t q = 0; q < kx.size(); ++q)
      sum += kx.data[q] * kx.data[q] + ky.data[q] * ky.data[q];
    k_c_base = std::sqrt(sum * grid.dx() * grid.dy());
  }
  const double u_ref = 1.0 / (base.domain.length_x * base.domain.length_y);

  std::vector<SnapshotSet> out;
  out.reserve(pi_v_list.size() * pi_k_list.size());
  unsigned long cell = 0;
  for (double pv : pi_v_list)
    for (double pk : pi_k_list) {
      SimConfig cfg = base;
      cfg.seed = base.seed + cell++;
      if (pv != 0.0) {
        if (v_c_base <= 0.0)
          throw std::runtime_error("regime_gallery: nonzero Pi_V needs V modes");
        cfg.v_weights = base.v_weights * (pv * d_iso / v_c_base);
      } else if (cfg.v_weights.size() > 0) {
        cfg.v_weights.setZero();
      }
      if (pk != 0.0) {
        if (k_c_base <= 0.0)
          throw std::runtime_error("regime_gallery: nonzero Pi_K needs K modes");
        cfg.k_weights = base.k_weights * (pk / (t_c * k_c_base * u_ref));
      } else if (cfg.k_weights.size() > 0) {
        cfg.k_weights.setZero();
      }
      out.push_back(simulate(cfg));
    }
  return out;
}

}  // namespace fplearn
