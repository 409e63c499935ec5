#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fplearn/grid.hpp"

namespace fplearn {

enum class TermKind { EnvPotential, InteractionKernel, DiffXX, DiffXY, DiffYY };

/// Identifies one library column: a cosine potential mode (n,m), a Bessel
/// kernel index n, or a diffusion-tensor entry.
struct TermDescriptor {
  TermKind kind;
  int n = 0;
  int m = 0;

  std::string name() const {
    switch (kind) {
      case TermKind::EnvPotential:
        return "V_" + std::to_string(n) + "_" + std::to_string(m);
      case TermKind::InteractionKernel:
        return "K_" + std::to_string(n);
      case TermKind::DiffXX:
        return "D_x";
      case TermKind::DiffXY:
        return "D_xy";
      case TermKind::DiffYY:
        return "D_y";
    }
    return "?";
  }
};

/// Candidate-term configuration.  The full default library has
/// J = 9^2 cosine potentials + 3 diffusion entries = 84 columns; Bessel
/// interaction kernels are opt-in (single-replicate data only).
struct LibrarySpec {
  int j_v = 9;                  // cosine degree per axis
  int j_k = 5;                  // Bessel kernel count
  double rho0 = 6.0;            // kernel length scale, cm
  int kernel_radius_cells = 30; // interaction stencil radius, grid cells
  bool include_v = true;
  bool include_k = false;
  bool include_d = true;
  bool deff_only = false;       // isotropic effective-diffusion model (J = 1)

  int column_count() const {
    if (deff_only) return 1;
    return (include_v ? j_v * j_v : 0) + (include_k ? j_k : 0) +
           (include_d ? 3 : 0);
  }

  std::vector<TermDescriptor> descriptors() const {
    std::vector<TermDescriptor> out;
    if (deff_only) {
      out.push_back({TermKind::DiffXX, 0, 0});  // single isotropic coefficient
      return out;
    }
    if (include_v)
      for (int n = 1; n <= j_v; ++n)
        for (int m = 1; m <= j_v; ++m) out.push_back({TermKind::EnvPotential, n, m});
    if (include_k)
      for (int n = 1; n <= j_k; ++n) out.push_back({TermKind::InteractionKernel, n, 0});
    if (include_d) {
      out.push_back({TermKind::DiffXX, 0, 0});
      out.push_back({TermKind::DiffXY, 0, 0});
      out.push_back({TermKind::DiffYY, 0, 0});
    }
    return out;
  }
};

/// Gradient of one cosine potential mode V_nm = cos(2pi n x/L) cos(2pi m y/W),
/// sampled analytically on the spatial grid.  Modes are zero-mean by
/// construction (the constant mode is excluded).
struct PotentialGradient {
  Frame gx, gy;
};

/// Value field of one cosine potential mode on the spatial grid.
inline Frame env_basis_value(int n, int m, const Grid& grid) {
  const double kx = 2.0 * M_PI * n / grid.length_x();
  const double ky = 2.0 * M_PI * m / grid.length_y();
  Frame out(grid.nx(), grid.ny());
  for (int j = 0; j < grid.ny(); ++j) {
    const double cy = std::cos(ky * grid.y(j));
    for (int i = 0; i < grid.nx(); ++i)
      out(i, j) = std::cos(kx * grid.x(i)) * cy;
  }
  return out;
}

inline PotentialGradient env_basis_gradient(int n, int m, const Grid& grid) {
  const double L = grid.length_x(), W = grid.length_y();
  const double kx = 2.0 * M_PI * n / L, ky = 2.0 * M_PI * m / W;
  PotentialGradient out{Frame(grid.nx(), grid.ny()), Frame(grid.nx(), grid.ny())};
  for (int j = 0; j < grid.ny(); ++j) {
    const double cy = std::cos(ky * grid.y(j));
    const double sy = std::sin(ky * grid.y(j));
    for (int i = 0; i < grid.nx(); ++i) {
      const double cx = std::cos(kx * grid.x(i));
      const double sx = std::sin(kx * grid.x(i));
      out.gx(i, j) = -kx * sx * cy;
      out.gy(i, j) = -ky * cx * sy;
    }
  }
  return out;
}

/// All (n,m) gradient fields for n,m = 1..j_v, in descriptor order.
/// Emits an aliasing warning flag when the grid under-resolves the basis.
inline std::vector<PotentialGradient> env_basis_fields(int j_v, const Grid& grid,
                                                       bool* aliasing_warning = nullptr) {
  if (j_v < 1) throw std::invalid_argument("env_basis_fields: j_v >= 1 required");
  if (aliasing_warning) *aliasing_warning = (grid.nx() < 4 * j_v || grid.ny() < 4 * j_v);
  std::vector<PotentialGradient> out;
  out.reserve(static_cast<std::size_t>(j_v) * j_v);
  for (int n = 1; n <= j_v; ++n)
    for (int m = 1; m <= j_v; ++m) out.push_back(env_basis_gradient(n, m, grid));
  return out;
}

namespace detail {

// First derivative of the spherical Bessel function j_nu.
inline double sph_bessel_deriv(int nu, double z) {
  if (z < 1e-10) return (nu == 1) ? 1.0 / 3.0 : 0.0;
  if (nu == 0) return -std::sph_bessel(1, z);
  return std::sph_bessel(nu - 1, z) - ((nu + 1.0) / z) * std::sph_bessel(nu, z);
}

}  // namespace detail

/// Radial profile K_n(rho) = j_(n-1)(rho / rho0) and its derivative.
inline double bessel_kernel(int n, double rho, double rho0) {
  return std::sph_bessel(static_cast<unsigned>(n - 1), rho / rho0);
}
inline double bessel_kernel_deriv(int n, double rho, double rho0) {
  return detail::sph_bessel_deriv(n - 1, rho / rho0) / rho0;
}

/// grad K_n = (x/rho) K_n'(rho), sampled on the symmetric local grid of the
/// given cell radius; the removable singularity at rho = 0 takes its analytic
/// limit (0,0).  Antisymmetric under point reflection.
struct KernelGradientStencil {
  Frame gx, gy;
  int radius_cells = 0;
};

inline KernelGradientStencil interaction_kernel_gradient(int n, double rho0,
                                                         int radius_cells,
                                                         double dx, double dy) {
  if (radius_cells < 1)
    throw std::invalid_argument("interaction_kernel_gradient: radius >= 1 cell");
  const int r = radius_cells;
  KernelGradientStencil out{Frame(2 * r + 1, 2 * r + 1), Frame(2 * r + 1, 2 * r + 1), r};
  for (int j = -r; j <= r; ++j)
    for (int i = -r; i <= r; ++i) {
      const double x = i * dx, y = j * dy;
      const double rho = std::hypot(x, y);
      if (rho < 1e-14) continue;  // analytic limit: zero
      const double kp = bessel_kernel_deriv(n, rho, rho0);
      out.gx(i + r, j + r) = (x / rho) * kp;
      out.gy(i + r, j + r) = (y / rho) * kp;
    }
  return out;
}

inline std::vector<KernelGradientStencil> interaction_kernel_fields(
    int j_k, double rho0, int radius_cells, const Grid& grid) {
  std::vector<KernelGradientStencil> out;
  out.reserve(j_k);
  for (int n = 1; n <= j_k; ++n)
    out.push_back(interaction_kernel_gradient(n, rho0, radius_cells,
                                              grid.dx(), grid.dy()));
  return out;
}

}  // namespace fplearn
