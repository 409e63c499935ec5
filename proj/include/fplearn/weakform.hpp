#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fplearn/convolution.hpp"
#include "fplearn/grid.hpp"
#include "fplearn/kde.hpp"
#include "fplearn/library.hpp"
#include "fplearn/test_functions.hpp"

namespace fplearn {

/// Discrete weak-form system b = G w.  Query points are all interior grid
/// nodes where the full test-function support fits, in x-fastest order.
struct WeakSystem {
  Eigen::MatrixXd G;
  Eigen::VectorXd b;
  std::vector<TermDescriptor> descriptors;
  int qx = 0, qy = 0, qt = 0;  // query-point block extents
  double u_c = 0.0;            // sup-norm of the density; K columns are scaled by 1/u_c

  long query_count() const { return static_cast<long>(qx) * qy * qt; }
};

inline long interior_query_count(const Grid& grid, const TestFunctionSpec& spec) {
  spec.validate(grid);
  return static_cast<long>(grid.nx() - 2 * spec.m[0]) *
         (grid.ny() - 2 * spec.m[1]) * (grid.nt() - 2 * spec.m[2]);
}

namespace detail {

inline Eigen::VectorXd flatten(const Tensor3& t) {
  return Eigen::Map<const Eigen::VectorXd>(t.data.data(),
                                           static_cast<long>(t.size()));
}

// Test-function correlation <psi_k, field> over all query points, with the
// requested derivative selection per axis (0, 1, or 2) and the space-time
// trapezoid volume element folded into the t-axis stencil.
inline Tensor3 psi_correlate(const Tensor3& field, const TestFunctionStencils& st,
                             int dx_order, int dy_order, int dt_order,
                             double volume_element) {
  auto pick = [](const AxisStencil& a, int order) -> const std::vector<double>& {
    switch (order) {
      case 0: return a.phi;
      case 1: return a.dphi;
      default: return a.d2phi;
    }
  };
  SeparableStencil s;
  s.x = pick(st.x, dx_order);
  s.y = pick(st.y, dy_order);
  s.t = pick(st.t, dt_order);
  for (auto& v : s.t) v *= volume_element;
  return separable_correlate(field, s);
}

// Pointwise product of the density with a spatial field, broadcast over time.
inline Tensor3 broadcast_multiply(const Tensor3& u, const Frame& f) {
  Tensor3 out(u.nx, u.ny, u.nt);
  const std::size_t fs = f.size();
  for (int n = 0; n < u.nt; ++n) {
    const double* src = u.frame_ptr(n);
    double* dst = out.frame_ptr(n);
    for (std::size_t k = 0; k < fs; ++k) dst[k] = src[k] * f.data[k];
  }
  return out;
}

}  // namespace detail

/// Assemble the weak-form linear system from a density field.
///
/// Column conventions (for the PDE u_t = div(u grad V + u (grad K * u) + D grad u)
/// tested against psi_k(x,t) = psi(x - x_k, t - t_k)):
///   b        = <psi_t, u>
///   V column = <psi_x, u V_x> + <psi_y, u V_y>
///   K column = (<psi_x, u Fx> + <psi_y, u Fy>) / U_c,   F = grad K * u
///   D cols   = -<psi_xx, u>, -2 <psi_xy, u>, -<psi_yy, u>
/// so that b = G w holds for an exact solution.
inline WeakSystem assemble(const DensityField& density, const LibrarySpec& lib,
                           const TestFunctionSpec& tf) {
  const Grid& grid = density.grid;
  const Tensor3& u = density.values;
  if (u.nx != grid.nx() || u.ny != grid.ny() || u.nt != grid.nt())
    throw std::invalid_argument("assemble: density/grid shape mismatch");
  for (int n = 0; n < u.nt; ++n) {
    const double* f = u.frame_ptr(n);
    for (std::size_t k = 0; k < static_cast<std::size_t>(u.nx) * u.ny; ++k)
      if (!std::isfinite(f[k]))
        throw std::runtime_error("assemble: non-finite density value in frame " +
                                 std::to_string(n));
  }

  const auto stencils = build_stencils(tf, grid);
  const double dv = grid.dx() * grid.dy() * grid.dt();
  const auto terms = lib.descriptors();
  const long j_total = static_cast<long>(terms.size());

  WeakSystem sys;
  sys.descriptors = terms;
  sys.qx = grid.nx() - 2 * tf.m[0];
  sys.qy = grid.ny() - 2 * tf.m[1];
  sys.qt = grid.nt() - 2 * tf.m[2];
  const long kappa = sys.query_count();
  sys.G.resize(kappa, j_total);
  sys.u_c = 0.0;
  for (double v : u.data) sys.u_c = std::max(sys.u_c, std::abs(v));

  sys.b = detail::flatten(detail::psi_correlate(u, stencils, 0, 0, 1, dv));

  // Interaction columns need the trapezoid-weighted density per frame.
  std::vector<KernelGradientStencil> kernels;
  if (lib.include_k && !lib.deff_only)
    kernels = interaction_kernel_fields(lib.j_k, lib.rho0, lib.kernel_radius_cells, grid);

  for (long col = 0; col < j_total; ++col) {
    const auto& term = terms[col];
    switch (term.kind) {
      case TermKind::EnvPotential: {
        const auto grad = env_basis_gradient(term.n, term.m, grid);
        const Tensor3 ux = detail::broadcast_multiply(u, grad.gx);
        const Tensor3 uy = detail::broadcast_multiply(u, grad.gy);
        sys.G.col(col) =
            detail::flatten(detail::psi_correlate(ux, stencils, 1, 0, 0, dv)) +
            detail::flatten(detail::psi_correlate(uy, stencils, 0, 1, 0, dv));
        break;
      }
      case TermKind::InteractionKernel: {
        const auto& ker = kernels[term.n - 1];
        Tensor3 gx_field(u.nx, u.ny, u.nt), gy_field(u.nx, u.ny, u.nt);
        Frame weighted(u.nx, u.ny);
        const double da = grid.dx() * grid.dy();
        for (int n = 0; n < u.nt; ++n) {
          const double* src = u.frame_ptr(n);
          for (int j = 0; j < u.ny; ++j)
            for (int i = 0; i < u.nx; ++i)
              weighted(i, j) = src[i + static_cast<std::size_t>(u.nx) * j] * da *
                               trapezoid_weight(i, u.nx) * trapezoid_weight(j, u.ny);
          const Frame fx = fft_convolve_frame_same(weighted, ker.gx);
          const Frame fy = fft_convolve_frame_same(weighted, ker.gy);
          double* dx_out = gx_field.frame_ptr(n);
          double* dy_out = gy_field.frame_ptr(n);
          for (std::size_t k = 0; k < fx.size(); ++k) {
            dx_out[k] = src[k] * fx.data[k];
            dy_out[k] = src[k] * fy.data[k];
          }
        }
        const double scale = (sys.u_c > 0.0) ? 1.0 / sys.u_c : 1.0;
        sys.G.col(col) =
            scale *
            (detail::flatten(detail::psi_correlate(gx_field, stencils, 1, 0, 0, dv)) +
             detail::flatten(detail::psi_correlate(gy_field, stencils, 0, 1, 0, dv)));
        break;
      }
      case TermKind::DiffXX: {
        if (lib.deff_only) {
          sys.G.col(col) =
              -detail::flatten(detail::psi_correlate(u, stencils, 2, 0, 0, dv)) -
              detail::flatten(detail::psi_correlate(u, stencils, 0, 2, 0, dv));
        } else {
          sys.G.col(col) =
              -detail::flatten(detail::psi_correlate(u, stencils, 2, 0, 0, dv));
        }
        break;
      }
      case TermKind::DiffXY:
        sys.G.col(col) =
            -2.0 * detail::flatten(detail::psi_correlate(u, stencils, 1, 1, 0, dv));
        break;
      case TermKind::DiffYY:
        sys.G.col(col) =
            -detail::flatten(detail::psi_correlate(u, stencils, 0, 2, 0, dv));
        break;
    }
  }
  return sys;
}

}  // namespace fplearn
