#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "fplearn/grid.hpp"

namespace fplearn {

/// Separable compactly supported test-function family
///   psi(x,y,t) = phi_x(x) phi_y(y) phi_t(t),
///   phi_i(x) = [1 - (x / m_i Delta_i)^2]^(p_i) on its support.
struct TestFunctionSpec {
  std::array<int, 3> m{10, 10, 6};       // support radii, grid cells
  std::array<int, 3> alpha_bar{2, 2, 1};  // max derivative order per axis
  double tau0 = 1e-10;                    // support tolerance

  std::array<int, 3> degrees() const;
  void validate(const Grid& grid) const {
    for (int d = 0; d < 3; ++d)
      if (m[d] < 2) throw std::invalid_argument("TestFunctionSpec: m_i >= 2 required");
    if (2 * m[0] >= grid.nx() || 2 * m[1] >= grid.ny() || 2 * m[2] >= grid.nt())
      throw std::invalid_argument("TestFunctionSpec: support exceeds grid");
    const auto p = degrees();
    for (int d = 0; d < 3; ++d)
      if (p[d] < alpha_bar[d] + 1)
        throw std::invalid_argument("TestFunctionSpec: degree below alpha_bar + 1");
  }
};

/// Degree selection: smallest p making the discrete support tail fall below
/// tau0, but never below alpha_bar + 1.
inline int test_function_degree(int m, int alpha_bar, double tau0) {
  if (m < 2) throw std::invalid_argument("test_function_degree: m >= 2 required");
  const double ratio = (2.0 * m - 1.0) / (static_cast<double>(m) * m);
  int p_tol = 0;
  if (tau0 < 1.0)
    p_tol = static_cast<int>(std::ceil(std::log(tau0) / std::log(ratio)));
  return std::max(p_tol, alpha_bar + 1);
}

inline std::array<int, 3> TestFunctionSpec::degrees() const {
  return {test_function_degree(m[0], alpha_bar[0], tau0),
          test_function_degree(m[1], alpha_bar[1], tau0),
          test_function_degree(m[2], alpha_bar[2], tau0)};
}

/// One axis of a test-function stencil: phi and its first two derivatives
/// sampled at node offsets -m..m (vectors of length 2m+1).
struct AxisStencil {
  std::vector<double> phi, dphi, d2phi;
  int radius = 0;
};

struct TestFunctionStencils {
  AxisStencil x, y, t;
};

inline AxisStencil build_axis_stencil(int m, int p, double delta) {
  AxisStencil s;
  s.radius = m;
  s.phi.resize(2 * m + 1);
  s.dphi.resize(2 * m + 1);
  s.d2phi.resize(2 * m + 1);
  const double half = m * delta;
  for (int j = -m; j <= m; ++j) {
    const double u = static_cast<double>(j) / m;  // x / (m delta)
    const double w = 1.0 - u * u;
    const double wp1 = (p >= 1) ? std::pow(w, p - 1) : 0.0;
    const double wp2 = (p >= 2) ? std::pow(w, p - 2) : 0.0;
    s.phi[j + m] = std::pow(w, p);
    s.dphi[j + m] = -2.0 * p * u * wp1 / half;
    s.d2phi[j + m] = (4.0 * p * (p - 1) * u * u * wp2 - 2.0 * p * wp1) / (half * half);
  }
  // Endpoints vanish exactly.
  s.phi.front() = s.phi.back() = 0.0;
  return s;
}

inline TestFunctionStencils build_stencils(const TestFunctionSpec& spec, const Grid& grid) {
  spec.validate(grid);
  const auto p = spec.degrees();
  return {build_axis_stencil(spec.m[0], p[0], grid.dx()),
          build_axis_stencil(spec.m[1], p[1], grid.dy()),
          build_axis_stencil(spec.m[2], p[2], grid.dt())};
}

}  // namespace fplearn
