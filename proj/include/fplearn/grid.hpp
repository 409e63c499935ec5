#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fplearn {

/// Plot geometry and default discretization.  Lengths in cm.
struct DomainConfig {
  double length_x = 175.0;
  double length_y = 175.0;
  int grid_nx = 80;
  int grid_ny = 80;
  int grid_nt = 98;
  // Crop layout, carried as metadata only.
  int resource_rows = 5;
  int resource_cols = 9;

  void validate() const {
    if (length_x <= 0.0 || length_y <= 0.0)
      throw std::invalid_argument("DomainConfig: plot lengths must be positive");
    if (grid_nx < 4 || grid_ny < 4 || grid_nt < 4)
      throw std::invalid_argument("DomainConfig: grid counts must be >= 4");
  }
};

/// Uniform space-time grid spanning [0,L]x[0,W]x[t0,tF].
class Grid {
 public:
  Grid() = default;
  Grid(double length_x, double length_y, double t0, double t_final,
       int nx, int ny, int nt)
      : nx_(nx), ny_(ny), nt_(nt),
        x0_(0.0), y0_(0.0), t0_(t0),
        dx_(length_x / (nx - 1)), dy_(length_y / (ny - 1)),
        dt_(nt > 1 ? (t_final - t0) / (nt - 1) : 0.0) {
    if (nx < 2 || ny < 2 || nt < 1)
      throw std::invalid_argument("Grid: too few nodes");
    if (length_x <= 0 || length_y <= 0 || t_final < t0)
      throw std::invalid_argument("Grid: degenerate extents");
  }

  static Grid from_domain(const DomainConfig& dom, double t0, double t_final) {
    dom.validate();
    return Grid(dom.length_x, dom.length_y, t0, t_final,
                dom.grid_nx, dom.grid_ny, dom.grid_nt);
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nt() const { return nt_; }
  double dx() const { return dx_; }
  double dy() const { return dy_; }
  double dt() const { return dt_; }
  double x(int i) const { return x0_ + i * dx_; }
  double y(int j) const { return y0_ + j * dy_; }
  double t(int n) const { return t0_ + n * dt_; }
  double t0() const { return t0_; }
  double t_final() const { return t0_ + (nt_ - 1) * dt_; }
  double length_x() const { return (nx_ - 1) * dx_; }
  double length_y() const { return (ny_ - 1) * dy_; }

  /// Check that a node coordinate list is uniform to 1e-12 relative tolerance.
  static bool is_uniform(const std::vector<double>& nodes) {
    if (nodes.size() < 2) return true;
    const double d = nodes[1] - nodes[0];
    const double scale = std::max(std::abs(nodes.front()), std::abs(nodes.back()));
    for (std::size_t k = 1; k < nodes.size(); ++k) {
      if (std::abs(nodes[k] - nodes[k - 1] - d) > 1e-12 * std::max(1.0, scale))
        return false;
    }
    return true;
  }

 private:
  int nx_ = 0, ny_ = 0, nt_ = 0;
  double x0_ = 0, y0_ = 0, t0_ = 0;
  double dx_ = 0, dy_ = 0, dt_ = 0;
};

/// Dense nx*ny scalar field, x index fastest.
struct Frame {
  int nx = 0, ny = 0;
  std::vector<double> data;

  Frame() = default;
  Frame(int nx_, int ny_, double fill = 0.0)
      : nx(nx_), ny(ny_), data(static_cast<std::size_t>(nx_) * ny_, fill) {}

  double& operator()(int i, int j) { return data[i + static_cast<std::size_t>(nx) * j]; }
  double operator()(int i, int j) const { return data[i + static_cast<std::size_t>(nx) * j]; }
  std::size_t size() const { return data.size(); }
};

/// Dense nx*ny*nt space-time tensor, x fastest, t slowest; frames are contiguous.
struct Tensor3 {
  int nx = 0, ny = 0, nt = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int nx_, int ny_, int nt_, double fill = 0.0)
      : nx(nx_), ny(ny_), nt(nt_),
        data(static_cast<std::size_t>(nx_) * ny_ * nt_, fill) {}

  std::size_t idx(int i, int j, int n) const {
    return i + static_cast<std::size_t>(nx) * (j + static_cast<std::size_t>(ny) * n);
  }
  double& operator()(int i, int j, int n) { return data[idx(i, j, n)]; }
  double operator()(int i, int j, int n) const { return data[idx(i, j, n)]; }
  std::size_t size() const { return data.size(); }

  const double* frame_ptr(int n) const { return data.data() + idx(0, 0, n); }
  double* frame_ptr(int n) { return data.data() + idx(0, 0, n); }
};

/// Trapezoidal quadrature weight along one axis (node index i of n).
inline double trapezoid_weight(int i, int n) {
  return (i == 0 || i == n - 1) ? 0.5 : 1.0;
}

/// Trapezoidal integral of a frame with spacings dx, dy.
inline double frame_mass(const Frame& f, double dx, double dy) {
  double sum = 0.0;
  for (int j = 0; j < f.ny; ++j) {
    const double wj = trapezoid_weight(j, f.ny);
    for (int i = 0; i < f.nx; ++i)
      sum += wj * trapezoid_weight(i, f.nx) * f(i, j);
  }
  return sum * dx * dy;
}

}  // namespace fplearn
