#pragma once

#include <fftw3.h>

#include <complex>
#include <stdexcept>
#include <vector>

#include "fplearn/grid.hpp"

namespace fplearn {

/// Separable 1-D stencils sampled on symmetric supports.  Radii are in grid
/// cells; each vector has 2*radius+1 entries centered at the origin.
struct SeparableStencil {
  std::vector<double> x, y, t;

  int rx() const { return (static_cast<int>(x.size()) - 1) / 2; }
  int ry() const { return (static_cast<int>(y.size()) - 1) / 2; }
  int rt() const { return (static_cast<int>(t.size()) - 1) / 2; }
};

namespace detail {

// Full linear convolution via FFTW r2c/c2r, any rank up to 3.
inline std::vector<double> fft_full_convolve(const std::vector<double>& a,
                                             const std::vector<double>& b,
                                             const int adim[3], const int bdim[3],
                                             int rank, int odim[3]) {
  int n[3] = {1, 1, 1};
  std::size_t total = 1;
  for (int d = 0; d < rank; ++d) {
    odim[d] = adim[d] + bdim[d] - 1;
    n[d] = odim[d];
    total *= static_cast<std::size_t>(n[d]);
  }
  // FFTW uses row-major order; our tensors are x-fastest so pass dims reversed.
  int nf[3];
  for (int d = 0; d < rank; ++d) nf[d] = n[rank - 1 - d];
  const std::size_t nc = total / n[0] * (n[0] / 2 + 1);

  std::vector<double> pa(total, 0.0), pb(total, 0.0);
  auto embed = [&](const std::vector<double>& src, const int sdim[3],
                   std::vector<double>& dst) {
    const int sx = sdim[0], sy = rank > 1 ? sdim[1] : 1, st = rank > 2 ? sdim[2] : 1;
    for (int k = 0; k < st; ++k)
      for (int j = 0; j < sy; ++j)
        for (int i = 0; i < sx; ++i)
          dst[i + static_cast<std::size_t>(n[0]) *
                      (j + static_cast<std::size_t>(rank > 1 ? n[1] : 1) * k)] =
              src[i + static_cast<std::size_t>(sx) * (j + static_cast<std::size_t>(sy) * k)];
  };
  embed(a, adim, pa);
  embed(b, bdim, pb);

  std::vector<std::complex<double>> fa(nc), fb(nc);
  fftw_plan pf = fftw_plan_dft_r2c(rank, nf, pa.data(),
                                   reinterpret_cast<fftw_complex*>(fa.data()),
                                   FFTW_ESTIMATE);
  fftw_execute(pf);
  fftw_destroy_plan(pf);
  fftw_plan pg = fftw_plan_dft_r2c(rank, nf, pb.data(),
                                   reinterpret_cast<fftw_complex*>(fb.data()),
                                   FFTW_ESTIMATE);
  fftw_execute(pg);
  fftw_destroy_plan(pg);

  for (std::size_t i = 0; i < nc; ++i) fa[i] *= fb[i];

  std::vector<double> out(total);
  fftw_plan pi = fftw_plan_dft_c2r(rank, nf,
                                   reinterpret_cast<fftw_complex*>(fa.data()),
                                   out.data(), FFTW_ESTIMATE);
  fftw_execute(pi);
  fftw_destroy_plan(pi);

  const double scale = 1.0 / static_cast<double>(total);
  for (auto& v : out) v *= scale;
  return out;
}

}  // namespace detail

/// Valid-region discrete convolution of a 3-D field with a centered stencil
/// of odd extents: out(k) = sum_o stencil(o) * field(k - o), with k restricted
/// to indices where the stencil support fits inside the field.
inline Tensor3 direct_convolve(const Tensor3& field, const Tensor3& stencil) {
  if (stencil.nx % 2 == 0 || stencil.ny % 2 == 0 || stencil.nt % 2 == 0)
    throw std::invalid_argument("direct_convolve: stencil extents must be odd");
  const int rx = stencil.nx / 2, ry = stencil.ny / 2, rt = stencil.nt / 2;
  if (field.nx < stencil.nx || field.ny < stencil.ny || field.nt < stencil.nt)
    throw std::invalid_argument("direct_convolve: stencil larger than field");

  Tensor3 out(field.nx - 2 * rx, field.ny - 2 * ry, field.nt - 2 * rt);
  for (int n = 0; n < out.nt; ++n)
    for (int j = 0; j < out.ny; ++j)
      for (int i = 0; i < out.nx; ++i) {
        double acc = 0.0;
        for (int c = -rt; c <= rt; ++c)
          for (int b = -ry; b <= ry; ++b)
            for (int a = -rx; a <= rx; ++a)
              acc += stencil(a + rx, b + ry, c + rt) *
                     field(i + rx - a, j + ry - b, n + rt - c);
        out(i, j, n) = acc;
      }
  return out;
}

/// FFT route for the same valid-region convolution; agrees with
/// direct_convolve to ~1e-10 relative.
inline Tensor3 fft_convolve(const Tensor3& field, const Tensor3& stencil) {
  if (stencil.nx % 2 == 0 || stencil.ny % 2 == 0 || stencil.nt % 2 == 0)
    throw std::invalid_argument("fft_convolve: stencil extents must be odd");
  if (field.nx < stencil.nx || field.ny < stencil.ny || field.nt < stencil.nt)
    throw std::invalid_argument("fft_convolve: stencil larger than field");
  const int adim[3] = {field.nx, field.ny, field.nt};
  const int bdim[3] = {stencil.nx, stencil.ny, stencil.nt};
  int odim[3];
  auto full = detail::fft_full_convolve(field.data, stencil.data, adim, bdim, 3, odim);

  const int rx = stencil.nx / 2, ry = stencil.ny / 2, rt = stencil.nt / 2;
  Tensor3 out(field.nx - 2 * rx, field.ny - 2 * ry, field.nt - 2 * rt);
  for (int n = 0; n < out.nt; ++n)
    for (int j = 0; j < out.ny; ++j)
      for (int i = 0; i < out.nx; ++i)
        out(i, j, n) = full[(i + 2 * rx) +
                            static_cast<std::size_t>(odim[0]) *
                                ((j + 2 * ry) + static_cast<std::size_t>(odim[1]) *
                                                    (n + 2 * rt))];
  return out;
}

/// Valid-region cross-correlation with a separable stencil, applied axis by
/// axis: out(k) = sum_o sx(ox) sy(oy) st(ot) field(k + o).  This is the inner
/// product <psi_k, field> for a test-function stencil centered at k.
inline Tensor3 separable_correlate(const Tensor3& field, const SeparableStencil& s) {
  const int rx = s.rx(), ry = s.ry(), rt = s.rt();
  if (field.nx < 2 * rx + 1 || field.ny < 2 * ry + 1 || field.nt < 2 * rt + 1)
    throw std::invalid_argument("separable_correlate: stencil larger than field");

  // x pass
  Tensor3 tx(field.nx - 2 * rx, field.ny, field.nt);
  for (int n = 0; n < field.nt; ++n)
    for (int j = 0; j < field.ny; ++j) {
      const double* row = &field.data[field.idx(0, j, n)];
      for (int i = 0; i < tx.nx; ++i) {
        double acc = 0.0;
        for (int o = 0; o <= 2 * rx; ++o) acc += s.x[o] * row[i + o];
        tx(i, j, n) = acc;
      }
    }
  // y pass
  Tensor3 ty(tx.nx, tx.ny - 2 * ry, tx.nt);
  for (int n = 0; n < tx.nt; ++n)
    for (int j = 0; j < ty.ny; ++j)
      for (int i = 0; i < ty.nx; ++i) {
        double acc = 0.0;
        for (int o = 0; o <= 2 * ry; ++o) acc += s.y[o] * tx(i, j + o, n);
        ty(i, j, n) = acc;
      }
  // t pass
  Tensor3 out(ty.nx, ty.ny, ty.nt - 2 * rt);
  for (int n = 0; n < out.nt; ++n)
    for (int j = 0; j < out.ny; ++j)
      for (int i = 0; i < out.nx; ++i) {
        double acc = 0.0;
        for (int o = 0; o <= 2 * rt; ++o) acc += s.t[o] * ty(i, j, n + o);
        out(i, j, n) = acc;
      }
  return out;
}

/// Same-extent 2-D convolution of a frame with a centered odd-extent kernel,
/// zero outside the frame: out(i) = sum_o kernel(o) * f(i - o).
inline Frame fft_convolve_frame_same(const Frame& f, const Frame& kernel) {
  if (kernel.nx % 2 == 0 || kernel.ny % 2 == 0)
    throw std::invalid_argument("fft_convolve_frame_same: kernel extents must be odd");
  const int adim[3] = {f.nx, f.ny, 1};
  const int bdim[3] = {kernel.nx, kernel.ny, 1};
  int odim[3];
  auto full = detail::fft_full_convolve(f.data, kernel.data, adim, bdim, 2, odim);

  const int rx = kernel.nx / 2, ry = kernel.ny / 2;
  Frame out(f.nx, f.ny);
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i)
      out(i, j) = full[(i + rx) + static_cast<std::size_t>(odim[0]) * (j + ry)];
  return out;
}

}  // namespace fplearn
