#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace fplearn {

/// Sparse regression result: physical-unit weights with exact zeros off the
/// selected support, the chosen threshold, and fit metrics.
struct SparseModel {
  Eigen::VectorXd weights;
  std::vector<int> support;
  double lambda_star = 0.0;
  double r2 = std::numeric_limits<double>::quiet_NaN();
  double aic = std::numeric_limits<double>::quiet_NaN();
  double delta_aic = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd std_errors;  // per weight, zero off-support
  bool zero_model = false;     // every column thresholded out
};

namespace detail {

// Shared quantities for repeated restricted least-squares solves.
struct GramCache {
  Eigen::MatrixXd gtg;
  Eigen::VectorXd gtb;
  double btb = 0.0;
  double b_norm = 0.0;
  Eigen::VectorXd col_norms;

  explicit GramCache(const Eigen::MatrixXd& g, const Eigen::VectorXd& b)
      : gtg(g.transpose() * g),
        gtb(g.transpose() * b),
        btb(b.squaredNorm()),
        b_norm(b.norm()),
        col_norms(g.colwise().norm()) {}

  double residual_sq(const Eigen::VectorXd& w) const {
    return std::max(0.0, btb - 2.0 * w.dot(gtb) + w.dot(gtg * w));
  }
};

// Least squares restricted to a column subset, via the cached Gram matrix
// with a QR fallback when the normal equations misbehave.
inline Eigen::VectorXd restricted_ols(const Eigen::MatrixXd& g,
                                      const Eigen::VectorXd& b,
                                      const GramCache& cache,
                                      const std::vector<int>& support) {
  const int s = static_cast<int>(support.size());
  Eigen::MatrixXd a(s, s);
  Eigen::VectorXd rhs(s);
  for (int i = 0; i < s; ++i) {
    rhs(i) = cache.gtb(support[i]);
    for (int j = 0; j < s; ++j) a(i, j) = cache.gtg(support[i], support[j]);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  Eigen::VectorXd ws;
  bool ok = (ldlt.info() == Eigen::Success);
  if (ok) {
    ws = ldlt.solve(rhs);
    ok = (a * ws - rhs).norm() <= 1e-8 * std::max(1.0, rhs.norm());
  }
  if (!ok) {
    Eigen::MatrixXd sub(g.rows(), s);
    for (int i = 0; i < s; ++i) sub.col(i) = g.col(support[i]);
    ws = sub.colPivHouseholderQr().solve(b);
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(g.cols());
  for (int i = 0; i < s; ++i) w(support[i]) = ws(i);
  return w;
}

}  // namespace detail

/// Ordinary least squares via rank-revealing column-pivoted QR.
/// Throws on rank deficiency, naming the dependent columns.
inline Eigen::VectorXd ols(const Eigen::MatrixXd& g, const Eigen::VectorXd& b) {
  if (g.rows() != b.size())
    throw std::invalid_argument("ols: dimension mismatch");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(g);
  qr.setThreshold(1e-12);
  if (qr.rank() < g.cols()) {
    const auto perm = qr.colsPermutation().indices();
    std::string cols;
    for (long k = qr.rank(); k < g.cols(); ++k)
      cols += (cols.empty() ? "" : ", ") + std::to_string(perm(k));
    throw std::runtime_error("ols: rank-deficient system; dependent columns: " + cols);
  }
  return qr.solve(b);
}

/// MSTLS at a fixed threshold: iterated restricted least squares on the index
/// set surviving the dominant-balance bracket
///   |w_j| in [ lambda * max(1, ||b||/||G_j||), (1/lambda) * min(1, ||b||/||G_j||) ],
/// stopping when the set is stable.  An empty set yields the flagged zero model.
inline SparseModel mstls(const Eigen::MatrixXd& g, const Eigen::VectorXd& b,
                         double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw std::invalid_argument("mstls: lambda must lie in (0,1)");
  detail::GramCache cache(g, b);

  const int j_total = static_cast<int>(g.cols());
  std::vector<int> all(j_total);
  for (int j = 0; j < j_total; ++j) all[j] = j;
  Eigen::VectorXd w = detail::restricted_ols(g, b, cache, all);

  std::vector<int> support = all;
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<int> next;
    for (int j : support) {
      const double ratio = (cache.col_norms(j) > 0.0)
                               ? cache.b_norm / cache.col_norms(j)
                               : std::numeric_limits<double>::infinity();
      const double lo = lambda * std::max(1.0, ratio);
      const double hi = (1.0 / lambda) * std::min(1.0, ratio);
      if (std::abs(w(j)) >= lo && std::abs(w(j)) <= hi) next.push_back(j);
    }
    if (next.empty()) {
      SparseModel out;
      out.weights = Eigen::VectorXd::Zero(j_total);
      out.lambda_star = lambda;
      out.zero_model = true;
      return out;
    }
    if (next == support) break;
    support = std::move(next);
    w = detail::restricted_ols(g, b, cache, support);
  }

  SparseModel out;
  out.weights = std::move(w);
  out.support = std::move(support);
  out.lambda_star = lambda;
  return out;
}

/// Coefficient of determination; NaN when b is constant.
inline double r_squared(const Eigen::MatrixXd& g, const Eigen::VectorXd& b,
                        const Eigen::VectorXd& w) {
  if (b.size() < 2) throw std::invalid_argument("r_squared: need at least 2 rows");
  const double mean = b.mean();
  const double tss = (b.array() - mean).matrix().squaredNorm();
  if (tss == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return 1.0 - (b - g * w).squaredNorm() / tss;
}

/// AIC = 2 ||w||_0 - 2 l,  l = -(N/2) ln ||r||^2 with N the total particle
/// count.  A zero residual gives -infinity (infinite likelihood).
inline double aic(const Eigen::VectorXd& w, const Eigen::VectorXd& residual,
                  long total_count) {
  int k = 0;
  for (long j = 0; j < w.size(); ++j)
    if (w(j) != 0.0) ++k;
  const double rss = residual.squaredNorm();
  if (rss == 0.0) return -std::numeric_limits<double>::infinity();
  const double log_lik = -0.5 * static_cast<double>(total_count) * std::log(rss);
  return 2.0 * k - 2.0 * log_lik;
}

inline double delta_aic(double aic_a, double aic_b) { return aic_a - aic_b; }

/// Heteroskedasticity-robust (sandwich) standard errors on the active support:
///   S = G_s^+ diag(r^2) (G_s^+)^T,  sigma_j = sqrt(S_jj); zero off-support.
inline Eigen::VectorXd robust_standard_errors(const Eigen::MatrixXd& g,
                                              const Eigen::VectorXd& residual,
                                              const std::vector<int>& support) {
  const int s = static_cast<int>(support.size());
  Eigen::VectorXd sigma = Eigen::VectorXd::Zero(g.cols());
  if (s == 0) return sigma;

  Eigen::MatrixXd sub(g.rows(), s);
  for (int i = 0; i < s; ++i) sub.col(i) = g.col(support[i]);

  Eigen::MatrixXd gram = sub.transpose() * sub;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw std::runtime_error("robust_standard_errors: rank-deficient support");

  // meat = G_s^T diag(r^2) G_s
  Eigen::MatrixXd meat =
      sub.transpose() * (residual.array().square().matrix().asDiagonal() * sub);
  Eigen::MatrixXd inner = ldlt.solve(meat);                // (G^T G)^-1 meat
  Eigen::MatrixXd cov = ldlt.solve(inner.transpose());     // ... (G^T G)^-1
  for (int i = 0; i < s; ++i)
    sigma(support[i]) = std::sqrt(std::max(0.0, cov(i, i)));
  return sigma;
}

inline Eigen::VectorXd robust_standard_errors(const Eigen::MatrixXd& g,
                                              const Eigen::VectorXd& residual) {
  std::vector<int> all(g.cols());
  for (int j = 0; j < static_cast<int>(g.cols()); ++j) all[j] = j;
  return robust_standard_errors(g, residual, all);
}

/// Threshold sweep over 50 uniformly log10-spaced lambdas in [1e-4, 10^-0.08],
/// scoring each candidate with the normalized loss
///   L = ||b_ls - G w||^2 / ||b_ls||^2 + (1/J) ||w||_0,  b_ls = G w_ls,
/// and returning the minimizer (ties broken toward larger lambda).
inline SparseModel mstls_sweep(const Eigen::MatrixXd& g, const Eigen::VectorXd& b,
                               int n_lambda = 50) {
  detail::GramCache cache(g, b);
  const int j_total = static_cast<int>(g.cols());
  std::vector<int> all(j_total);
  for (int j = 0; j < j_total; ++j) all[j] = j;
  const Eigen::VectorXd w_ls = detail::restricted_ols(g, b, cache, all);
  // ||b_ls||^2 = w_ls^T G^T G w_ls
  const double b_ls_sq = std::max(w_ls.dot(cache.gtg * w_ls),
                                  std::numeric_limits<double>::min());

  auto loss_of = [&](const Eigen::VectorXd& w, int k) {
    const Eigen::VectorXd d = w_ls - w;
    return d.dot(cache.gtg * d) / b_ls_sq + static_cast<double>(k) / j_total;
  };

  SparseModel best;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_lambda; ++i) {
    const double e = -4.0 + (-0.08 + 4.0) * i / (n_lambda - 1);
    const double lambda = std::pow(10.0, e);

    // Same iteration as mstls(), sharing the Gram cache and w_ls.
    Eigen::VectorXd w = w_ls;
    std::vector<int> support = all;
    bool zero = false;
    for (int iter = 0; iter < 100; ++iter) {
      std::vector<int> next;
      for (int j : support) {
        const double ratio = (cache.col_norms(j) > 0.0)
                                 ? cache.b_norm / cache.col_norms(j)
                                 : std::numeric_limits<double>::infinity();
        const double lo = lambda * std::max(1.0, ratio);
        const double hi = (1.0 / lambda) * std::min(1.0, ratio);
        if (std::abs(w(j)) >= lo && std::abs(w(j)) <= hi) next.push_back(j);
      }
      if (next.empty()) {
        zero = true;
        break;
      }
      if (next == support) break;
      support = std::move(next);
      w = detail::restricted_ols(g, b, cache, support);
    }
    if (zero) {
      w = Eigen::VectorXd::Zero(j_total);
      support.clear();
    }
    const double loss = loss_of(w, static_cast<int>(support.size()));
    // Larger lambda wins ties between nonzero models (sparser), but the zero
    // model must beat the incumbent strictly: it always scores exactly 1, and
    // a single-column library ties it with the plain OLS fit, which should be
    // returned in that case.
    const bool improves = zero ? loss < best_loss : loss <= best_loss;
    if (improves) {
      best_loss = loss;
      best.weights = w;
      best.support = support;
      best.lambda_star = lambda;
      best.zero_model = zero;
    }
  }

  best.r2 = r_squared(g, b, best.weights);
  return best;
}

}  // namespace fplearn
