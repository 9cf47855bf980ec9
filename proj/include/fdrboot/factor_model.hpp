#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "fdrboot/data.hpp"
#include "fdrboot/errors.hpp"
#include "fdrboot/matrix.hpp"
#include "fdrboot/rng.hpp"

namespace fdrboot {

namespace detail {

using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const EigenRowMajor> as_eigen(const Matrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()),
          static_cast<Eigen::Index>(m.cols())};
}

}  // namespace detail

// T x K design matrix: intercept column of ones followed by factor-return
// columns whose empirical means are zero.
class FactorPanel {
 public:
  static FactorPanel from_matrix(Matrix values) {
    const std::size_t t = values.rows();
    const std::size_t k = values.cols();
    if (k == 0 || t <= k) throw ValidationError("factor panel: need T > K >= 1");
    if (!values.all_finite()) throw ValidationError("factor panel: non-finite entry");
    for (std::size_t r = 0; r < t; ++r)
      if (values(r, 0) != 1.0)
        throw ValidationError("factor panel: intercept column must be identically 1");
    for (std::size_t c = 1; c < k; ++c) {
      double mean = 0.0;
      for (std::size_t r = 0; r < t; ++r) mean += values(r, c);
      mean /= static_cast<double>(t);
      if (std::fabs(mean) > 1e-12)
        throw ValidationError("factor panel: column " + std::to_string(c + 1) +
                              " is not demeaned (mean " + std::to_string(mean) + ")");
    }
    // Column rank is checked at fit time, where a deficiency surfaces as
    // the singular-normal-matrix error.
    return FactorPanel(std::move(values));
  }

  const Matrix& values() const { return values_; }
  std::size_t time_steps() const { return values_.rows(); }
  std::size_t k() const { return values_.cols(); }
  double residual_df() const { return static_cast<double>(time_steps() - k()); }

 private:
  explicit FactorPanel(Matrix values) : values_(std::move(values)) {}
  Matrix values_;
};

// N x T panel of portfolio returns, one row per hypothesis.
struct ReturnPanel {
  Matrix values;

  std::size_t portfolio_count() const { return values.rows(); }
  std::size_t time_steps() const { return values.cols(); }

  void validate() const {
    if (values.rows() == 0 || values.cols() == 0)
      throw ValidationError("return panel: empty matrix");
    if (!values.all_finite()) throw ValidationError("return panel: non-finite entry");
  }
};

struct OlsFit {
  std::vector<double> beta;       // length K, beta[0] is the alpha estimate
  std::vector<double> residuals;  // length T
  double sigma2 = 0.0;            // unbiased residual variance, divisor T - K
};

// Subtracts each column's empirical mean and prepends an intercept column.
// The subtraction is done twice so the resulting means vanish to well below
// the 1e-12 panel tolerance even for large column magnitudes.
inline FactorPanel demean_factors(const Matrix& raw) {
  const std::size_t t = raw.rows();
  const std::size_t m = raw.cols();
  if (t <= m + 1)
    throw ValidationError("demean_factors: need T > " + std::to_string(m + 1) +
                          " time steps, got " + std::to_string(t));
  if (!raw.all_finite()) throw ValidationError("demean_factors: non-finite entry");

  Matrix panel(t, m + 1);
  for (std::size_t r = 0; r < t; ++r) panel(r, 0) = 1.0;
  for (std::size_t c = 0; c < m; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < t; ++r) mean += raw(r, c);
    mean /= static_cast<double>(t);
    double residual_mean = 0.0;
    for (std::size_t r = 0; r < t; ++r) residual_mean += raw(r, c) - mean;
    residual_mean /= static_cast<double>(t);
    for (std::size_t r = 0; r < t; ++r) panel(r, c + 1) = raw(r, c) - mean - residual_mean;
  }
  return FactorPanel::from_matrix(std::move(panel));
}

inline OlsFit ols_fit(const FactorPanel& panel, std::span<const double> returns) {
  const std::size_t t = panel.time_steps();
  const std::size_t k = panel.k();
  if (returns.size() != t)
    throw ValidationError("ols_fit: returns length " + std::to_string(returns.size()) +
                          " does not match T = " + std::to_string(t));

  const auto x = detail::as_eigen(panel.values());
  const Eigen::Map<const Eigen::VectorXd> r(returns.data(),
                                            static_cast<Eigen::Index>(t));
  Eigen::ColPivHouseholderQR<detail::EigenRowMajor> qr(x);
  if (static_cast<std::size_t>(qr.rank()) < k)
    throw NumericError("ols_fit: singular normal matrix (rank-deficient design)");

  const Eigen::VectorXd beta = qr.solve(r);
  const Eigen::VectorXd resid = r - x * beta;

  OlsFit fit;
  fit.beta.assign(beta.data(), beta.data() + k);
  fit.residuals.assign(resid.data(), resid.data() + t);
  fit.sigma2 = resid.squaredNorm() / static_cast<double>(t - k);
  return fit;
}

// Studentized statistics alpha_i = sqrt(T) * a_i / sigma_i for every
// portfolio, with df = T - K.
inline AlphaEstimates estimate_alphas(const FactorPanel& panel, const ReturnPanel& returns) {
  returns.validate();
  const std::size_t t = panel.time_steps();
  if (returns.time_steps() != t)
    throw ValidationError("estimate_alphas: panels disagree on T");

  const double sqrt_t = std::sqrt(static_cast<double>(t));
  AlphaEstimates alphas;
  alphas.df = panel.residual_df();
  alphas.values.reserve(returns.portfolio_count());
  for (std::size_t i = 0; i < returns.portfolio_count(); ++i) {
    const auto row = returns.values.row(i);
    const OlsFit fit = ols_fit(panel, row);
    double r_norm2 = 0.0;
    for (double v : row) r_norm2 += v * v;
    const double ssr = fit.sigma2 * panel.residual_df();
    if (ssr <= 1e-24 * std::max(r_norm2, 1e-300))
      throw NumericError("estimate_alphas: portfolio " + std::to_string(i + 1) +
                         " has zero residual variance (degenerate)");
    alphas.values.push_back(sqrt_t * fit.beta[0] / std::sqrt(fit.sigma2));
  }
  alphas.validate();
  return alphas;
}

// Residuals of all portfolios fitted against the same panel, as an N x T
// matrix, together with the per-portfolio sigma estimates.
struct ResidualSet {
  Matrix residuals;               // N x T
  std::vector<double> sigma_hats; // length N
};

inline ResidualSet compute_residuals(const FactorPanel& panel, const ReturnPanel& returns) {
  returns.validate();
  if (returns.time_steps() != panel.time_steps())
    throw ValidationError("compute_residuals: panels disagree on T");
  ResidualSet out;
  out.residuals = Matrix(returns.portfolio_count(), returns.time_steps());
  out.sigma_hats.reserve(returns.portfolio_count());
  for (std::size_t i = 0; i < returns.portfolio_count(); ++i) {
    const OlsFit fit = ols_fit(panel, returns.values.row(i));
    for (std::size_t t = 0; t < returns.time_steps(); ++t)
      out.residuals(i, t) = fit.residuals[t];
    out.sigma_hats.push_back(std::sqrt(fit.sigma2));
  }
  return out;
}

struct BootstrapResult {
  NullSampleSet samples;   // studentized draws u^(b), B x N
  Matrix raw_means;        // resampled residual means e-bar^(b), B x N
  std::size_t redraw_count = 0;
};

namespace detail {

struct JointResample {
  std::vector<double> means;      // per portfolio
  std::vector<double> u;          // studentized
  bool degenerate = false;
};

// One joint draw: a single index sequence shared by every portfolio, so the
// cross-sectional correlation of the residuals survives resampling.
inline JointResample resample_once(const Matrix& residuals, rng::Stream& stream,
                                   std::vector<std::size_t>& index_buf) {
  const std::size_t n = residuals.rows();
  const std::size_t t = residuals.cols();
  index_buf.resize(t);
  for (std::size_t j = 0; j < t; ++j) index_buf[j] = stream.below(t);

  JointResample out;
  out.means.resize(n);
  out.u.resize(n);
  const double sqrt_t = std::sqrt(static_cast<double>(t));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = residuals.row(i);
    double sum = 0.0;
    for (std::size_t j : index_buf) sum += row[j];
    const double mean = sum / static_cast<double>(t);
    double ss = 0.0;
    for (std::size_t j : index_buf) {
      const double d = row[j] - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(t - 1));
    if (sd == 0.0) {
      out.degenerate = true;
      return out;
    }
    out.means[i] = mean;
    out.u[i] = sqrt_t * mean / sd;
  }
  return out;
}

}  // namespace detail

// Cross-sectional residual bootstrap. Draw b resamples T time indices with
// replacement (one sequence for all portfolios), averages each portfolio's
// resampled residuals, and studentizes by the resample's own standard
// deviation (divisor T - 1). Zero-variance resamples are redrawn and
// counted. Draws use per-index derived streams, so the result for a given
// seed is independent of how the loop is scheduled.
inline BootstrapResult residual_bootstrap(const Matrix& residuals,
                                          std::span<const double> sigma_hats,
                                          std::size_t draw_count, double df,
                                          std::uint64_t seed, unsigned workers = 1) {
  const std::size_t n = residuals.rows();
  const std::size_t t = residuals.cols();
  if (n == 0 || t < 2) throw ValidationError("residual_bootstrap: need N >= 1, T >= 2");
  if (draw_count == 0) throw ValidationError("residual_bootstrap: need at least one draw");
  if (sigma_hats.size() != n)
    throw ValidationError("residual_bootstrap: sigma vector length mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(sigma_hats[i] > 0.0))
      throw NumericError("residual_bootstrap: portfolio " + std::to_string(i + 1) +
                         " has zero residual scale; every resample would be degenerate");
  }

  BootstrapResult result;
  result.samples.df = df;
  result.samples.draws = Matrix(draw_count, n);
  result.raw_means = Matrix(draw_count, n);

  std::atomic<std::size_t> redraws{0};
  std::atomic<std::size_t> next{0};
  constexpr std::size_t kMaxRedrawsPerDraw = 10000;

  auto worker = [&] {
    std::vector<std::size_t> index_buf;
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= draw_count) break;
      rng::Stream stream(rng::derive_seed(seed, {0xB007, b}));
      detail::JointResample draw;
      std::size_t attempts = 0;
      do {
        draw = detail::resample_once(residuals, stream, index_buf);
        if (draw.degenerate) {
          redraws.fetch_add(1);
          if (++attempts > kMaxRedrawsPerDraw)
            throw NumericError("residual_bootstrap: persistent degenerate resamples");
        }
      } while (draw.degenerate);
      for (std::size_t i = 0; i < n; ++i) {
        result.raw_means(b, i) = draw.means[i];
        result.samples.draws(b, i) = draw.u[i];
      }
    }
  };

  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  result.redraw_count = redraws.load();
  return result;
}

// All T^T resample means, enumerated exactly. Only feasible for tiny T;
// used to check the bootstrap moment identities without Monte Carlo error.
inline Matrix enumerate_bootstrap_means(const Matrix& residuals) {
  const std::size_t n = residuals.rows();
  const std::size_t t = residuals.cols();
  if (t == 0 || t > 4)
    throw ValidationError("enumerate_bootstrap_means: exact enumeration requires 1 <= T <= 4");

  std::size_t total = 1;
  for (std::size_t j = 0; j < t; ++j) total *= t;

  Matrix means(total, n);
  std::vector<std::size_t> idx(t, 0);
  for (std::size_t b = 0; b < total; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t j : idx) sum += residuals(i, j);
      means(b, i) = sum / static_cast<double>(t);
    }
    for (std::size_t j = 0; j < t; ++j) {
      if (++idx[j] < t) break;
      idx[j] = 0;
    }
  }
  return means;
}

struct MomentDiagnostics {
  std::vector<double> mean_abs_dev;  // per hypothesis: |E_boot[e-bar_i]|
  Matrix cov_abs_dev;                // per pair: |T Cov_boot - (1/T) sum eps_i eps_j|

  double max_mean_abs_dev() const {
    double m = 0.0;
    for (double v : mean_abs_dev) m = std::max(m, v);
    return m;
  }
  double max_cov_abs_dev() const {
    double m = 0.0;
    for (double v : cov_abs_dev.data()) m = std::max(m, v);
    return m;
  }
};

// Deviations of the bootstrap draws' first and second moments from their
// closed-form targets: E_boot[e-bar] = 0 and
// T Cov_boot(e-bar_i, e-bar_j) = (1/T) sum_t eps_i,t eps_j,t.
inline MomentDiagnostics bootstrap_moment_check(const Matrix& residuals,
                                                const Matrix& raw_means) {
  const std::size_t n = residuals.rows();
  const std::size_t t = residuals.cols();
  const std::size_t b = raw_means.rows();
  if (raw_means.cols() != n)
    throw ValidationError("bootstrap_moment_check: dimension mismatch");
  if (b == 0) throw ValidationError("bootstrap_moment_check: no draws");

  MomentDiagnostics diag;
  diag.mean_abs_dev.resize(n);
  diag.cov_abs_dev = Matrix(n, n);

  std::vector<double> means(n, 0.0);
  for (std::size_t d = 0; d < b; ++d)
    for (std::size_t i = 0; i < n; ++i) means[i] += raw_means(d, i);
  for (std::size_t i = 0; i < n; ++i) {
    means[i] /= static_cast<double>(b);
    diag.mean_abs_dev[i] = std::fabs(means[i]);
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double second_moment = 0.0;
      for (std::size_t d = 0; d < b; ++d) second_moment += raw_means(d, i) * raw_means(d, j);
      second_moment /= static_cast<double>(b);
      double target = 0.0;
      for (std::size_t s = 0; s < t; ++s) target += residuals(i, s) * residuals(j, s);
      target /= static_cast<double>(t);
      const double dev = std::fabs(static_cast<double>(t) * second_moment - target);
      diag.cov_abs_dev(i, j) = dev;
      diag.cov_abs_dev(j, i) = dev;
    }
  }
  return diag;
}

// Lag-l Pearson correlations of (x_t, x_{t+l}) for l = 1..max_lag.
inline std::vector<double> autocorrelation(std::span<const double> series,
                                           std::size_t max_lag) {
  const std::size_t t = series.size();
  if (max_lag == 0) throw ValidationError("autocorrelation: max_lag must be >= 1");
  if (t <= max_lag + 1)
    throw ValidationError("autocorrelation: need T > max_lag + 1");

  std::vector<double> out;
  out.reserve(max_lag);
  for (std::size_t lag = 1; lag <= max_lag; ++lag) {
    const std::size_t m = t - lag;
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
      mean_a += series[s];
      mean_b += series[s + lag];
    }
    mean_a /= static_cast<double>(m);
    mean_b /= static_cast<double>(m);
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
      const double da = series[s] - mean_a;
      const double db = series[s + lag] - mean_b;
      cov += da * db;
      var_a += da * da;
      var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0)
      throw NumericError("autocorrelation: zero variance at lag " + std::to_string(lag));
    out.push_back(cov / std::sqrt(var_a * var_b));
  }
  return out;
}

}  // namespace fdrboot
