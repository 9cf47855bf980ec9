#pragma once

#include <cmath>
#include <string>

#include "fdrboot/errors.hpp"

namespace fdrboot {

namespace detail {

// Continued fraction for the regularized incomplete beta function,
// modified Lentz's method.
inline double beta_cf(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-15;
  constexpr int kMaxIter = 500;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw NumericError("incomplete beta continued fraction failed to converge (a=" +
                     std::to_string(a) + ", b=" + std::to_string(b) +
                     ", x=" + std::to_string(x) + ")");
}

}  // namespace detail

// Regularized incomplete beta function I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("incomplete beta requires a, b > 0");
  if (!(x >= 0.0) || !(x <= 1.0)) throw ValidationError("incomplete beta requires x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_prefix = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
  const double prefix = std::exp(log_prefix);
  if (x < (a + 1.0) / (a + b + 2.0)) return prefix * detail::beta_cf(a, b, x) / a;
  return 1.0 - prefix * detail::beta_cf(b, a, 1.0 - x) / b;
}

// Student's t distribution with fixed degrees of freedom. The log-beta
// prefactor is cached, so tail evaluations in hot loops cost one
// continued-fraction pass each.
class StudentT {
 public:
  explicit StudentT(double df) : df_(df) {
    if (!(df >= 1.0)) throw ValidationError("t distribution requires df >= 1");
  }

  double df() const { return df_; }

  // P(T > t), exact tail via I_x(df/2, 1/2) with x = df / (df + t^2).
  double upper_tail(double t) const {
    if (!std::isfinite(t)) {
      if (std::isnan(t)) throw NumericError("t statistic is NaN");
      return t > 0.0 ? 0.0 : 1.0;
    }
    const double x = df_ / (df_ + t * t);
    const double half_tail = 0.5 * regularized_incomplete_beta(0.5 * df_, 0.5, x);
    return t >= 0.0 ? half_tail : 1.0 - half_tail;
  }

  double cdf(double t) const { return 1.0 - upper_tail(t); }

 private:
  double df_;
};

}  // namespace fdrboot
