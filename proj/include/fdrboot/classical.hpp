#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fdrboot/rng.hpp"
#include "fdrboot/testing.hpp"

namespace fdrboot {

namespace detail {

inline void require_level(double q, const char* who) {
  if (!(q > 0.0 && q < 1.0))
    throw ValidationError(std::string(who) + ": level q must lie in (0, 1)");
}

inline TestDecision reject_all(std::span<const double> pvals) {
  TestDecision decision;
  decision.rejected.resize(pvals.size());
  std::iota(decision.rejected.begin(), decision.rejected.end(), 0);
  decision.threshold_p = *std::max_element(pvals.begin(), pvals.end());
  return decision;
}

}  // namespace detail

// Fixed-threshold test ignoring multiplicity: reject every p <= p_fixed.
inline TestDecision single(const PValueVector& pvals, double p_fixed = 0.05) {
  detail::require_level(p_fixed, "single");
  TestDecision decision;
  double largest = 0.0;
  for (std::size_t i = 0; i < pvals.size(); ++i) {
    if (pvals.values[i] <= p_fixed) {
      decision.rejected.push_back(i);
      largest = std::max(largest, pvals.values[i]);
    }
  }
  if (!decision.rejected.empty()) decision.threshold_p = largest;
  return decision;
}

// Benjamini-Hochberg linear step-up at level q.
inline TestDecision bh(const PValueVector& pvals, double q) {
  detail::require_level(q, "bh");
  return sup_threshold(pvals, q);
}

// Step-up with the logarithmic correction q / (ln N + 1/2), valid under
// arbitrary dependence.
inline TestDecision by(const PValueVector& pvals, double q) {
  detail::require_level(q, "by");
  const double n = static_cast<double>(pvals.size());
  return sup_threshold(pvals, q / (std::log(n) + 0.5));
}

// Two-stage step-up: estimate the null count from a first pass at
// q' = q/(1+q), then rerun the step-up with the level inflated by N/N0-hat.
inline TestDecision bky(const PValueVector& pvals, double q) {
  detail::require_level(q, "bky");
  const double q_prime = q / (1.0 + q);
  const TestDecision stage1 = sup_threshold(pvals, q_prime);
  const std::size_t r1 = stage1.rejection_count();
  const std::size_t n = pvals.size();
  if (r1 == 0) return stage1;
  if (r1 == n) return detail::reject_all(pvals.values);
  const double n0_hat = static_cast<double>(n - r1);
  return sup_threshold(pvals, q_prime * static_cast<double>(n) / n0_hat);
}

// Plug-in estimate of the alternative fraction from the empirical CDF at a
// reference point p0, clamped at zero.
inline double storey_pi1(const PValueVector& pvals, double p0) {
  detail::require_level(p0, "storey_pi1");
  const double f = ecdf_at(pvals, p0);
  return std::max(0.0, (f - p0) / (1.0 - p0));
}

// Storey's procedure: step-up with slope q / (1 - pi1-hat). A saturated
// estimate pi1 = 1 rejects everything.
inline TestDecision storey(const PValueVector& pvals, double q, double p0 = 0.5) {
  detail::require_level(q, "storey");
  const double pi1 = storey_pi1(pvals, p0);
  if (pi1 >= 1.0) return detail::reject_all(pvals.values);
  return sup_threshold(pvals, q / (1.0 - pi1));
}

namespace detail {

// Raw null-fraction estimate #{p > lambda} / (N (1 - lambda)) used by the
// reference-point selection; unlike storey_pi1 it is left unclamped.
inline double pi0_raw(std::span<const double> sorted_pvals, double lambda) {
  const auto above = sorted_pvals.end() -
                     std::upper_bound(sorted_pvals.begin(), sorted_pvals.end(), lambda);
  return static_cast<double>(above) /
         (static_cast<double>(sorted_pvals.size()) * (1.0 - lambda));
}

}  // namespace detail

// Adaptive-reference Storey: pick p0 on the grid 0.05, 0.10, ..., 0.95 by
// minimizing the bootstrap mean-squared error of the null-fraction
// estimate against its plug-in minimum over the grid, then run storey.
inline TestDecision storey_adaptive(const PValueVector& pvals, double q,
                                    std::size_t boot_count, rng::Stream& stream) {
  detail::require_level(q, "storey_adaptive");
  if (boot_count == 0) throw ValidationError("storey_adaptive: boot_count must be >= 1");
  const std::size_t n = pvals.size();
  if (n < 2) return storey(pvals, q, 0.5);

  std::vector<double> grid;
  for (int g = 1; g <= 19; ++g) grid.push_back(0.05 * g);

  std::vector<double> sorted(pvals.values);
  std::sort(sorted.begin(), sorted.end());
  double pi0_min = detail::pi0_raw(sorted, grid.front());
  for (double lambda : grid) pi0_min = std::min(pi0_min, detail::pi0_raw(sorted, lambda));

  std::vector<double> mse(grid.size(), 0.0);
  std::vector<double> resampled(n);
  for (std::size_t b = 0; b < boot_count; ++b) {
    for (std::size_t i = 0; i < n; ++i) resampled[i] = pvals.values[stream.below(n)];
    std::sort(resampled.begin(), resampled.end());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const double d = detail::pi0_raw(resampled, grid[g]) - pi0_min;
      mse[g] += d * d;
    }
  }

  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g)
    if (mse[g] < mse[best]) best = g;
  return storey(pvals, q, grid[best]);
}

}  // namespace fdrboot
