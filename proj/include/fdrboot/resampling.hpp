#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "fdrboot/data.hpp"
#include "fdrboot/rng.hpp"
#include "fdrboot/testing.hpp"

namespace fdrboot {

// Configuration of the dueling double bootstrap. The aggressive variant
// targets q in the inner search instead of q/2.
struct DdbootConfig {
  double q = 0.05;
  std::size_t outer_samples = 20;      // V
  std::size_t inner_samples = 500;     // W
  std::size_t search_iterations = 20;  // S
  Sidedness sidedness = Sidedness::two_sided;
  bool aggressive = false;

  void validate() const {
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("ddboot: q must lie in (0, 1)");
    if (outer_samples == 0 || inner_samples == 0 || search_iterations == 0)
      throw ValidationError("ddboot: V, W, S must all be >= 1");
  }
};

// A candidate true-parameter vector sampled by shifting the observed
// statistics with a null draw, plus the null set it implies.
struct SampledParameter {
  std::vector<double> alpha_v;
  std::vector<bool> implied_null;
  std::size_t null_count = 0;
};

// alpha_v = alpha_hat - u_v. In two-sided mode every coordinate with
// |alpha_hat_i| <= |u_v_i| is zeroed so the implied null set is not
// underestimated; ties zero. Implied nulls follow the sidedness convention
// (alpha <= 0 one-sided, alpha == 0 two-sided).
inline SampledParameter sample_alpha_v(const AlphaEstimates& alpha_hat,
                                       std::span<const double> u_v, Sidedness s) {
  const std::size_t n = alpha_hat.size();
  if (u_v.size() != n)
    throw ValidationError("sample_alpha_v: draw length does not match hypotheses");

  SampledParameter param;
  param.alpha_v.resize(n);
  param.implied_null.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double a = alpha_hat.values[i] - u_v[i];
    if (s == Sidedness::two_sided &&
        std::fabs(alpha_hat.values[i]) <= std::fabs(u_v[i]))
      a = 0.0;
    param.alpha_v[i] = a;
    const bool is_null = s == Sidedness::one_sided ? a <= 0.0 : a == 0.0;
    param.implied_null[i] = is_null;
    if (is_null) ++param.null_count;
  }
  return param;
}

// Pairwise duel count over the null coordinates: how many of them u1 wins
// against u2. One-sided compares signed values, two-sided compares
// magnitudes; ties count as wins for both players.
inline std::size_t dueling_count(std::span<const double> u1, std::span<const double> u2,
                                 std::span<const std::size_t> null_idx, Sidedness s) {
  if (u1.size() != u2.size())
    throw ValidationError("dueling_count: vectors differ in length");
  std::size_t wins = 0;
  for (std::size_t i : null_idx) {
    if (i >= u1.size()) throw ValidationError("dueling_count: null index out of range");
    const bool win = s == Sidedness::one_sided
                         ? u1[i] >= u2[i]
                         : std::fabs(u1[i]) >= std::fabs(u2[i]);
    if (win) ++wins;
  }
  return wins;
}

namespace detail {

// One inner bootstrap evaluation, preprocessed for repeated step-up calls:
// the shifted statistics' p-values sorted ascending, with a running count
// of implied nulls among the smallest k of them.
struct SortedShiftedPvals {
  std::vector<double> p;
  std::vector<std::uint32_t> null_prefix;  // null_prefix[k] = nulls among p[0..k)
};

inline SortedShiftedPvals shifted_pvalues(const SampledParameter& param,
                                          std::span<const double> u_w,
                                          const StudentT& t, Sidedness s) {
  const std::size_t n = param.alpha_v.size();
  std::vector<std::pair<double, bool>> entries(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double stat = param.alpha_v[i] + u_w[i];
    entries[i] = {p_value(stat, t, s), param.implied_null[i]};
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  SortedShiftedPvals out;
  out.p.resize(n);
  out.null_prefix.resize(n + 1);
  out.null_prefix[0] = 0;
  for (std::size_t k = 0; k < n; ++k) {
    out.p[k] = entries[k].first;
    out.null_prefix[k + 1] = out.null_prefix[k] + (entries[k].second ? 1u : 0u);
  }
  return out;
}

// False discovery proportion of the step-up rule with slope c on one
// preprocessed draw.
inline double fdp_at_slope(const SortedShiftedPvals& draw, double c) {
  const std::size_t n = draw.p.size();
  const auto threshold = step_up_threshold(draw.p, c);
  if (!threshold) return 0.0;
  const std::size_t r = static_cast<std::size_t>(
      std::upper_bound(draw.p.begin(), draw.p.end(), *threshold) - draw.p.begin());
  (void)n;
  return static_cast<double>(draw.null_prefix[r]) /
         static_cast<double>(std::max<std::size_t>(r, 1));
}

}  // namespace detail

// Monte Carlo FDR estimate for a candidate parameter and slope: average,
// over W fresh null draws, of the FDP the step-up rule at slope c_q incurs
// against the parameter's implied nulls.
inline double estimate_fdr(const SampledParameter& param, const NullSampleSet& pool,
                           double c_q, std::size_t inner_samples, double df,
                           Sidedness s, rng::Stream& stream) {
  if (pool.draw_count() == 0) throw ValidationError("estimate_fdr: empty null pool");
  if (!(c_q > 0.0 && c_q < 1.0))
    throw ValidationError("estimate_fdr: c_q must lie in (0, 1)");
  if (inner_samples == 0) throw ValidationError("estimate_fdr: W must be >= 1");
  if (pool.hypothesis_count() != param.alpha_v.size())
    throw ValidationError("estimate_fdr: pool width does not match hypotheses");

  const StudentT t(df);
  double acc = 0.0;
  for (std::size_t w = 0; w < inner_samples; ++w) {
    const auto row = pool.draws.row(stream.below(pool.draw_count()));
    acc += detail::fdp_at_slope(detail::shifted_pvalues(param, row, t, s), c_q);
  }
  return acc / static_cast<double>(inner_samples);
}

// Domain margin for the slope search: c_q is confined to (eps, 1 - eps).
inline constexpr double kSlopeEpsilon = 1e-6;

// S-step bisection for the largest feasible point of a predicate on
// (lo, hi), where feasibility is downward-closed. Returns the last feasible
// midpoint; if no midpoint was feasible, returns the final bracket's
// midpoint (the smallest point of the search grid), which is conservative
// for the callers here.
template <typename Feasible>
double bisect_max_feasible(double lo, double hi, std::size_t iterations, Feasible&& feasible) {
  if (!(lo < hi)) throw ValidationError("bisect_max_feasible: need lo < hi");
  if (iterations == 0) throw ValidationError("bisect_max_feasible: need iterations >= 1");
  bool found = false;
  for (std::size_t s = 0; s < iterations; ++s) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid)) {
      lo = mid;
      found = true;
    } else {
      hi = mid;
    }
  }
  return found ? lo : 0.5 * (lo + hi);
}

namespace detail {

// Slope search against a fixed block of inner draws. The draws are sampled
// once up front and reused across bisection iterations, which makes the
// searched function a fixed monotone step function.
inline double find_cq_over_rows(const SampledParameter& param, const NullSampleSet& pool,
                                std::span<const std::size_t> candidate_rows,
                                double target_level, std::size_t inner_samples,
                                std::size_t search_iterations, double df, Sidedness s,
                                rng::Stream& stream) {
  const StudentT t(df);
  std::vector<SortedShiftedPvals> draws;
  draws.reserve(inner_samples);
  for (std::size_t w = 0; w < inner_samples; ++w) {
    const std::size_t row = candidate_rows[stream.below(candidate_rows.size())];
    draws.push_back(shifted_pvalues(param, pool.draws.row(row), t, s));
  }
  const double inv_w = 1.0 / static_cast<double>(inner_samples);
  return bisect_max_feasible(
      kSlopeEpsilon, 1.0 - kSlopeEpsilon, search_iterations, [&](double c) {
        double acc = 0.0;
        for (const auto& draw : draws) acc += fdp_at_slope(draw, c);
        return acc * inv_w <= target_level;
      });
}

}  // namespace detail

// sup{c_q in (0,1) : estimated FDR(alpha_v, c_q) <= target_level}, located
// by bisection with a pre-drawn block of W inner draws reused across the S
// iterations.
inline double find_cq(const SampledParameter& param, const NullSampleSet& pool,
                      double target_level, std::size_t inner_samples,
                      std::size_t search_iterations, double df, Sidedness s,
                      rng::Stream& stream) {
  if (pool.draw_count() == 0) throw ValidationError("find_cq: empty null pool");
  if (!(target_level > 0.0 && target_level < 1.0))
    throw ValidationError("find_cq: target level must lie in (0, 1)");
  if (inner_samples == 0 || search_iterations == 0)
    throw ValidationError("find_cq: W and S must be >= 1");
  std::vector<std::size_t> rows(pool.draw_count());
  std::iota(rows.begin(), rows.end(), 0);
  return detail::find_cq_over_rows(param, pool, rows, target_level, inner_samples,
                                   search_iterations, df, s, stream);
}

// Dueling double bootstrap. V outer null draws produce candidate parameter
// vectors; each gets the largest slope whose estimated FDR stays within the
// inner target (q/2, or q for the aggressive variant); the final step-up
// uses the smallest of those slopes. Outer draws are taken without
// replacement and kept disjoint from the rows the inner estimates sample,
// so one pool row never plays both roles in a call. All randomness is
// derived from the seed per outer index, making the result independent of
// evaluation order.
inline TestDecision ddboot(const AlphaEstimates& alpha_hat, const NullSampleSet& pool,
                           const DdbootConfig& config, std::uint64_t seed) {
  config.validate();
  alpha_hat.validate();
  pool.validate();
  if (pool.hypothesis_count() != alpha_hat.size())
    throw ValidationError("ddboot: pool width does not match hypotheses");
  if (pool.draw_count() < config.outer_samples + config.inner_samples)
    throw ValidationError("ddboot: null pool needs at least V + W = " +
                          std::to_string(config.outer_samples + config.inner_samples) +
                          " rows, got " + std::to_string(pool.draw_count()));

  std::vector<std::size_t> rows(pool.draw_count());
  std::iota(rows.begin(), rows.end(), 0);
  rng::Stream setup(rng::derive_seed(seed, {0xD0}));
  setup.shuffle(rows.begin(), rows.end());
  const std::span<const std::size_t> outer_rows(rows.data(), config.outer_samples);
  const std::span<const std::size_t> inner_rows(rows.data() + config.outer_samples,
                                                rows.size() - config.outer_samples);

  const double target = config.aggressive ? config.q : 0.5 * config.q;
  double c_q = std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < config.outer_samples; ++v) {
    rng::Stream stream_v(rng::derive_seed(seed, {0xD1, v}));
    const SampledParameter param =
        sample_alpha_v(alpha_hat, pool.draws.row(outer_rows[v]), config.sidedness);
    c_q = std::min(c_q, detail::find_cq_over_rows(
                            param, pool, inner_rows, target, config.inner_samples,
                            config.search_iterations, alpha_hat.df, config.sidedness,
                            stream_v));
  }

  const PValueVector pvals = p_values(alpha_hat.values, alpha_hat.df, config.sidedness);
  return sup_threshold(pvals, c_q);
}

// Resampling-based step-up baseline: for each observed p-value as candidate
// threshold, count the null pool's rejections at that threshold, take the
// pointwise 1 - q/2 upper percentile of those counts over draws, and accept
// the largest candidate whose estimated FDR is within q/2.
inline TestDecision yb(const PValueVector& pvals, const NullSampleSet& pool, double q) {
  if (!(q > 0.0 && q < 1.0)) throw ValidationError("yb: q must lie in (0, 1)");
  pool.validate();
  const std::size_t n = pvals.size();
  if (pool.hypothesis_count() != n)
    throw ValidationError("yb: pool width does not match hypotheses");
  const std::size_t b = pool.draw_count();

  const StudentT t(pool.df);
  std::vector<std::vector<double>> null_p(b);
  for (std::size_t d = 0; d < b; ++d) {
    null_p[d].reserve(n);
    for (double u : pool.draws.row(d)) null_p[d].push_back(p_value(u, t, pvals.sidedness));
    std::sort(null_p[d].begin(), null_p[d].end());
  }

  std::vector<double> sorted(pvals.values);
  std::sort(sorted.begin(), sorted.end());

  const std::size_t perc_index =
      std::min(b - 1, static_cast<std::size_t>(
                          std::ceil((1.0 - 0.5 * q) * static_cast<double>(b))) -
                          1);

  std::optional<double> accepted;
  std::vector<double> counts(b);
  for (std::size_t k = 0; k < n; ++k) {
    const double candidate = sorted[k];
    if (k + 1 < n && sorted[k + 1] == candidate) continue;  // dedup ties
    for (std::size_t d = 0; d < b; ++d)
      counts[d] = static_cast<double>(
          std::upper_bound(null_p[d].begin(), null_p[d].end(), candidate) -
          null_p[d].begin());
    std::nth_element(counts.begin(), counts.begin() + perc_index, counts.end());
    const double r_star = counts[perc_index];
    const auto r_obs = static_cast<double>(
        std::upper_bound(sorted.begin(), sorted.end(), candidate) - sorted.begin());
    const double est = r_star / std::max(r_obs, 1.0);
    if (est <= 0.5 * q) accepted = candidate;
  }

  TestDecision decision;
  if (!accepted) return decision;
  decision.threshold_p = *accepted;
  for (std::size_t i = 0; i < n; ++i)
    if (pvals.values[i] <= *accepted) decision.rejected.push_back(i);
  return decision;
}

}  // namespace fdrboot
