#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fdrboot/errors.hpp"
#include "fdrboot/student_t.hpp"

namespace fdrboot {

enum class Sidedness { one_sided, two_sided };

inline std::string to_string(Sidedness s) {
  return s == Sidedness::one_sided ? "one-sided" : "two-sided";
}

// A vector of p-values together with the convention that produced them.
struct PValueVector {
  std::vector<double> values;
  Sidedness sidedness = Sidedness::two_sided;

  std::size_t size() const { return values.size(); }
};

// Ground-truth split of hypotheses into nulls and alternatives.
class HypothesisLabels {
 public:
  HypothesisLabels() = default;

  explicit HypothesisLabels(std::vector<bool> is_null) : is_null_(std::move(is_null)) {}

  // Labels induced by a true parameter vector: one-sided nulls are
  // alpha_i <= 0, two-sided nulls are alpha_i == 0.
  static HypothesisLabels from_truth(std::span<const double> alpha, Sidedness s) {
    std::vector<bool> mask(alpha.size());
    for (std::size_t i = 0; i < alpha.size(); ++i)
      mask[i] = s == Sidedness::one_sided ? alpha[i] <= 0.0 : alpha[i] == 0.0;
    return HypothesisLabels(std::move(mask));
  }

  std::size_t size() const { return is_null_.size(); }
  bool is_null(std::size_t i) const { return is_null_[i]; }

  std::size_t null_count() const {
    return static_cast<std::size_t>(std::count(is_null_.begin(), is_null_.end(), true));
  }

  std::vector<std::size_t> null_set() const { return collect(true); }
  std::vector<std::size_t> alt_set() const { return collect(false); }

 private:
  std::vector<std::size_t> collect(bool want) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < is_null_.size(); ++i)
      if (is_null_[i] == want) out.push_back(i);
    return out;
  }

  std::vector<bool> is_null_;
};

// Output of a multiple-testing procedure: the rejected indices (ascending)
// and the largest rejected p-value, absent when nothing is rejected.
struct TestDecision {
  std::vector<std::size_t> rejected;
  std::optional<double> threshold_p;

  std::size_t rejection_count() const { return rejected.size(); }
  double threshold_or_zero() const { return threshold_p.value_or(0.0); }
};

struct ContingencyCounts {
  std::size_t n_10 = 0;  // false positives
  std::size_t n_11 = 0;  // true positives
  std::size_t n_01 = 0;  // false negatives
  std::size_t n_00 = 0;  // true negatives

  std::size_t rejections() const { return n_10 + n_11; }
  std::size_t total() const { return n_10 + n_11 + n_01 + n_00; }
};

// Tail-area p-value of a t statistic. One-sided: mass above u. Two-sided:
// twice the mass above |u|.
inline double p_value(double u, double df, Sidedness s) {
  if (!std::isfinite(u)) throw ValidationError("p_value: non-finite statistic");
  const StudentT t(df);
  return s == Sidedness::one_sided ? t.upper_tail(u) : 2.0 * t.upper_tail(std::fabs(u));
}

inline double p_value(double u, const StudentT& t, Sidedness s) {
  if (!std::isfinite(u)) throw ValidationError("p_value: non-finite statistic");
  return s == Sidedness::one_sided ? t.upper_tail(u) : 2.0 * t.upper_tail(std::fabs(u));
}

inline PValueVector p_values(std::span<const double> stats, double df, Sidedness s) {
  const StudentT t(df);
  PValueVector out;
  out.sidedness = s;
  out.values.reserve(stats.size());
  for (double u : stats) out.values.push_back(p_value(u, t, s));
  return out;
}

// Empirical CDF of the p-values at x: fraction of entries <= x.
inline double ecdf_at(std::span<const double> pvals, double x) {
  if (pvals.empty()) throw ValidationError("ecdf_at: empty p-value vector");
  std::size_t count = 0;
  for (double p : pvals)
    if (p <= x) ++count;
  return static_cast<double>(count) / static_cast<double>(pvals.size());
}

inline double ecdf_at(const PValueVector& pvals, double x) {
  return ecdf_at(std::span<const double>(pvals.values), x);
}

namespace detail {

// Step-up evaluation of sup{p' : F-hat(p') >= p'/c} on p-values that are
// already sorted ascending. Returns the largest qualifying order statistic,
// or nullopt when no index qualifies. F-hat jumps only at observed
// p-values, so scanning order statistics evaluates the sup exactly.
inline std::optional<double> step_up_threshold(std::span<const double> sorted_pvals,
                                               double c) {
  const std::size_t n = sorted_pvals.size();
  for (std::size_t i = n; i >= 1; --i) {
    if (sorted_pvals[i - 1] <= c * static_cast<double>(i) / static_cast<double>(n))
      return sorted_pvals[i - 1];
    if (i == 1) break;
  }
  return std::nullopt;
}

}  // namespace detail

// Generic sup-threshold rule: reject every hypothesis whose p-value is at
// most the largest p_(i) with p_(i) <= c*i/N. Ties at the threshold reject
// together.
inline TestDecision sup_threshold(std::span<const double> pvals, double c) {
  if (!(c > 0.0)) throw ValidationError("sup_threshold: slope c must be positive");
  if (pvals.empty()) throw ValidationError("sup_threshold: empty p-value vector");

  std::vector<double> sorted(pvals.begin(), pvals.end());
  std::sort(sorted.begin(), sorted.end());
  const auto threshold = detail::step_up_threshold(sorted, c);

  TestDecision decision;
  if (!threshold) return decision;
  decision.threshold_p = *threshold;
  for (std::size_t i = 0; i < pvals.size(); ++i)
    if (pvals[i] <= *threshold) decision.rejected.push_back(i);
  return decision;
}

inline TestDecision sup_threshold(const PValueVector& pvals, double c) {
  return sup_threshold(std::span<const double>(pvals.values), c);
}

inline ContingencyCounts contingency(const TestDecision& decision,
                                     const HypothesisLabels& labels) {
  ContingencyCounts counts;
  for (std::size_t i : decision.rejected) {
    if (i >= labels.size())
      throw ValidationError("contingency: rejected index out of range");
    if (labels.is_null(i))
      ++counts.n_10;
    else
      ++counts.n_11;
  }
  const std::size_t n0 = labels.null_count();
  const std::size_t n1 = labels.size() - n0;
  counts.n_00 = n0 - counts.n_10;
  counts.n_01 = n1 - counts.n_11;
  return counts;
}

// False discovery proportion: false positives over all positives, with the
// max(R, 1) guard making the empty-rejection case 0.
inline double fdp(const ContingencyCounts& counts) {
  const std::size_t r = counts.rejections();
  return static_cast<double>(counts.n_10) / static_cast<double>(std::max<std::size_t>(r, 1));
}

}  // namespace fdrboot
