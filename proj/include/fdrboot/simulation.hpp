#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "fdrboot/classical.hpp"
#include "fdrboot/data.hpp"
#include "fdrboot/resampling.hpp"
#include "fdrboot/rng.hpp"
#include "fdrboot/testing.hpp"

namespace fdrboot {

inline constexpr double kDefaultSingleThreshold = 0.05;
inline constexpr double kDefaultStoreyReference = 0.5;
inline constexpr std::size_t kDefaultAdaptiveBootCount = 500;
inline constexpr std::size_t kDefaultOuterSamples = 20;   // V
inline constexpr std::size_t kDefaultInnerSamples = 500;  // W
inline constexpr std::size_t kDefaultSearchIterations = 20;

enum class Method : std::size_t {
  single,
  bh,
  by,
  bky,
  storey,
  storey_adaptive,
  yb,
  ddb,
  ddba,
};

inline const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = {
      Method::single, Method::bh,  Method::by,  Method::bky, Method::storey,
      Method::storey_adaptive, Method::yb, Method::ddb, Method::ddba};
  return methods;
}

inline std::string to_string(Method m) {
  switch (m) {
    case Method::single: return "single";
    case Method::bh: return "bh";
    case Method::by: return "by";
    case Method::bky: return "bky";
    case Method::storey: return "storey";
    case Method::storey_adaptive: return "storey-a";
    case Method::yb: return "yb";
    case Method::ddb: return "ddb";
    case Method::ddba: return "ddba";
  }
  throw ValidationError("unknown method");
}

inline Method method_from_string(const std::string& name) {
  for (Method m : all_methods())
    if (to_string(m) == name) return m;
  throw ValidationError("unknown method '" + name +
                        "' (expected one of single, bh, by, bky, storey, storey-a, "
                        "yb, ddb, ddba)");
}

// One synthetic-benchmark configuration: equicorrelated t statistics with
// the given null fraction and signal law.
struct ScenarioSpec {
  int id = 0;
  std::size_t n_hyp = 50;
  double df = 100.0;
  double rho = 0.0;
  double pi0 = 0.5;
  double signal_scale = 2.0;
  std::size_t pool_size = 2000;

  void validate() const {
    if (n_hyp == 0) throw ValidationError("scenario: need at least one hypothesis");
    if (!(rho >= 0.0 && rho < 1.0)) throw ValidationError("scenario: rho must lie in [0, 1)");
    if (!(pi0 >= 0.0 && pi0 <= 1.0)) throw ValidationError("scenario: pi0 must lie in [0, 1]");
    if (!(df >= 3.0)) throw ValidationError("scenario: df must be >= 3");
    if (pool_size == 0) throw ValidationError("scenario: pool_size must be >= 1");
  }
};

// The paper-style 3 x 3 grid: scenarios 1-3 have pi0 = 0.5, 4-6 have
// pi0 = 1.0, 7-9 have pi0 = 0.25, each sweeping rho through 0, 0.5, 0.9.
inline std::array<ScenarioSpec, 9> scenario_grid() {
  constexpr std::array<double, 3> rhos = {0.0, 0.5, 0.9};
  constexpr std::array<double, 3> pi0s = {0.5, 1.0, 0.25};
  std::array<ScenarioSpec, 9> grid;
  for (std::size_t block = 0; block < 3; ++block) {
    for (std::size_t r = 0; r < 3; ++r) {
      ScenarioSpec& s = grid[block * 3 + r];
      s.id = static_cast<int>(block * 3 + r + 1);
      s.rho = rhos[r];
      s.pi0 = pi0s[block];
    }
  }
  return grid;
}

// One joint draw of n equicorrelated t statistics: correlated normals via a
// shared common factor, divided by a chi-square scale shared across the
// whole vector.
inline std::vector<double> sample_mvt(std::size_t n, double rho, double df,
                                      rng::Stream& stream) {
  if (n == 0) throw ValidationError("sample_mvt: need n >= 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw ValidationError("sample_mvt: rho must lie in [0, 1)");
  if (!(df >= 3.0)) throw ValidationError("sample_mvt: df must be >= 3");

  const double shared = stream.normal();
  const double scale = std::sqrt(stream.chi_square(df) / df);
  const double w_shared = std::sqrt(rho);
  const double w_own = std::sqrt(1.0 - rho);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = (w_shared * shared + w_own * stream.normal()) / scale;
  return out;
}

// One synthetic data set: true means, observed statistics, ground-truth
// labels, and a fresh null pool.
struct SimInstance {
  std::vector<double> mu;
  AlphaEstimates alpha_hat;
  HypothesisLabels labels;
  NullSampleSet null_pool;
};

inline SimInstance make_instance(const ScenarioSpec& spec, rng::Stream& stream) {
  spec.validate();
  const std::size_t n = spec.n_hyp;
  const auto n_null = static_cast<std::size_t>(
      std::floor(spec.pi0 * static_cast<double>(n) + 0.5));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  stream.shuffle(order.begin(), order.end());

  SimInstance inst;
  inst.mu.assign(n, 0.0);
  for (std::size_t k = n_null; k < n; ++k)
    inst.mu[order[k]] = spec.signal_scale * stream.uniform_open();

  const std::vector<double> noise = sample_mvt(n, spec.rho, spec.df, stream);
  inst.alpha_hat.df = spec.df;
  inst.alpha_hat.values.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    inst.alpha_hat.values[i] = inst.mu[i] + noise[i];

  inst.labels = HypothesisLabels::from_truth(inst.mu, Sidedness::two_sided);

  inst.null_pool.df = spec.df;
  inst.null_pool.draws = Matrix(spec.pool_size, n);
  for (std::size_t b = 0; b < spec.pool_size; ++b) {
    const std::vector<double> draw = sample_mvt(n, spec.rho, spec.df, stream);
    for (std::size_t i = 0; i < n; ++i) inst.null_pool.draws(b, i) = draw[i];
  }
  return inst;
}

// Applies one procedure to an instance. Methods that consume randomness get
// a stream derived from (seed, method id), so the outcome of each method is
// unaffected by which other methods run alongside it.
inline TestDecision apply_method(Method m, const PValueVector& pvals,
                                 const SimInstance& inst, double q, std::uint64_t seed) {
  switch (m) {
    case Method::single:
      return single(pvals, kDefaultSingleThreshold);
    case Method::bh:
      return bh(pvals, q);
    case Method::by:
      return by(pvals, q);
    case Method::bky:
      return bky(pvals, q);
    case Method::storey:
      return storey(pvals, q, kDefaultStoreyReference);
    case Method::storey_adaptive: {
      rng::Stream stream(rng::derive_seed(seed, {0x5A, static_cast<std::uint64_t>(m)}));
      return storey_adaptive(pvals, q, kDefaultAdaptiveBootCount, stream);
    }
    case Method::yb:
      return yb(pvals, inst.null_pool, q);
    case Method::ddb:
    case Method::ddba: {
      DdbootConfig config;
      config.q = q;
      config.sidedness = pvals.sidedness;
      config.aggressive = m == Method::ddba;
      return ddboot(inst.alpha_hat, inst.null_pool, config,
                    rng::derive_seed(seed, {0x5A, static_cast<std::uint64_t>(m)}));
    }
  }
  throw ValidationError("unknown method");
}

struct MethodStats {
  Method method = Method::bh;
  double mean_threshold = 0.0;   // Thr-p, no-rejection runs contribute 0
  double mean_rejections = 0.0;
  double mean_fdr = 0.0;
  double fdr_two_sigma = 0.0;    // 2 * standard error; NaN when runs == 1
};

struct MonteCarloReport {
  ScenarioSpec scenario;
  std::size_t runs = 0;
  double q = 0.05;
  std::uint64_t seed = 0;
  std::vector<MethodStats> per_method;
};

// Paired Monte Carlo over independent instances: every method sees the same
// alpha-hat and null pool within a run. Runs are farmed out to workers by
// index with per-run derived seeds and aggregated in run order, so the
// report is byte-identical for any worker count.
inline MonteCarloReport run_monte_carlo(const ScenarioSpec& spec,
                                        const std::vector<Method>& methods,
                                        std::size_t runs, double q,
                                        std::uint64_t master_seed,
                                        unsigned workers = 1) {
  spec.validate();
  if (runs == 0) throw ValidationError("run_monte_carlo: need runs >= 1");
  if (methods.empty()) throw ValidationError("run_monte_carlo: no methods selected");
  if (!(q > 0.0 && q < 1.0)) throw ValidationError("run_monte_carlo: q must lie in (0, 1)");

  struct RunRecord {
    double threshold;
    double rejections;
    double fdp_value;
  };
  std::vector<std::vector<RunRecord>> records(runs);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= runs || failed.load()) break;
      try {
        rng::Stream instance_stream(rng::derive_seed(master_seed, {0x101, r}));
        const SimInstance inst = make_instance(spec, instance_stream);
        const PValueVector pvals =
            p_values(inst.alpha_hat.values, inst.alpha_hat.df, Sidedness::two_sided);
        const std::uint64_t run_seed = rng::derive_seed(master_seed, {0x102, r});

        std::vector<RunRecord> row;
        row.reserve(methods.size());
        for (Method m : methods) {
          const TestDecision decision = apply_method(m, pvals, inst, q, run_seed);
          const ContingencyCounts counts = contingency(decision, inst.labels);
          row.push_back({decision.threshold_or_zero(),
                         static_cast<double>(decision.rejection_count()), fdp(counts)});
        }
        records[r] = std::move(row);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        failed.store(true);
        if (failure.empty()) failure = e.what();
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
  if (failed.load()) throw NumericError("run_monte_carlo: " + failure);

  MonteCarloReport report;
  report.scenario = spec;
  report.runs = runs;
  report.q = q;
  report.seed = master_seed;
  report.per_method.reserve(methods.size());

  for (std::size_t m = 0; m < methods.size(); ++m) {
    MethodStats stats;
    stats.method = methods[m];
    for (std::size_t r = 0; r < runs; ++r) {
      stats.mean_threshold += records[r][m].threshold;
      stats.mean_rejections += records[r][m].rejections;
      stats.mean_fdr += records[r][m].fdp_value;
    }
    const double n = static_cast<double>(runs);
    stats.mean_threshold /= n;
    stats.mean_rejections /= n;
    stats.mean_fdr /= n;
    if (runs > 1) {
      double ss = 0.0;
      for (std::size_t r = 0; r < runs; ++r) {
        const double d = records[r][m].fdp_value - stats.mean_fdr;
        ss += d * d;
      }
      stats.fdr_two_sigma = 2.0 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    } else {
      stats.fdr_two_sigma = std::numeric_limits<double>::quiet_NaN();
    }
    report.per_method.push_back(stats);
  }
  return report;
}

}  // namespace fdrboot
