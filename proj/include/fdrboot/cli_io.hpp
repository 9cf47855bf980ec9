#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdrboot/csv.hpp"
#include "fdrboot/data.hpp"
#include "fdrboot/factor_model.hpp"
#include "fdrboot/simulation.hpp"

namespace fdrboot {

enum class Command { simulate, test, autocorr, bootstrap };
enum class ReportFormat { text, csv, json };

inline ReportFormat format_from_string(const std::string& name) {
  if (name == "text") return ReportFormat::text;
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  throw ValidationError("unknown format '" + name + "' (expected text, csv, or json)");
}

struct RunConfig {
  Command command = Command::simulate;
  std::string scenario = "1";  // "1".."9" or "all"
  std::size_t runs = 2000;
  double q = 0.05;
  std::vector<Method> methods;  // empty selects every method
  std::uint64_t seed = 1;
  unsigned workers = 1;
  Sidedness sidedness = Sidedness::two_sided;
  std::string alphas_path;
  std::string nulls_path;
  std::string returns_path;
  std::string factors_path;
  std::size_t bootstrap_draws = 10000;
  std::size_t max_lag = 20;
  double df_override = std::numeric_limits<double>::quiet_NaN();
  std::string output_path;      // empty writes to stdout
  std::string cdf_output_path;  // optional extra artifact of `test`
  ReportFormat format = ReportFormat::text;
};

// Loads a t-value file: a header row, one numeric column of statistics, and
// optionally a constant `df` column. Without a df column the fallback
// (typically a --df flag) must supply the degrees of freedom.
inline AlphaEstimates load_tvalues(const std::string& path, double fallback_df) {
  const csv::Table table = csv::read_table(path);

  std::optional<std::size_t> df_col;
  std::optional<std::size_t> value_col;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (table.header[c] == "df") {
      if (df_col) throw ValidationError(path + ": multiple df columns");
      df_col = c;
    } else {
      if (value_col)
        throw ValidationError(path + ": expected exactly one t-value column, found '" +
                              table.header[*value_col] + "' and '" + table.header[c] + "'");
      value_col = c;
    }
  }
  if (!value_col) throw ValidationError(path + ": no t-value column");

  AlphaEstimates alphas;
  if (df_col) {
    alphas.df = table.rows.front()[*df_col];
    for (std::size_t r = 1; r < table.rows.size(); ++r)
      if (table.rows[r][*df_col] != alphas.df)
        throw ValidationError(path + ": df column must be constant (line " +
                              std::to_string(r + 2) + " differs)");
  } else {
    if (!std::isfinite(fallback_df))
      throw ValidationError(path + ": no df column; pass --df to supply the degrees of freedom");
    alphas.df = fallback_df;
  }

  alphas.values.reserve(table.rows.size());
  for (const auto& row : table.rows) alphas.values.push_back(row[*value_col]);
  alphas.validate();
  return alphas;
}

// Loads a null-sample file: rows are draws, columns are hypotheses. When
// expected_cols is nonzero the width must match the companion t-value file.
inline NullSampleSet load_nulls(const std::string& path, double df,
                                std::size_t expected_cols = 0) {
  const csv::Table table = csv::read_table(path);
  if (expected_cols != 0 && table.column_count() != expected_cols)
    throw ValidationError(path + ": " + std::to_string(table.column_count()) +
                          " columns do not match the " + std::to_string(expected_cols) +
                          " hypotheses of the t-value file");
  NullSampleSet nulls;
  nulls.df = df;
  nulls.draws = Matrix::from_rows(table.rows);
  nulls.validate();
  return nulls;
}

inline void write_null_samples_csv(const std::string& path, const NullSampleSet& nulls,
                                   const std::vector<std::string>& column_names) {
  csv::write_matrix_csv(path, nulls.draws, column_names);
}

namespace detail {

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

inline std::string render_reports_text(const std::vector<MonteCarloReport>& reports) {
  std::ostringstream out;
  for (const MonteCarloReport& rep : reports) {
    out << "Scenario " << rep.scenario.id << ": rho=" << fmt("%.1f", rep.scenario.rho)
        << ", pi0=" << fmt("%.2f", rep.scenario.pi0) << " (N=" << rep.scenario.n_hyp
        << ", df=" << fmt("%.0f", rep.scenario.df) << ", q=" << fmt("%.3g", rep.q)
        << ", runs=" << rep.runs << ", seed=" << rep.seed << ")\n";
    auto row = [&](const std::string& label, auto value_of) {
      out << label;
      for (std::size_t pad = label.size(); pad < 10; ++pad) out << ' ';
      for (const MethodStats& s : rep.per_method) {
        const std::string cell = value_of(s);
        out << cell;
        for (std::size_t pad = cell.size(); pad < 10; ++pad) out << ' ';
      }
      out << '\n';
    };
    row("", [](const MethodStats& s) { return to_string(s.method); });
    row("Thr-p", [&](const MethodStats& s) { return fmt("%.4f", s.mean_threshold); });
    row("# of Rej", [&](const MethodStats& s) { return fmt("%.2f", s.mean_rejections); });
    row("FDR", [&](const MethodStats& s) { return fmt("%.4f", s.mean_fdr); });
    row("+/-", [&](const MethodStats& s) {
      return std::isnan(s.fdr_two_sigma) ? std::string("n/a") : fmt("%.4f", s.fdr_two_sigma);
    });
    out << '\n';
  }
  return out.str();
}

inline std::string render_reports_csv(const std::vector<MonteCarloReport>& reports) {
  std::ostringstream out;
  out << "scenario,rho,pi0,n_hyp,df,runs,q,seed,method,thr_p,rejections,fdr,fdr_two_sigma\n";
  for (const MonteCarloReport& rep : reports) {
    for (const MethodStats& s : rep.per_method) {
      out << rep.scenario.id << ',' << fmt("%.6g", rep.scenario.rho) << ','
          << fmt("%.6g", rep.scenario.pi0) << ',' << rep.scenario.n_hyp << ','
          << fmt("%.6g", rep.scenario.df) << ',' << rep.runs << ',' << fmt("%.6g", rep.q)
          << ',' << rep.seed << ',' << to_string(s.method) << ','
          << fmt("%.6g", s.mean_threshold) << ',' << fmt("%.6g", s.mean_rejections) << ','
          << fmt("%.6g", s.mean_fdr) << ','
          << (std::isnan(s.fdr_two_sigma) ? std::string() : fmt("%.6g", s.fdr_two_sigma))
          << '\n';
    }
  }
  return out.str();
}

inline std::string render_reports_json(const std::vector<MonteCarloReport>& reports) {
  nlohmann::ordered_json root;
  root["command"] = "simulate";
  nlohmann::ordered_json scenarios = nlohmann::ordered_json::array();
  for (const MonteCarloReport& rep : reports) {
    nlohmann::ordered_json sc;
    sc["id"] = rep.scenario.id;
    sc["rho"] = rep.scenario.rho;
    sc["pi0"] = rep.scenario.pi0;
    sc["n_hyp"] = rep.scenario.n_hyp;
    sc["df"] = rep.scenario.df;
    sc["pool_size"] = rep.scenario.pool_size;
    sc["runs"] = rep.runs;
    sc["q"] = rep.q;
    sc["seed"] = rep.seed;
    nlohmann::ordered_json methods = nlohmann::ordered_json::array();
    for (const MethodStats& s : rep.per_method) {
      nlohmann::ordered_json m;
      m["method"] = to_string(s.method);
      m["thr_p"] = s.mean_threshold;
      m["rejections"] = s.mean_rejections;
      m["fdr"] = s.mean_fdr;
      if (std::isnan(s.fdr_two_sigma))
        m["fdr_two_sigma"] = nullptr;
      else
        m["fdr_two_sigma"] = s.fdr_two_sigma;
      methods.push_back(std::move(m));
    }
    sc["methods"] = std::move(methods);
    scenarios.push_back(std::move(sc));
  }
  root["scenarios"] = std::move(scenarios);
  return root.dump(2) + "\n";
}

struct MethodDecision {
  Method method;
  TestDecision decision;
};

inline std::string render_decisions_text(const std::vector<MethodDecision>& decisions,
                                         double q, std::size_t n) {
  std::ostringstream out;
  out << "Multiple testing over " << n << " hypotheses (q=" << fmt("%.3g", q) << ")\n";
  for (const MethodDecision& d : decisions) {
    out << to_string(d.method);
    for (std::size_t pad = to_string(d.method).size(); pad < 10; ++pad) out << ' ';
    out << "rejected=" << d.decision.rejection_count();
    if (d.decision.threshold_p)
      out << "  thr-p=" << fmt("%.6g", *d.decision.threshold_p);
    else
      out << "  thr-p=n/a";
    if (!d.decision.rejected.empty()) {
      out << "  indices=";
      for (std::size_t k = 0; k < d.decision.rejected.size(); ++k)
        out << (k ? " " : "") << d.decision.rejected[k] + 1;
    }
    out << '\n';
  }
  return out.str();
}

inline std::string render_decisions_csv(const std::vector<MethodDecision>& decisions) {
  std::ostringstream out;
  out << "method,threshold_p,n_rejected,rejected\n";
  for (const MethodDecision& d : decisions) {
    out << to_string(d.method) << ',';
    if (d.decision.threshold_p) out << csv::format_cell(*d.decision.threshold_p);
    out << ',' << d.decision.rejection_count() << ',';
    for (std::size_t k = 0; k < d.decision.rejected.size(); ++k)
      out << (k ? ";" : "") << d.decision.rejected[k] + 1;
    out << '\n';
  }
  return out.str();
}

inline std::string render_decisions_json(const std::vector<MethodDecision>& decisions,
                                         double q, std::size_t n) {
  nlohmann::ordered_json root;
  root["command"] = "test";
  root["q"] = q;
  root["n_hypotheses"] = n;
  nlohmann::ordered_json results = nlohmann::ordered_json::array();
  for (const MethodDecision& d : decisions) {
    nlohmann::ordered_json item;
    item["method"] = to_string(d.method);
    if (d.decision.threshold_p)
      item["threshold_p"] = *d.decision.threshold_p;
    else
      item["threshold_p"] = nullptr;
    item["n_rejected"] = d.decision.rejection_count();
    nlohmann::ordered_json idx = nlohmann::ordered_json::array();
    for (std::size_t i : d.decision.rejected) idx.push_back(i + 1);
    item["rejected"] = std::move(idx);
    results.push_back(std::move(item));
  }
  root["results"] = std::move(results);
  return root.dump(2) + "\n";
}

inline std::string render_lags_text(const std::vector<double>& lags) {
  std::ostringstream out;
  out << "lag       autocorr\n";
  for (std::size_t l = 0; l < lags.size(); ++l) {
    const std::string lag = std::to_string(l + 1);
    out << lag;
    for (std::size_t pad = lag.size(); pad < 10; ++pad) out << ' ';
    out << fmt("%.6f", lags[l]) << '\n';
  }
  return out.str();
}

inline std::string render_lags_csv(const std::vector<double>& lags) {
  std::ostringstream out;
  out << "lag,autocorrelation\n";
  for (std::size_t l = 0; l < lags.size(); ++l)
    out << l + 1 << ',' << csv::format_cell(lags[l]) << '\n';
  return out.str();
}

inline std::string render_lags_json(const std::vector<double>& lags) {
  nlohmann::ordered_json root;
  root["command"] = "autocorr";
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < lags.size(); ++l) {
    nlohmann::ordered_json item;
    item["lag"] = l + 1;
    item["autocorrelation"] = lags[l];
    rows.push_back(std::move(item));
  }
  root["lags"] = std::move(rows);
  return root.dump(2) + "\n";
}

// Plot-ready empirical CDF curves of the observed statistics and the pooled
// null draws, in long format (series, x, cdf).
inline std::string render_cdf_csv(const AlphaEstimates& alphas, const NullSampleSet& nulls) {
  std::ostringstream out;
  out << "series,x,cdf\n";
  auto emit_series = [&](const char* name, std::vector<double> values) {
    std::sort(values.begin(), values.end());
    for (std::size_t k = 0; k < values.size(); ++k)
      out << name << ',' << csv::format_cell(values[k]) << ','
          << csv::format_cell(static_cast<double>(k + 1) / static_cast<double>(values.size()))
          << '\n';
  };
  emit_series("alpha", alphas.values);
  emit_series("null", nulls.draws.data());
  return out.str();
}

}  // namespace detail

// Applies one procedure to loaded data (the `test` command's work unit).
inline TestDecision apply_method_to_data(Method m, const PValueVector& pvals,
                                         const AlphaEstimates& alphas,
                                         const NullSampleSet& nulls, double q,
                                         std::uint64_t seed) {
  SimInstance shim;
  shim.alpha_hat = alphas;
  shim.null_pool = nulls;
  return apply_method(m, pvals, shim, q, seed);
}

// Executes one CLI invocation. Artifacts go to the configured output path
// (written atomically) or to `out` when no path is set. Throws
// ValidationError for bad inputs and NumericError for degenerate
// computations; main() maps these to exit codes 2 and 3.
inline int run_cli(const RunConfig& config, std::ostream& out = std::cout,
                   std::ostream& diag = std::cerr) {
  if (!(config.q > 0.0 && config.q < 1.0))
    throw ValidationError("q must lie in (0, 1)");
  if (config.workers == 0) throw ValidationError("worker count must be >= 1");

  const std::vector<Method> methods =
      config.methods.empty() ? all_methods() : config.methods;

  auto emit = [&](const std::string& contents) {
    if (config.output_path.empty())
      out << contents;
    else
      csv::write_file_atomic(config.output_path, contents);
  };

  switch (config.command) {
    case Command::simulate: {
      if (config.runs == 0) throw ValidationError("simulate: runs must be >= 1");
      std::vector<ScenarioSpec> selected;
      const auto grid = scenario_grid();
      if (config.scenario == "all") {
        selected.assign(grid.begin(), grid.end());
      } else if (config.scenario.size() == 1 && config.scenario[0] >= '1' &&
                 config.scenario[0] <= '9') {
        selected.push_back(grid[static_cast<std::size_t>(config.scenario[0] - '1')]);
      } else {
        throw ValidationError("simulate: scenario must be 1..9 or 'all', got '" +
                              config.scenario + "'");
      }

      std::vector<MonteCarloReport> reports;
      reports.reserve(selected.size());
      for (const ScenarioSpec& spec : selected)
        reports.push_back(run_monte_carlo(spec, methods, config.runs, config.q,
                                          config.seed, config.workers));

      switch (config.format) {
        case ReportFormat::text: emit(detail::render_reports_text(reports)); break;
        case ReportFormat::csv: emit(detail::render_reports_csv(reports)); break;
        case ReportFormat::json: emit(detail::render_reports_json(reports)); break;
      }
      return 0;
    }

    case Command::test: {
      if (config.alphas_path.empty() || config.nulls_path.empty())
        throw ValidationError("test: both -a (t-values) and -x (null samples) are required");
      const AlphaEstimates alphas = load_tvalues(config.alphas_path, config.df_override);
      const NullSampleSet nulls =
          load_nulls(config.nulls_path, alphas.df, alphas.size());
      const PValueVector pvals = p_values(alphas.values, alphas.df, config.sidedness);

      std::vector<detail::MethodDecision> decisions;
      decisions.reserve(methods.size());
      for (Method m : methods)
        decisions.push_back(
            {m, apply_method_to_data(m, pvals, alphas, nulls, config.q, config.seed)});

      if (!config.cdf_output_path.empty())
        csv::write_file_atomic(config.cdf_output_path,
                               detail::render_cdf_csv(alphas, nulls));

      switch (config.format) {
        case ReportFormat::text:
          emit(detail::render_decisions_text(decisions, config.q, alphas.size()));
          break;
        case ReportFormat::csv: emit(detail::render_decisions_csv(decisions)); break;
        case ReportFormat::json:
          emit(detail::render_decisions_json(decisions, config.q, alphas.size()));
          break;
      }
      return 0;
    }

    case Command::autocorr: {
      if (config.returns_path.empty())
        throw ValidationError("autocorr: a returns CSV is required (--returns)");
      if (config.max_lag == 0) throw ValidationError("autocorr: max lag must be >= 1");
      const csv::Table table = csv::read_table(config.returns_path);
      const std::size_t t = table.row_count();
      const std::size_t n = table.column_count();
      if (t <= config.max_lag + 1)
        throw ValidationError("autocorr: need more than max_lag + 1 = " +
                              std::to_string(config.max_lag + 1) + " rows, got " +
                              std::to_string(t));

      std::vector<double> averaged(config.max_lag, 0.0);
      std::vector<double> series(t);
      for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t r = 0; r < t; ++r) series[r] = table.rows[r][c];
        const std::vector<double> lags = autocorrelation(series, config.max_lag);
        for (std::size_t l = 0; l < lags.size(); ++l) averaged[l] += lags[l];
      }
      for (double& v : averaged) v /= static_cast<double>(n);

      switch (config.format) {
        case ReportFormat::text: emit(detail::render_lags_text(averaged)); break;
        case ReportFormat::csv: emit(detail::render_lags_csv(averaged)); break;
        case ReportFormat::json: emit(detail::render_lags_json(averaged)); break;
      }
      return 0;
    }

    case Command::bootstrap: {
      if (config.returns_path.empty() || config.factors_path.empty())
        throw ValidationError("bootstrap: both --returns and --factors CSVs are required");
      if (config.bootstrap_draws == 0)
        throw ValidationError("bootstrap: draw count must be >= 1");
      const csv::Table returns_table = csv::read_table(config.returns_path);
      const csv::Table factors_table = csv::read_table(config.factors_path);
      if (returns_table.row_count() != factors_table.row_count())
        throw ValidationError("bootstrap: returns and factors disagree on the number of rows");

      const FactorPanel panel =
          demean_factors(Matrix::from_rows(factors_table.rows));

      // Returns arrive as rows = time, columns = portfolios; transpose.
      ReturnPanel returns;
      returns.values = Matrix(returns_table.column_count(), returns_table.row_count());
      for (std::size_t r = 0; r < returns_table.row_count(); ++r)
        for (std::size_t c = 0; c < returns_table.column_count(); ++c)
          returns.values(c, r) = returns_table.rows[r][c];

      const ResidualSet residuals = compute_residuals(panel, returns);
      const BootstrapResult boot =
          residual_bootstrap(residuals.residuals, residuals.sigma_hats,
                             config.bootstrap_draws, panel.residual_df(), config.seed,
                             config.workers);
      diag << "bootstrap: " << boot.samples.draw_count() << " draws x "
           << boot.samples.hypothesis_count() << " hypotheses, df="
           << panel.residual_df() << ", redraws=" << boot.redraw_count << "\n";
      emit(csv::matrix_to_csv(boot.samples.draws, returns_table.header));
      return 0;
    }
  }
  throw ValidationError("unknown command");
}

}  // namespace fdrboot
