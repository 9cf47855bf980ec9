// Command-line front end: `simulate` runs the synthetic Monte Carlo
// benchmark, `test` applies the procedures to a t-value file against a
// null-sample file, `autocorr` reports lag correlations of a returns file,
// and `bootstrap` turns returns + factors into a null-sample file.

#include <CLI11.hpp>
#include <exception>
#include <iostream>
#include <string>

#include "fdrboot/cli_io.hpp"

namespace {

void add_common_flags(CLI::App* cmd, fdrboot::RunConfig& config, std::string& format,
                      std::string& methods) {
  cmd->add_option("--q", config.q, "target FDR level in (0, 1)")
      ->capture_default_str();
  cmd->add_option("--seed", config.seed, "master seed; fixes every random choice")
      ->capture_default_str();
  cmd->add_option("-o,--output", config.output_path,
                  "output file (written atomically); stdout when omitted");
  cmd->add_option("--format", format, "output format: text, csv, or json")
      ->capture_default_str();
  cmd->add_option("--method", methods,
                  "comma-separated subset of single,bh,by,bky,storey,storey-a,yb,ddb,ddba");
  cmd->add_flag_callback(
      "--one-sided",
      [&config] { config.sidedness = fdrboot::Sidedness::one_sided; },
      "one-sided testing (default is two-sided)");
}

std::vector<fdrboot::Method> parse_methods(const std::string& list) {
  std::vector<fdrboot::Method> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = list.find(',', start);
    const std::string name =
        list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!name.empty()) out.push_back(fdrboot::method_from_string(name));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"False-discovery-rate control under correlated hypotheses"};
  app.require_subcommand(1);

  fdrboot::RunConfig config;
  std::string format = "text";
  std::string methods;

  CLI::App* simulate = app.add_subcommand("simulate", "run the synthetic benchmark");
  simulate->add_option("-s,--scenario", config.scenario, "scenario 1..9 or 'all'")
      ->capture_default_str();
  simulate->add_option("-r,--runs", config.runs, "Monte Carlo runs per scenario")
      ->capture_default_str();
  simulate->add_option("-c,--workers", config.workers, "parallel workers")
      ->capture_default_str();
  add_common_flags(simulate, config, format, methods);

  CLI::App* test = app.add_subcommand("test", "test a t-value file against a null-sample file");
  test->add_option("-a,--alphas", config.alphas_path, "CSV of t-values (one column, optional df column)")
      ->required();
  test->add_option("-x,--nulls", config.nulls_path, "CSV of null samples (rows=draws, cols=hypotheses)")
      ->required();
  test->add_option("--df", config.df_override, "degrees of freedom when the t-value file has no df column");
  test->add_option("--cdf-out", config.cdf_output_path,
                   "also write plot-ready CDF curves of statistics vs null draws to this CSV");
  add_common_flags(test, config, format, methods);

  CLI::App* autocorr = app.add_subcommand("autocorr", "lag correlations of a returns file");
  autocorr->add_option("--returns", config.returns_path, "CSV of returns (rows=time, cols=series)")
      ->required();
  autocorr->add_option("--max-lag", config.max_lag, "largest lag to report")
      ->capture_default_str();
  add_common_flags(autocorr, config, format, methods);

  CLI::App* bootstrap = app.add_subcommand("bootstrap", "residual-bootstrap null samples from returns and factors");
  bootstrap->add_option("--returns", config.returns_path, "CSV of returns (rows=time, cols=portfolios)")
      ->required();
  bootstrap->add_option("--factors", config.factors_path, "CSV of factor returns (rows=time, cols=factors)")
      ->required();
  bootstrap->add_option("-B,--draws", config.bootstrap_draws, "number of bootstrap draws")
      ->capture_default_str();
  bootstrap->add_option("-c,--workers", config.workers, "parallel workers")
      ->capture_default_str();
  add_common_flags(bootstrap, config, format, methods);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are validation failures
  }

  if (simulate->parsed()) config.command = fdrboot::Command::simulate;
  if (test->parsed()) config.command = fdrboot::Command::test;
  if (autocorr->parsed()) config.command = fdrboot::Command::autocorr;
  if (bootstrap->parsed()) config.command = fdrboot::Command::bootstrap;

  try {
    config.format = fdrboot::format_from_string(format);
    config.methods = parse_methods(methods);
    return fdrboot::run_cli(config);
  } catch (const fdrboot::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fdrboot::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
