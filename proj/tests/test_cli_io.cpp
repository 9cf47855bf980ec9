#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fdrboot/cli_io.hpp"
#include "fdrboot/rng.hpp"

using namespace fdrboot;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  return (fs::path(::testing::TempDir()) / name).string();
}

void write_text(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::trunc);
  out << contents;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Complete-null fixture in the published schema: a t-value column drawn
// from the same i.i.d. t law the null file is drawn from.
void write_null_fixture(const std::string& alphas_path, const std::string& nulls_path,
                        std::size_t n, std::size_t draws, double df,
                        std::uint64_t seed) {
  rng::Stream stream(seed);
  auto t_draw = [&] { return stream.normal() / std::sqrt(stream.chi_square(df) / df); };

  std::ostringstream alphas;
  alphas << "tvalue,df\n";
  for (std::size_t i = 0; i < n; ++i)
    alphas << csv::format_cell(t_draw()) << ',' << df << '\n';
  write_text(alphas_path, alphas.str());

  std::ostringstream nulls;
  for (std::size_t i = 0; i < n; ++i) nulls << (i ? "," : "") << "h" << i + 1;
  nulls << '\n';
  for (std::size_t b = 0; b < draws; ++b) {
    for (std::size_t i = 0; i < n; ++i)
      nulls << (i ? "," : "") << csv::format_cell(t_draw());
    nulls << '\n';
  }
  write_text(nulls_path, nulls.str());
}

}  // namespace

TEST(LoadTvalues, ReadsPublishedFactorValues) {
  const std::string path = temp_path("tv1.csv");
  write_text(path, "tvalue\n2.838\n2.150\n0.771\n");
  const AlphaEstimates alphas = load_tvalues(path, 242.0);
  ASSERT_EQ(alphas.size(), 3u);
  EXPECT_DOUBLE_EQ(alphas.values[0], 2.838);
  EXPECT_DOUBLE_EQ(alphas.values[1], 2.150);
  EXPECT_DOUBLE_EQ(alphas.values[2], 0.771);
  EXPECT_DOUBLE_EQ(alphas.df, 242.0);
}

TEST(LoadTvalues, DfColumnWinsOverTheFallback) {
  const std::string path = temp_path("tv2.csv");
  write_text(path, "tvalue,df\n1.5,96\n-0.3,96\n");
  const AlphaEstimates alphas = load_tvalues(path, 10.0);
  EXPECT_DOUBLE_EQ(alphas.df, 96.0);
}

TEST(LoadTvalues, ErrorsAreSpecific) {
  const std::string empty = temp_path("tv_empty.csv");
  write_text(empty, "tvalue\n");
  EXPECT_THROW(load_tvalues(empty, 50.0), ValidationError);

  const std::string bad_cell = temp_path("tv_bad.csv");
  write_text(bad_cell, "tvalue\n1.0\noops\n");
  try {
    load_tvalues(bad_cell, 50.0);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("oops"), std::string::npos);
  }

  const std::string nan_cell = temp_path("tv_nan.csv");
  write_text(nan_cell, "tvalue\nnan\n");
  EXPECT_THROW(load_tvalues(nan_cell, 50.0), ValidationError);

  const std::string no_df = temp_path("tv_nodf.csv");
  write_text(no_df, "tvalue\n1.0\n");
  EXPECT_THROW(load_tvalues(no_df, std::numeric_limits<double>::quiet_NaN()),
               ValidationError);

  const std::string two_cols = temp_path("tv_two.csv");
  write_text(two_cols, "a,b\n1.0,2.0\n");
  EXPECT_THROW(load_tvalues(two_cols, 50.0), ValidationError);

  const std::string varying_df = temp_path("tv_vdf.csv");
  write_text(varying_df, "tvalue,df\n1.0,96\n2.0,97\n");
  EXPECT_THROW(load_tvalues(varying_df, 50.0), ValidationError);
}

TEST(LoadNulls, ShapeAndMismatchChecks) {
  const std::string path = temp_path("nulls1.csv");
  write_text(path, "a,b,c\n0.1,0.2,0.3\n-0.4,0.5,-0.6\n");
  const NullSampleSet nulls = load_nulls(path, 96.0);
  EXPECT_EQ(nulls.draw_count(), 2u);
  EXPECT_EQ(nulls.hypothesis_count(), 3u);
  EXPECT_DOUBLE_EQ(nulls.draws(1, 2), -0.6);

  EXPECT_THROW(load_nulls(path, 96.0, 2), ValidationError);  // width mismatch

  const std::string ragged = temp_path("nulls_ragged.csv");
  write_text(ragged, "a,b\n0.1,0.2\n0.3\n");
  try {
    load_nulls(ragged, 96.0);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(NullSampleCsv, RoundTripIsExact) {
  rng::Stream stream(2025);
  NullSampleSet nulls;
  nulls.df = 96.0;
  nulls.draws = Matrix(40, 7);
  for (std::size_t b = 0; b < 40; ++b)
    for (std::size_t i = 0; i < 7; ++i)
      nulls.draws(b, i) = std::exp(40.0 * (stream.uniform() - 0.5)) *
                          (stream.uniform() < 0.5 ? -1.0 : 1.0) * stream.normal();

  const std::string path = temp_path("roundtrip.csv");
  write_null_samples_csv(path, nulls, {"a", "b", "c", "d", "e", "f", "g"});
  const NullSampleSet reloaded = load_nulls(path, 96.0);
  EXPECT_EQ(reloaded.draws, nulls.draws);
}

TEST(RunCli, SimulateIsByteDeterministicAcrossWorkerCounts) {
  RunConfig config;
  config.command = Command::simulate;
  config.scenario = "2";
  config.runs = 6;
  config.seed = 7;
  config.methods = {Method::bh, Method::storey, Method::bky};
  config.format = ReportFormat::csv;

  for (ReportFormat format :
       {ReportFormat::text, ReportFormat::csv, ReportFormat::json}) {
    config.format = format;
    std::string outputs[3];
    for (unsigned workers : {1u, 2u, 3u}) {
      config.workers = workers;
      config.output_path = temp_path("sim_w" + std::to_string(workers) + ".out");
      EXPECT_EQ(run_cli(config), 0);
      outputs[workers - 1] = read_text(config.output_path);
    }
    EXPECT_EQ(outputs[0], outputs[1]);
    EXPECT_EQ(outputs[0], outputs[2]);
    EXPECT_FALSE(outputs[0].empty());
  }
}

TEST(RunCli, SimulateRepeatedInvocationIsIdentical) {
  RunConfig config;
  config.command = Command::simulate;
  config.scenario = "1";
  config.runs = 5;
  config.seed = 42;
  config.methods = {Method::bh, Method::by};
  config.format = ReportFormat::text;
  config.output_path = temp_path("sim_a.out");
  ASSERT_EQ(run_cli(config), 0);
  const std::string first = read_text(config.output_path);
  config.output_path = temp_path("sim_b.out");
  ASSERT_EQ(run_cli(config), 0);
  EXPECT_EQ(first, read_text(config.output_path));
}

TEST(RunCli, SimulateAllCoversTheNineScenarioGrid) {
  RunConfig config;
  config.command = Command::simulate;
  config.scenario = "all";
  config.runs = 2;
  config.seed = 1;
  config.methods = {Method::bh};
  config.format = ReportFormat::text;
  config.output_path = temp_path("sim_all.txt");
  ASSERT_EQ(run_cli(config), 0);
  const std::string text = read_text(config.output_path);
  for (int id = 1; id <= 9; ++id)
    EXPECT_NE(text.find("Scenario " + std::to_string(id) + ":"), std::string::npos)
        << "missing scenario " << id;

  config.format = ReportFormat::csv;
  config.output_path = temp_path("sim_all.csv");
  ASSERT_EQ(run_cli(config), 0);
  const std::string csv_text = read_text(config.output_path);
  EXPECT_EQ(std::count(csv_text.begin(), csv_text.end(), '\n'), 10);  // header + 9 rows
}

TEST(RunCli, SimulateValidation) {
  RunConfig config;
  config.command = Command::simulate;
  config.scenario = "12";
  EXPECT_THROW(run_cli(config), ValidationError);
  config.scenario = "x";
  EXPECT_THROW(run_cli(config), ValidationError);
  config.scenario = "1";
  config.q = 1.5;
  EXPECT_THROW(run_cli(config), ValidationError);
  config.q = 0.05;
  config.runs = 0;
  EXPECT_THROW(run_cli(config), ValidationError);
}

TEST(RunCli, TestCommandOnACompleteNullFixture) {
  const std::string alphas_path = temp_path("fixture_alphas.csv");
  const std::string nulls_path = temp_path("fixture_nulls.csv");
  write_null_fixture(alphas_path, nulls_path, 12, 600, 96.0, 20240501);

  RunConfig config;
  config.command = Command::test;
  config.alphas_path = alphas_path;
  config.nulls_path = nulls_path;
  config.methods = {Method::single, Method::bh, Method::storey, Method::ddb,
                    Method::ddba};
  config.seed = 9;
  config.format = ReportFormat::json;
  config.output_path = temp_path("test_out.json");
  config.cdf_output_path = temp_path("test_cdf.csv");
  ASSERT_EQ(run_cli(config), 0);

  const nlohmann::json doc = nlohmann::json::parse(read_text(config.output_path));
  ASSERT_EQ(doc.at("results").size(), 5u);
  for (const auto& item : doc.at("results")) {
    if (item.at("method") == "ddb") {
      // statistics drawn from the null pool's own law: nothing to find
      EXPECT_LE(item.at("n_rejected").get<std::size_t>(), 1u);
    }
  }

  const std::string cdf = read_text(config.cdf_output_path);
  EXPECT_NE(cdf.find("series,x,cdf"), std::string::npos);
  // one row per alpha plus one per pooled null draw entry
  const std::size_t rows = std::count(cdf.begin(), cdf.end(), '\n');
  EXPECT_EQ(rows, 1u + 12u + 600u * 12u);
}

TEST(RunCli, TestCommandChecksColumnCounts) {
  const std::string alphas_path = temp_path("mismatch_alphas.csv");
  const std::string nulls_path = temp_path("mismatch_nulls.csv");
  write_text(alphas_path, "tvalue,df\n1.0,96\n2.0,96\n3.0,96\n");
  write_text(nulls_path, "a,b\n0.1,0.2\n0.3,0.4\n");

  RunConfig config;
  config.command = Command::test;
  config.alphas_path = alphas_path;
  config.nulls_path = nulls_path;
  config.methods = {Method::bh};
  EXPECT_THROW(run_cli(config), ValidationError);
}

TEST(RunCli, AutocorrEmitsLagTable) {
  const std::string returns_path = temp_path("returns.csv");
  std::ostringstream file;
  file << "p1,p2\n";
  rng::Stream stream(3);
  double x1 = 0.0, x2 = 0.0;
  for (int t = 0; t < 300; ++t) {
    x1 = 0.4 * x1 + stream.normal();
    x2 = 0.4 * x2 + stream.normal();
    file << csv::format_cell(x1) << ',' << csv::format_cell(x2) << '\n';
  }
  write_text(returns_path, file.str());

  RunConfig config;
  config.command = Command::autocorr;
  config.returns_path = returns_path;
  config.max_lag = 5;
  config.format = ReportFormat::csv;
  config.output_path = temp_path("autocorr.csv");
  ASSERT_EQ(run_cli(config), 0);

  const std::string out = read_text(config.output_path);
  EXPECT_NE(out.find("lag,autocorrelation"), std::string::npos);
  EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), 6);  // header + 5 lags

  config.max_lag = 299;  // needs T > max_lag + 1
  EXPECT_THROW(run_cli(config), ValidationError);
}

TEST(RunCli, BootstrapEmitsReloadableNullSamples) {
  rng::Stream stream(14);
  const std::size_t t_steps = 30;

  std::ostringstream factors;
  factors << "mkt,smb,hml\n";
  for (std::size_t s = 0; s < t_steps; ++s)
    factors << csv::format_cell(stream.normal()) << ','
            << csv::format_cell(stream.normal()) << ','
            << csv::format_cell(stream.normal()) << '\n';
  const std::string factors_path = temp_path("factors.csv");
  write_text(factors_path, factors.str());

  std::ostringstream returns;
  returns << "p1,p2,p3,p4\n";
  for (std::size_t s = 0; s < t_steps; ++s) {
    for (int i = 0; i < 4; ++i)
      returns << (i ? "," : "") << csv::format_cell(0.01 * stream.normal());
    returns << '\n';
  }
  const std::string returns_path = temp_path("boot_returns.csv");
  write_text(returns_path, returns.str());

  RunConfig config;
  config.command = Command::bootstrap;
  config.returns_path = returns_path;
  config.factors_path = factors_path;
  config.bootstrap_draws = 50;
  config.seed = 99;
  config.output_path = temp_path("boot_nulls.csv");
  std::ostringstream diag;
  ASSERT_EQ(run_cli(config, std::cout, diag), 0);

  const NullSampleSet nulls = load_nulls(config.output_path, t_steps - 4.0);
  EXPECT_EQ(nulls.draw_count(), 50u);
  EXPECT_EQ(nulls.hypothesis_count(), 4u);
  EXPECT_NE(read_text(config.output_path).find("p1,p2,p3,p4"), std::string::npos);
  EXPECT_NE(diag.str().find("redraws="), std::string::npos);

  // same seed, more workers: identical artifact
  config.workers = 3;
  config.output_path = temp_path("boot_nulls_w3.csv");
  ASSERT_EQ(run_cli(config, std::cout, diag), 0);
  EXPECT_EQ(read_text(temp_path("boot_nulls.csv")),
            read_text(config.output_path));
}

TEST(RunCli, MissingInputsAreValidationErrors) {
  RunConfig config;
  config.command = Command::test;
  EXPECT_THROW(run_cli(config), ValidationError);
  config.command = Command::autocorr;
  EXPECT_THROW(run_cli(config), ValidationError);
  config.command = Command::bootstrap;
  EXPECT_THROW(run_cli(config), ValidationError);

  config.command = Command::test;
  config.alphas_path = temp_path("does_not_exist.csv");
  config.nulls_path = temp_path("also_missing.csv");
  EXPECT_THROW(run_cli(config), ValidationError);
}

TEST(FormatParsing, KnownNamesOnly) {
  EXPECT_EQ(format_from_string("text"), ReportFormat::text);
  EXPECT_EQ(format_from_string("csv"), ReportFormat::csv);
  EXPECT_EQ(format_from_string("json"), ReportFormat::json);
  EXPECT_THROW(format_from_string("xml"), ValidationError);
}
