#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fdrboot/classical.hpp"
#include "fdrboot/rng.hpp"
#include "support/oracles.hpp"

using namespace fdrboot;

namespace {

PValueVector make_pvals(std::vector<double> values) {
  return PValueVector{std::move(values), Sidedness::two_sided};
}

PValueVector random_pvals(std::size_t n, rng::Stream& stream, double signal_fraction = 0.3) {
  std::vector<double> values(n);
  for (double& p : values)
    p = stream.uniform() < signal_fraction ? 0.002 * stream.uniform_open()
                                           : stream.uniform_open();
  return make_pvals(std::move(values));
}

}  // namespace

TEST(Single, FixedThreshold) {
  EXPECT_EQ(single(make_pvals({0.01, 0.2})).rejected, (std::vector<std::size_t>{0}));
  EXPECT_TRUE(single(make_pvals({0.06, 0.9, 0.51})).rejected.empty());
  EXPECT_EQ(single(make_pvals({0.05, 0.05, 0.05})).rejected.size(), 3u);  // inclusive
}

TEST(Bh, StepUpInstance) {
  const TestDecision d = bh(make_pvals({0.001, 0.01, 0.02, 0.04, 0.9}), 0.05);
  EXPECT_EQ(d.rejected.size(), 4u);
  EXPECT_DOUBLE_EQ(*d.threshold_p, 0.04);
}

TEST(Bh, NoRejectionsOnAllOnes) {
  EXPECT_TRUE(bh(make_pvals({1.0, 1.0, 1.0}), 0.05).rejected.empty());
}

TEST(Bh, ControlsFdrOnIndependentUniformNulls) {
  rng::Stream stream(1001);
  const std::size_t n = 50;
  const int reps = 10000;
  const HypothesisLabels labels(std::vector<bool>(n, true));  // complete null
  std::vector<double> fdps;
  fdps.reserve(reps);
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<double> values(n);
    for (double& p : values) p = stream.uniform_open();
    const TestDecision d = bh(make_pvals(std::move(values)), 0.05);
    fdps.push_back(fdp(contingency(d, labels)));
  }
  const double mc_se = oracle::sample_sd(fdps) / std::sqrt(static_cast<double>(reps));
  EXPECT_LE(oracle::mean(fdps), 0.05 + 3.0 * mc_se);
}

TEST(By, EquivalentToCorrectedStepUp) {
  rng::Stream stream(7);
  for (int rep = 0; rep < 20; ++rep) {
    const PValueVector pvals = random_pvals(50, stream);
    const double corrected = 0.05 / (std::log(50.0) + 0.5);
    EXPECT_EQ(by(pvals, 0.05).rejected, sup_threshold(pvals, corrected).rejected);
  }
  // the correction evaluates to q / (ln N + 1/2)
  EXPECT_NEAR(0.05 / (std::log(50.0) + 0.5), 0.0113327, 5e-7);
}

TEST(By, SingleHypothesisDegenerateCase) {
  // N = 1: effective level 0.05 / 0.5 = 0.1, still a valid step-up call
  EXPECT_EQ(by(make_pvals({0.07}), 0.05).rejected, (std::vector<std::size_t>{0}));
  EXPECT_TRUE(by(make_pvals({0.12}), 0.05).rejected.empty());
}

TEST(By, NeverRejectsMoreThanBh) {
  rng::Stream stream(8);
  for (int rep = 0; rep < 40; ++rep) {
    const PValueVector pvals = random_pvals(30, stream);
    const auto r_by = by(pvals, 0.05).rejected;
    const auto r_bh = bh(pvals, 0.05).rejected;
    EXPECT_TRUE(std::includes(r_bh.begin(), r_bh.end(), r_by.begin(), r_by.end()));
  }
}

TEST(Bky, EmptyFirstStageFallsBackToShrunkBh) {
  const PValueVector pvals = make_pvals({0.9, 0.7, 0.8, 0.95});
  const TestDecision two_stage = bky(pvals, 0.05);
  const TestDecision shrunk = bh(pvals, 0.05 / 1.05);
  EXPECT_EQ(two_stage.rejected, shrunk.rejected);
  EXPECT_TRUE(two_stage.rejected.empty());
}

TEST(Bky, FullFirstStageRejectsEverything) {
  const PValueVector pvals = make_pvals({1e-8, 2e-8, 3e-9});
  const TestDecision d = bky(pvals, 0.05);
  EXPECT_EQ(d.rejected.size(), 3u);
}

TEST(Bky, TwoStageHandOracle) {
  // Stage 1 at q' = 0.05/1.05 rejects the 20 tiny p-values; the null count
  // estimate 30 inflates stage 2 to q' * 50/30, which still rejects exactly
  // those 20.
  std::vector<double> values;
  for (int i = 0; i < 20; ++i) values.push_back(0.0001);
  for (int i = 0; i < 30; ++i) values.push_back(0.9);
  const TestDecision d = bky(make_pvals(std::move(values)), 0.05);
  EXPECT_EQ(d.rejected.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(d.rejected[i], i);
  EXPECT_DOUBLE_EQ(*d.threshold_p, 0.0001);
}

TEST(StoreyPi1, PlugInEstimator) {
  // exactly uniform at the reference point: estimate 0
  EXPECT_DOUBLE_EQ(storey_pi1(make_pvals({0.1, 0.3, 0.6, 0.8}), 0.5), 0.0);
  // three of five at or below 0.5: (0.6 - 0.5) / 0.5 = 0.2
  EXPECT_DOUBLE_EQ(storey_pi1(make_pvals({0.01, 0.02, 0.3, 0.6, 0.9}), 0.5), 0.2);
  // clamped at zero when the CDF dips below the diagonal
  EXPECT_DOUBLE_EQ(storey_pi1(make_pvals({0.6, 0.7, 0.8, 0.9}), 0.5), 0.0);
}

TEST(Storey, ReducesToBhWhenPi1IsZero) {
  const PValueVector pvals = make_pvals({0.1, 0.3, 0.6, 0.8});
  ASSERT_DOUBLE_EQ(storey_pi1(pvals, 0.5), 0.0);
  EXPECT_EQ(storey(pvals, 0.05).rejected, bh(pvals, 0.05).rejected);
}

TEST(Storey, SlopeArithmetic) {
  // F-hat(0.5) = 0.6 on ten entries: pi1 = 0.2, slope 0.05/0.8 = 0.0625
  const PValueVector pvals =
      make_pvals({0.001, 0.002, 0.01, 0.02, 0.4, 0.45, 0.7, 0.8, 0.9, 0.95});
  ASSERT_DOUBLE_EQ(storey_pi1(pvals, 0.5), 0.2);
  EXPECT_EQ(storey(pvals, 0.05).rejected, sup_threshold(pvals, 0.0625).rejected);
}

TEST(Storey, SaturatedEstimateRejectsEverything) {
  // every p-value at or below the reference point: pi1 = 1
  const PValueVector pvals = make_pvals({0.01, 0.2, 0.5, 0.4});
  ASSERT_DOUBLE_EQ(storey_pi1(pvals, 0.5), 1.0);
  const TestDecision d = storey(pvals, 0.05);
  EXPECT_EQ(d.rejected.size(), 4u);
  EXPECT_DOUBLE_EQ(*d.threshold_p, 0.5);
}

TEST(Storey, NestsAboveBh) {
  rng::Stream stream(9);
  for (int rep = 0; rep < 40; ++rep) {
    const PValueVector pvals = random_pvals(30, stream);
    const auto r_bh = bh(pvals, 0.05).rejected;
    const auto r_st = storey(pvals, 0.05).rejected;
    EXPECT_TRUE(std::includes(r_st.begin(), r_st.end(), r_bh.begin(), r_bh.end()));
  }
}

TEST(StoreyAdaptive, UniformPValuesBehaveLikeBh) {
  // exactly uniform order statistics: every reference point estimates
  // pi1 ~ 0, so the decision coincides with plain BH
  std::vector<double> values(20);
  for (std::size_t i = 0; i < 20; ++i)
    values[i] = (static_cast<double>(i) + 0.5) / 20.0;
  const PValueVector pvals = make_pvals(std::move(values));
  rng::Stream stream(100);
  const TestDecision adaptive = storey_adaptive(pvals, 0.05, 500, stream);
  EXPECT_EQ(adaptive.rejected, bh(pvals, 0.05).rejected);
}

TEST(StoreyAdaptive, SingleHypothesisFallsBackToFixedReference) {
  const PValueVector pvals = make_pvals({0.02});
  rng::Stream stream(4);
  const TestDecision adaptive = storey_adaptive(pvals, 0.05, 500, stream);
  EXPECT_EQ(adaptive.rejected, storey(pvals, 0.05, 0.5).rejected);
}

TEST(StoreyAdaptive, DeterministicForAFixedSeed) {
  rng::Stream gen(600);
  const PValueVector pvals = random_pvals(40, gen);
  rng::Stream s1(42), s2(42);
  const TestDecision d1 = storey_adaptive(pvals, 0.05, 500, s1);
  const TestDecision d2 = storey_adaptive(pvals, 0.05, 500, s2);
  EXPECT_EQ(d1.rejected, d2.rejected);
  EXPECT_EQ(d1.threshold_p, d2.threshold_p);
}

TEST(AllProcedures, PermutationEquivariance) {
  rng::Stream stream(11);
  const PValueVector pvals = random_pvals(25, stream);

  std::vector<std::size_t> perm(25);
  std::iota(perm.begin(), perm.end(), 0);
  stream.shuffle(perm.begin(), perm.end());
  PValueVector permuted;
  permuted.sidedness = pvals.sidedness;
  permuted.values.resize(25);
  for (std::size_t i = 0; i < 25; ++i) permuted.values[perm[i]] = pvals.values[i];

  auto check = [&](auto&& proc) {
    const auto base = proc(pvals).rejected;
    std::vector<std::size_t> mapped;
    for (std::size_t i : base) mapped.push_back(perm[i]);
    std::sort(mapped.begin(), mapped.end());
    EXPECT_EQ(proc(permuted).rejected, mapped);
  };
  check([](const PValueVector& p) { return single(p); });
  check([](const PValueVector& p) { return bh(p, 0.05); });
  check([](const PValueVector& p) { return by(p, 0.05); });
  check([](const PValueVector& p) { return bky(p, 0.05); });
  check([](const PValueVector& p) { return storey(p, 0.05); });
}

TEST(AllProcedures, RejectBadLevels) {
  const PValueVector pvals = make_pvals({0.5});
  EXPECT_THROW(bh(pvals, 0.0), ValidationError);
  EXPECT_THROW(bh(pvals, 1.0), ValidationError);
  EXPECT_THROW(storey(pvals, 0.05, 1.0), ValidationError);
  EXPECT_THROW(single(pvals, -0.1), ValidationError);
}
