#include <gtest/gtest.h>

#include <cmath>

#include "slt/errors.hpp"
#include "slt/montecarlo.hpp"

namespace {

// Plain step-by-step first return time, for comparison with the jumping walker.
std::uint64_t naive_return_time(slt::RngStream& rng, int d, std::uint64_t h) {
  std::vector<slt::Coord> pos(static_cast<std::size_t>(d), 0);
  slt::DirectionSampler dir(d);
  for (std::uint64_t t = 1; t <= h; ++t) {
    const int c = dir.next(rng);
    pos[static_cast<std::size_t>(slt::direction_axis(c))] += slt::direction_sign(c);
    bool origin = true;
    for (const auto x : pos) origin = origin && x == 0;
    if (origin) return t;
  }
  return h + 1;
}

}  // namespace

TEST(EstimateGamma, HorizonOneIsExactlyOne) {
  for (int d : {3, 4, 7}) {
    const auto g = slt::estimate_gamma(d, 1, 1000, 1);
    EXPECT_EQ(g.record.estimate, 1.0);
    EXPECT_EQ(g.record.stderr_, 0.0);
  }
}

TEST(EstimateGamma, HorizonTwoMatchesEnumeration) {
  // Oracle: of the 36 two-step paths in d = 3, those returning at t = 2 are
  // the 6 that reverse the first step.
  int escape = 0;
  for (int a = 0; a < 6; ++a) {
    for (int b = 0; b < 6; ++b) {
      const bool back = slt::direction_axis(a) == slt::direction_axis(b) &&
                        slt::direction_sign(a) == -slt::direction_sign(b);
      escape += back ? 0 : 1;
    }
  }
  const double exact = escape / 36.0;
  EXPECT_DOUBLE_EQ(exact, 5.0 / 6.0);
  const auto g = slt::estimate_gamma(3, 2, 200000, 5);
  EXPECT_NEAR(g.record.estimate, exact, 5.0 * g.record.stderr_);
}

TEST(EstimateGamma, RejectsRecurrentDimensions) {
  EXPECT_THROW(slt::estimate_gamma(2, 100, 100, 1), slt::PreconditionError);
  EXPECT_THROW(slt::estimate_gamma(1, 100, 100, 1), slt::PreconditionError);
}

TEST(EstimateGamma, LadderIsNonincreasing) {
  const auto g = slt::estimate_gamma(3, 4096, 5000, 9);
  ASSERT_GE(g.ladder.size(), 2u);
  for (std::size_t i = 1; i < g.ladder.size(); ++i) {
    EXPECT_LE(g.ladder[i].estimate, g.ladder[i - 1].estimate);
  }
  EXPECT_EQ(g.record, g.ladder.back());
}

TEST(SampleReturnTime, JumpingWalkerMatchesNaiveWalker) {
  const std::uint64_t h = 3000;
  const int trials = 20000;
  for (int d : {3, 5}) {
    int jr = 0, nr = 0;
    for (int i = 0; i < trials; ++i) {
      slt::RngStream a(61, static_cast<std::uint64_t>(i));
      slt::RngStream b(62, static_cast<std::uint64_t>(i));
      jr += slt::sample_return_time(a, d, h) <= h;
      nr += naive_return_time(b, d, h) <= h;
    }
    const double p = 0.5 * (jr + nr) / trials;
    const double se = std::sqrt(2.0 * p * (1 - p) / trials);
    EXPECT_NEAR(static_cast<double>(jr) / trials, static_cast<double>(nr) / trials, 5.0 * se) << d;
  }
}

TEST(EstimateKappa, QOneIsExactlyOne) {
  const auto k = slt::estimate_kappa(1.0, 3, 1000, 50, 3);
  EXPECT_EQ(k.kappa.estimate, 1.0);
  EXPECT_EQ(k.kappa.stderr_, 0.0);
  EXPECT_TRUE(k.audit.clean());
  EXPECT_EQ(k.audit.paths, 50u);
}

TEST(EstimateKappa, ThreadCountDoesNotChangeResults) {
  slt::RunOptions one;
  slt::RunOptions three;
  three.threads = 3;
  const auto a = slt::estimate_kappa(2.5, 4, 2000, 700, 17, one);
  const auto b = slt::estimate_kappa(2.5, 4, 2000, 700, 17, three);
  EXPECT_EQ(a.kappa, b.kappa);
  EXPECT_EQ(a.range, b.range);
}

TEST(EstimateKappa, StepBudgetFlagsPartialRun) {
  slt::RunOptions opt;
  opt.step_budget = 1000 * 300;
  const auto k = slt::estimate_kappa(2.0, 3, 1000, 1000, 1, opt);
  EXPECT_TRUE(k.partial);
  EXPECT_EQ(k.kappa.samples, 256u);
}

TEST(PathwiseAudit, DetectsBrokenPaths) {
  slt::PathwiseAudit a;
  const std::vector<std::uint64_t> ok{3, 1, 1};
  a.check(ok, 5, 2.0, 11.0);
  EXPECT_TRUE(a.clean());
  const std::vector<std::uint64_t> lost{3, 1};
  a.check(lost, 5, 2.0, 10.0);
  EXPECT_EQ(a.mass_violations, 1u);
  // claimed q_norm below n^q / R^{q-1}
  a.check(ok, 5, 2.5, 1.0);
  EXPECT_GE(a.level_violations, 1u);
  EXPECT_EQ(a.paths, 3u);
}

TEST(VarianceScan, TwoSamplesIsValid) {
  const std::vector<std::uint64_t> grid{64, 128};
  const auto v = slt::variance_scan(2.0, 3, grid, 2, 4);
  ASSERT_EQ(v.records.size(), 2u);
  EXPECT_EQ(v.records[0].samples, 2u);
  EXPECT_TRUE(v.audit.clean());
}

TEST(VarianceScan, CheckpointsMatchSeparateRuns) {
  const std::vector<std::uint64_t> grid{300, 100};
  const auto v = slt::variance_scan(2.0, 4, grid, 40, 8);
  ASSERT_EQ(*v.records[0].n, 100);
  // The n = 300 column must agree with the kappa run on the same streams.
  const auto k = slt::estimate_kappa(2.0, 4, 300, 40, 8);
  EXPECT_NEAR(v.records[1].extras.at("mean") / 300.0, k.kappa.estimate, 1e-12);
}

TEST(Tail, CertificateAboveMaximalQNorm) {
  const double q = 2.0;
  const std::uint64_t n = 1000;
  const auto t = slt::tail_estimate(q, 3, n, 1001.0, 100, 1);
  EXPECT_TRUE(t.certificate);
  EXPECT_EQ(t.record.estimate, 0.0);
  EXPECT_EQ(t.record.extras.at("certificate"), 1.0);
}

TEST(Tail, VeryNegativeXiGivesOne) {
  const auto t = slt::tail_estimate(2.0, 3, 500, -1e6, 200, 1);
  EXPECT_FALSE(t.certificate);
  EXPECT_EQ(t.record.estimate, 1.0);
}

TEST(Tail, DecreasingInXi) {
  double prev = 1.0;
  for (const double xi : {0.0, 0.05, 0.1, 0.2}) {
    const auto t = slt::tail_estimate(3.0, 5, 2000, xi, 4000, 3);
    EXPECT_LE(t.record.estimate, prev + 3.0 * t.record.stderr_);
    prev = t.record.estimate;
    EXPECT_TRUE(t.audit.clean());
  }
}

TEST(Pinned, TrivialThresholds) {
  const std::vector<std::uint64_t> ks{1, 2, 51};
  const auto p = slt::pinned_tail_check(3, 50, ks, 1000, 2);
  EXPECT_EQ(p.curve.points[0].probability, 1.0);
  EXPECT_EQ(p.curve.points[2].probability, 0.0);
}

TEST(BallVolume, SmallCases) {
  EXPECT_EQ(slt::ball_volume(1, 3), 7u);
  EXPECT_EQ(slt::ball_volume(2, 1), 5u);
  EXPECT_EQ(slt::ball_volume(2, 2), 13u);
  EXPECT_EQ(slt::ball_volume(3, 1), 7u);
  EXPECT_EQ(slt::ball_volume(3, 0), 1u);
  std::uint64_t brute = 0;
  for (int x = -5; x <= 5; ++x)
    for (int y = -5; y <= 5; ++y)
      for (int z = -5; z <= 5; ++z) brute += x * x + y * y + z * z <= 25;
  EXPECT_EQ(slt::ball_volume(3, 5), brute);
}

TEST(Confined, LargeRadiusIsCertain) {
  const auto r = slt::confined_sampler(3, 100, 100, 2.0, 50, 1);
  EXPECT_EQ(r.probability.estimate, 1.0);
  EXPECT_EQ(r.accepted, 50u);
  EXPECT_EQ(r.range_violations, 0u);
  EXPECT_EQ(r.holder_violations, 0u);
}

TEST(Confined, InfeasibleConfigurationReportsPreEstimate) {
  try {
    slt::confined_sampler(3, 20000, 2, 2.0, 1000, 1);
    FAIL() << "expected rejection";
  } catch (const slt::InfeasibleConfiguration& e) {
    EXPECT_LT(e.pre_estimate(), slt::kMinAcceptance);
    EXPECT_NE(std::string(e.what()).find("feasibility"), std::string::npos);
  }
}

TEST(Confined, AcceptedPathsRespectBallBounds) {
  const auto r = slt::confined_sampler(3, 300, 10, 2.0, 2000, 4);
  EXPECT_GT(r.accepted, 0u);
  EXPECT_EQ(r.range_violations, 0u);
  EXPECT_EQ(r.holder_violations, 0u);
  EXPECT_TRUE(r.audit.clean());
  EXPECT_GT(r.pre_estimate, 0.0);
}

TEST(Intersection, ThresholdAboveNIsZero) {
  const std::vector<std::uint64_t> ks{1, 101};
  const auto s = slt::intersection_decay_scan(3, 100, ks, 200, 1);
  EXPECT_EQ(s.by_k.points[1].probability, 0.0);
  EXPECT_GT(s.by_k.points[0].probability, 0.0);
}

TEST(LevelProfile, PartitionAndShape) {
  const auto p = slt::level_profile(2.0, 5, 2000, 300, 6, 0.05);
  EXPECT_EQ(p.partition_violations, 0u);
  EXPECT_TRUE(p.audit.clean());
  EXPECT_EQ(p.conditioned_paths, 15u);
  ASSERT_EQ(p.rows.size(), 11u);
  double fractions = 0.0;
  for (const auto& r : p.rows) {
    fractions += r.mean_fraction;
    EXPECT_LE(r.max_volume_ratio, 1.0);
  }
  EXPECT_NEAR(fractions, 1.0, 1e-9);
  EXPECT_NE(p.signature, slt::ShapeSignature::None);
  const auto plain = slt::level_profile(2.0, 5, 2000, 50, 6, 0.0);
  EXPECT_EQ(plain.signature, slt::ShapeSignature::None);
}

TEST(Clt, FlagsThreeDimensions) {
  const auto r = slt::clt_test(2.0, 3, 500, 200, 1);
  EXPECT_TRUE(r.unsupported_dimension);
  EXPECT_EQ(r.standardized.size(), 200u);
}

TEST(Reproducibility, SameSeedSameRecords) {
  const std::vector<std::uint64_t> grid{256, 512};
  EXPECT_EQ(slt::variance_scan(1.5, 4, grid, 300, 10).records,
            slt::variance_scan(1.5, 4, grid, 300, 10).records);
  EXPECT_NE(slt::variance_scan(1.5, 4, grid, 300, 10).records,
            slt::variance_scan(1.5, 4, grid, 300, 11).records);
}
