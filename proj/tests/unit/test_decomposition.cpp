#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "slt/decomposition.hpp"
#include "slt/errors.hpp"

using slt::LatticePoint;

namespace {

slt::IncrementSequence steps(int d, std::initializer_list<std::pair<int, int>> axis_sign) {
  std::vector<std::uint8_t> codes;
  for (const auto& [a, s] : axis_sign) codes.push_back(static_cast<std::uint8_t>(slt::direction_code(a, s)));
  return slt::IncrementSequence(d, codes);
}

slt::IncrementSequence random_walk(int d, std::int64_t n, std::uint64_t seed, std::uint64_t i = 0) {
  slt::RngStream rng(seed, i);
  return slt::generate_increments(d, n, rng);
}

slt::LocalTimeField field(int d, std::vector<std::pair<LatticePoint, std::uint64_t>> e) {
  return slt::LocalTimeField::from_counts(d, e);
}

}  // namespace

TEST(QuasiDyadicSplit, Examples) {
  EXPECT_EQ(slt::quasi_dyadic_split(8, 3).parts, std::vector<std::int64_t>(8, 1));
  EXPECT_EQ(slt::quasi_dyadic_split(10, 2).parts, (std::vector<std::int64_t>{3, 2, 3, 2}));
  EXPECT_EQ(slt::quasi_dyadic_split(10, 1).parts, (std::vector<std::int64_t>{5, 5}));
  EXPECT_EQ(slt::quasi_dyadic_split(10, 0).parts, (std::vector<std::int64_t>{10}));
}

TEST(QuasiDyadicSplit, NestedAndBalanced) {
  for (std::int64_t n : {7, 64, 1000, 4097}) {
    for (int l = 1; l <= 6 && (std::int64_t{1} << l) <= n; ++l) {
      const auto coarse = slt::quasi_dyadic_split(n, l - 1).parts;
      const auto fine = slt::quasi_dyadic_split(n, l).parts;
      ASSERT_EQ(fine.size(), 2 * coarse.size());
      for (std::size_t i = 0; i < coarse.size(); ++i) {
        ASSERT_EQ(fine[2 * i] + fine[2 * i + 1], coarse[i]);
        ASSERT_GE(fine[2 * i], fine[2 * i + 1]);
        ASSERT_LE(fine[2 * i] - fine[2 * i + 1], 1);
      }
      EXPECT_EQ(std::accumulate(fine.begin(), fine.end(), std::int64_t{0}), n);
    }
  }
  EXPECT_THROW(slt::quasi_dyadic_split(3, 2), slt::PreconditionError);
}

TEST(SplitWindows, MatchPartsInTimeOrder) {
  const auto w = slt::split_windows(10, 2);
  const auto parts = slt::quasi_dyadic_split(10, 2).parts;
  ASSERT_EQ(w.size(), parts.size());
  std::int64_t t = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_EQ(w[i].begin, t);
    EXPECT_EQ(w[i].length(), parts[i]);
    t = w[i].end;
  }
  EXPECT_EQ(t, 10);
}

TEST(SplitStrands, HandTrace) {
  const auto inc = steps(3, {{0, 1}, {0, -1}, {1, 1}, {1, -1}});
  const auto [a, b] = slt::split_strands(inc, 2);
  EXPECT_EQ(a.site_count(), 2u);
  EXPECT_EQ(a.count_at(LatticePoint(3)), 1u);
  EXPECT_EQ(a.count_at(LatticePoint::unit(3, 0, -1)), 1u);
  EXPECT_EQ(b.site_count(), 2u);
  EXPECT_EQ(b.count_at(LatticePoint(3)), 1u);
  EXPECT_EQ(b.count_at(LatticePoint::unit(3, 1, -1)), 1u);
}

// l_n(z) = l1(S(n1) - z) + l2(S(n1) - z) for every site z, and no strand mass is lost.
TEST(SplitStrands, ReconstructionIdentityOnRandomSplits) {
  const std::int64_t n = 1000;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const int d = 3 + static_cast<int>(i % 3);
    const auto inc = random_walk(d, n, 77, i);
    slt::RngStream pick(78, i);
    const auto n1 = 1 + static_cast<std::int64_t>(pick.below(static_cast<std::uint64_t>(n - 1)));
    const auto [a, b] = slt::split_strands(inc, n1);
    ASSERT_EQ(a.window_length(), static_cast<std::uint64_t>(n1));
    ASSERT_EQ(b.window_length(), static_cast<std::uint64_t>(n - n1));
    const auto full = slt::accumulate(inc);
    const auto pos = slt::positions(inc);
    const LatticePoint& ref = pos[static_cast<std::size_t>(n1)];
    std::uint64_t matched = 0;
    for (std::size_t s = 0; s < full.site_count(); ++s) {
      const LatticePoint mirrored = ref - full.site(s);
      const auto la = a.count_at(mirrored);
      const auto lb = b.count_at(mirrored);
      ASSERT_EQ(full.counts()[s], la + lb) << "replica " << i;
      matched += la + lb;
    }
    ASSERT_EQ(matched, static_cast<std::uint64_t>(n));
  }
}

TEST(StrandTree, DepthZeroIsAccumulate) {
  const auto inc = random_walk(3, 300, 5);
  const auto tree = slt::build_strand_tree(inc, 0);
  ASSERT_EQ(tree.strands.size(), 1u);
  ASSERT_EQ(tree.strands[0].size(), 1u);
  const auto full = slt::accumulate(inc);
  EXPECT_EQ(tree.strands[0][0].site_count(), full.site_count());
  for (std::size_t s = 0; s < full.site_count(); ++s) {
    EXPECT_EQ(tree.strands[0][0].count_at(full.site(s)), full.counts()[s]);
  }
}

TEST(IntersectionTerm, DisjointAndHandValue) {
  const auto sub = slt::Subdivision::dyadic(64.0);
  const auto a = field(3, {{LatticePoint(3), 2}, {LatticePoint::unit(3, 0, 1), 1}});
  const auto b = field(3, {{LatticePoint(3), 1}, {LatticePoint::unit(3, 1, 1), 3}});
  const auto c = field(3, {{LatticePoint::unit(3, 2, 1), 5}});
  EXPECT_DOUBLE_EQ(slt::intersection_term(a, c, sub, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(slt::intersection_term(a, b, sub, 2.0), 8.0);
  EXPECT_GE(slt::one_sided_intersection_bound(a, b, sub, 2.0), 8.0);
}

TEST(VerifySandwich, HandTrace) {
  const auto inc = steps(3, {{0, 1}, {0, -1}, {1, 1}, {1, -1}});
  const auto sub = slt::Subdivision::dyadic(4.0);
  const auto r = slt::verify_sandwich(inc, 1, 2.0, sub);
  EXPECT_DOUBLE_EQ(r.lower, 4.0);
  EXPECT_DOUBLE_EQ(r.value, 6.0);
  EXPECT_DOUBLE_EQ(r.upper, 8.0);
  EXPECT_TRUE(r.exact);
  EXPECT_TRUE(r.holds());
}

TEST(VerifySandwich, DepthZeroCollapses) {
  const auto inc = random_walk(3, 512, 3);
  const auto r = slt::verify_sandwich(inc, 0, 2.5, slt::Subdivision::dyadic(512.0));
  EXPECT_EQ(r.lower, r.value);
  EXPECT_EQ(r.upper, r.value);
  EXPECT_TRUE(r.terms.empty());
}

TEST(VerifySandwich, ExactOnlyForIntegerQ) {
  const auto inc = random_walk(4, 1024, 3);
  const auto sub = slt::Subdivision::dyadic(1024.0);
  EXPECT_TRUE(slt::verify_sandwich(inc, 3, 3.0, sub).exact);
  EXPECT_FALSE(slt::verify_sandwich(inc, 3, 2.5, sub).exact);
}

TEST(VerifySandwich, LowerBoundNonincreasingInDepth) {
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto inc = random_walk(3, 2048, 41, i);
    const slt::StrandProfile p(inc, 6);
    const auto sub = slt::Subdivision::dyadic(2048.0);
    for (const double q : {1.5, 2.0, 3.0}) {
      double prev = p.report(0, q, sub).lower;
      for (int L = 1; L <= 6; ++L) {
        const double cur = p.report(L, q, sub).lower;
        ASSERT_LE(cur, prev * (1 + 1e-12));
        prev = cur;
      }
    }
  }
}

// The strand tree (explicit fields, intersection_term) and the profile
// (site ids, shared count pairs) are independent routes to the same numbers.
TEST(VerifySandwich, StrandTreeAgreesWithProfile) {
  for (std::uint64_t i = 0; i < 100; ++i) {
    const int d = 3 + static_cast<int>(i % 3);
    const auto inc = random_walk(d, 1500, 55, i);
    const int depth = 4;
    const auto tree = slt::build_strand_tree(inc, depth);
    const slt::StrandProfile p(inc, depth);
    const auto sub = slt::Subdivision::dyadic(1500.0);
    for (const double q : {1.5, 2.0, 2.5, 3.0}) {
      const auto r = p.report(depth, q, sub);
      double lower = 0.0;
      for (const auto& f : tree.strands[depth]) lower += slt::q_norm(f, q);
      EXPECT_NEAR(r.lower, lower, 1e-10 * lower);
      EXPECT_NEAR(r.value, slt::q_norm(tree.strands[0][0], q), 1e-10 * r.value);
      for (int j = 1; j <= depth; ++j) {
        double term = 0.0, one = 0.0;
        const auto& level = tree.strands[static_cast<std::size_t>(j)];
        for (std::size_t k = 0; k < level.size(); k += 2) {
          term += slt::intersection_term(level[k], level[k + 1], sub, q);
          one += slt::one_sided_intersection_bound(level[k], level[k + 1], sub, q);
        }
        EXPECT_NEAR(r.terms[static_cast<std::size_t>(j - 1)], term, 1e-10 * (1 + term));
        EXPECT_NEAR(r.one_sided_terms[static_cast<std::size_t>(j - 1)], one, 1e-10 * (1 + one));
      }
    }
  }
}

// Every 7-step path in d = 3.
TEST(VerifySandwich, ExhaustiveShortPaths) {
  const int d = 3, n = 7;
  const auto sub = slt::Subdivision::dyadic(n);
  std::vector<std::uint8_t> codes(n, 0);
  std::uint64_t paths = 0;
  while (true) {
    const slt::IncrementSequence inc(d, codes);
    const slt::StrandProfile p(inc, 2);
    for (int L = 1; L <= 2; ++L) {
      for (const double q : {1.5, 2.0, 3.0}) ASSERT_TRUE(p.report(L, q, sub).holds()) << paths;
    }
    ++paths;
    std::size_t k = 0;
    while (k < codes.size() && ++codes[k] == 2 * d) codes[k++] = 0;
    if (k == codes.size()) break;
  }
  EXPECT_EQ(paths, 279936u);
}

TEST(VerifySandwich, CoarseLadderViolationIsReportedWithSeed) {
  // A ladder with ratio far above 2 breaks the upper bound for q < 2.
  const auto bad = slt::Subdivision::from_levels({1.0, 1e9});
  bool thrown = false;
  for (std::uint64_t i = 0; i < 20 && !thrown; ++i) {
    const auto inc = random_walk(3, 4096, 13, i);
    try {
      slt::verify_sandwich(inc, 3, 1.5, bad, 4242);
    } catch (const slt::VerificationError& e) {
      thrown = true;
      EXPECT_NE(std::string(e.what()).find("4242"), std::string::npos);
    }
  }
  EXPECT_TRUE(thrown);
}

TEST(VerifyTruncatedSandwich, InactiveTruncationMatches) {
  const auto inc = random_walk(3, 2048, 19);
  const auto sub = slt::Subdivision::dyadic(2048.0);
  const auto full = slt::verify_sandwich(inc, 4, 2.5, sub);
  const auto trunc = slt::verify_truncated_sandwich(inc, 4, 2.5, 4096.0, sub);
  EXPECT_EQ(full.value, trunc.value);
  EXPECT_EQ(full.upper, trunc.upper);
  EXPECT_EQ(full.lower, trunc.lower);
}

TEST(VerifyTruncatedSandwich, HoldsAtSquareRootTruncation) {
  const auto sub = slt::Subdivision::dyadic(4096.0);
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto inc = random_walk(3, 4096, 23, i);
    for (const double q : {1.5, 2.0, 3.0}) {
      EXPECT_TRUE(slt::verify_truncated_sandwich(inc, 5, q, 64.0, sub).holds());
    }
  }
}

TEST(ElementaryInequality, HandAndDegenerate) {
  const auto sub = slt::Subdivision::dyadic(200.0);
  EXPECT_TRUE(slt::elementary_inequality_check(2, 3, 2.0, sub));
  for (std::uint64_t l1 : {1u, 5u, 64u}) EXPECT_TRUE(slt::elementary_inequality_check(l1, 0, 2.5, sub));
}

TEST(ElementaryInequality, ExhaustiveSmallCounts) {
  const auto sub = slt::Subdivision::dyadic(200.0);
  for (const double q : {1.1, 1.5, 2.0, 3.0, 4.0}) {
    for (std::uint64_t a = 0; a <= 64; ++a) {
      for (std::uint64_t b = 0; b <= 64; ++b) {
        if (a + b == 0) continue;
        ASSERT_TRUE(slt::elementary_inequality_check(a, b, q, sub)) << a << " " << b << " " << q;
      }
    }
  }
}

TEST(SandwichReport, JsonCarriesFields) {
  const auto inc = steps(3, {{0, 1}, {0, -1}, {1, 1}, {1, -1}});
  auto r = slt::verify_sandwich(inc, 1, 2.0, slt::Subdivision::dyadic(4.0), 99);
  const auto j = slt::to_json(r);
  for (const char* key : {"\"q\"", "\"L\"", "\"lower\"", "\"upper\"", "\"terms\"", "\"seed\":99"}) {
    EXPECT_NE(j.find(key), std::string::npos) << key;
  }
}
