#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <boost/math/special_functions/binomial.hpp>

#include "kmt/core/normal.hpp"
#include "kmt/recursion/pinned.hpp"
#include "kmt/recursion/walk.hpp"
#include "support.hpp"

namespace {

using kmt::BridgeCouplingConfig;
using kmt::RandomSource;

std::uint32_t path_code(std::span<const std::int64_t> s) {
  std::uint32_t code = 0;
  for (std::size_t i = 1; i < s.size(); ++i) code = (code << 1) | (s[i] > s[i - 1] ? 1u : 0u);
  return code;
}

// Empirical Cov(Y_i, Y_j) with the standard error of the mean of Y_i Y_j (means are known to be 0).
struct CovarianceCheck {
  int worst_i = 0, worst_j = 0;
  double worst_z = 0.0;
};

template <class Sample, class Target>
CovarianceCheck check_covariance(int n, int draws, Sample sample, Target target) {
  std::vector<double> sum(static_cast<std::size_t>((n + 1) * (n + 1)), 0.0), sq(sum.size(), 0.0);
  for (int r = 0; r < draws; ++r) {
    const std::vector<double> y = sample(r);
    for (int i = 1; i <= n; ++i)
      for (int j = i; j <= n; ++j) {
        const double v = y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)];
        sum[static_cast<std::size_t>(i * (n + 1) + j)] += v;
        sq[static_cast<std::size_t>(i * (n + 1) + j)] += v * v;
      }
  }
  CovarianceCheck out;
  for (int i = 1; i <= n; ++i)
    for (int j = i; j <= n; ++j) {
      const auto idx = static_cast<std::size_t>(i * (n + 1) + j);
      const double mean = sum[idx] / draws;
      const double se = std::sqrt((sq[idx] / draws - mean * mean) / draws);
      const double z = se > 0 ? std::fabs(mean - target(i, j)) / se : 0.0;
      if (z > out.worst_z) out = {i, j, z};
    }
  return out;
}

TEST(PinnedCoupling, OneStepIsDegenerate) {
  const auto c = kmt::sample_pinned_coupling(1, 1, {}, RandomSource(1));
  EXPECT_EQ(c.w, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(c.y, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(c.s, (std::vector<std::int64_t>{0, 1}));
  EXPECT_EQ(c.diag_t, 0.0);
}

TEST(PinnedCoupling, RejectsInfeasibleEndpoint) {
  EXPECT_THROW(kmt::sample_pinned_coupling(3, 0, {}, RandomSource(1)), kmt::DomainError);
  EXPECT_THROW(kmt::sample_pinned_coupling(3, 5, {}, RandomSource(1)), kmt::DomainError);
  EXPECT_THROW(kmt::sample_pinned_coupling(0, 0, {}, RandomSource(1)), kmt::DomainError);
}

TEST(PinnedCoupling, FourStepPathsAreUniform) {
  const int draws = 1000000;
  kmt::PinnedCouplingSampler sampler;
  const RandomSource src(4);
  std::map<std::uint32_t, double> counts;
  for (int r = 0; r < draws; ++r) counts[path_code(sampler(4, 0, src.split(static_cast<std::uint64_t>(r))).s)] += 1;
  ASSERT_EQ(counts.size(), 6u);
  std::vector<double> observed, expected;
  for (auto& [code, count] : counts) {
    observed.push_back(count);
    expected.push_back(draws / 6.0);
  }
  EXPECT_GT(testing_support::chi_square_p_value(observed, expected), 0.001);
}

// 35 (n, a) tables: each must pass at a Bonferroni level, and the pooled statistic at 0.001.
TEST(PinnedCoupling, SmallPathsUniformForEveryEndpoint) {
  kmt::PinnedCouplingSampler sampler;
  const RandomSource src(6);
  double pooled = 0.0;
  int pooled_dof = 0, tables = 0;
  std::vector<std::pair<std::string, double>> p_values;
  for (std::int64_t n = 1; n <= 7; ++n)
    for (std::int64_t a = -n; a <= n; a += 2) {
      const int draws = 50000;
      std::map<std::uint32_t, double> counts;
      const auto stream = src.split(static_cast<std::uint64_t>(n * 100 + a + 50));
      for (int r = 0; r < draws; ++r) {
        const auto c = sampler(n, a, stream.split(static_cast<std::uint64_t>(r)));
        ASSERT_EQ(c.s.back(), a);
        counts[path_code(c.s)] += 1;
      }
      const double paths = boost::math::binomial_coefficient<double>(static_cast<unsigned>(n), static_cast<unsigned>((n + a) / 2));
      ASSERT_EQ(static_cast<double>(counts.size()), paths) << n << " " << a;
      ++tables;
      if (paths < 2) continue;
      std::vector<double> observed, expected;
      for (auto& [code, count] : counts) {
        observed.push_back(count);
        expected.push_back(draws / paths);
      }
      const auto [stat, dof] = testing_support::chi_square_statistic(observed, expected);
      pooled += stat;
      pooled_dof += dof;
      p_values.emplace_back(std::to_string(n) + "," + std::to_string(a), testing_support::chi_square_sf(stat, dof));
    }
  for (const auto& [label, p] : p_values) EXPECT_GT(p, 0.001 / tables) << label;
  EXPECT_GT(testing_support::chi_square_sf(pooled, pooled_dof), 0.001);
}

TEST(PinnedCoupling, BridgeCovarianceAtSixteen) {
  const int n = 16;
  kmt::PinnedCouplingSampler sampler;
  const RandomSource src(16);
  const auto check = check_covariance(
      n, 100000, [&](int r) { return sampler(n, 0, src.split(static_cast<std::uint64_t>(r))).y; },
      [&](int i, int j) { return static_cast<double>(i) * (n - j) / n; });
  EXPECT_LT(check.worst_z, 3.0) << "pair (" << check.worst_i << "," << check.worst_j << ")";
}

TEST(PinnedCoupling, EndpointsAndSplitConsistency) {
  kmt::PinnedCouplingSampler sampler;
  const RandomSource src(21);
  for (std::int64_t n : {3, 5, 17, 64, 101, 1000}) {
    for (std::int64_t a : {std::int64_t{0}, std::int64_t{1}, n / 3, -n}) {
      if (!kmt::ConditionalWalkLaw::feasible(n, a)) continue;
      const auto c = sampler(n, a, src);
      ASSERT_EQ(c.w.front(), 0.0);
      ASSERT_EQ(c.w.back(), 0.0);
      ASSERT_EQ(c.y.front(), 0.0);
      ASSERT_EQ(c.y.back(), 0.0);
      EXPECT_NO_THROW(c.walk());
      EXPECT_NO_THROW(c.bridge());
      ASSERT_EQ(c.split, n / 2);
      // Top split redone by hand from the same stream.
      const kmt::ConditionalWalkLaw law(n, n / 2, a);
      auto engine = src.engine();
      const auto pair = kmt::quantile_couple_conditional(law, engine);
      EXPECT_EQ(c.y[static_cast<std::size_t>(n / 2)], pair.z);
      EXPECT_EQ(c.s[static_cast<std::size_t>(n / 2)], pair.s);
    }
  }
}

TEST(PinnedCoupling, SplitInequalityHoldsOnEveryDraw) {
  kmt::PinnedCouplingSampler sampler;
  const RandomSource src(64);
  for (int r = 0; r < 20000; ++r) {
    const std::int64_t n = 3 + r % 200;
    const std::int64_t a = (r % 3 == 0) ? n % 2 : ((r * 7) % (n + 1)) * ((r % 2) ? 1 : -1);
    if (!kmt::ConditionalWalkLaw::feasible(n, a)) continue;
    const auto c = sampler(n, a, src.split(static_cast<std::uint64_t>(r)));
    ASSERT_LE(kmt::max_deviation(c), std::max(c.diag_tl, c.diag_tr) + c.diag_t + 1e-9) << n << " " << a;
  }
}

TEST(PinnedCoupling, DeterministicInSeedAndPath) {
  const auto a = kmt::sample_pinned_coupling(257, 5, {}, RandomSource(3).split("x"));
  const auto b = kmt::sample_pinned_coupling(257, 5, {}, RandomSource(3).split("x"));
  const auto c = kmt::sample_pinned_coupling(257, 5, {}, RandomSource(3).split("y"));
  EXPECT_EQ(a.s, b.s);
  EXPECT_EQ(a.y, b.y);
  EXPECT_NE(a.y, c.y);
}

TEST(BridgeCouplingConfig, RejectsSplitRuleOutsideMiddleThird) {
  BridgeCouplingConfig cfg;
  cfg.split_rule = [](std::int64_t) { return std::int64_t{1}; };
  EXPECT_THROW(kmt::sample_pinned_coupling(12, 0, cfg, RandomSource(1)), kmt::DomainError);
  BridgeCouplingConfig tiny;
  tiny.base_case_cutoff = 1;
  EXPECT_THROW(kmt::sample_pinned_coupling(12, 0, tiny, RandomSource(1)), kmt::DomainError);
}

TEST(BridgeCouplingConfig, AlternativeSplitAndCutoffKeepMarginalsExact) {
  BridgeCouplingConfig cfg;
  cfg.split_rule = [](std::int64_t n) { return (n + 1) / 2; };
  cfg.base_case_cutoff = 3;
  kmt::PinnedCouplingSampler sampler(cfg);
  const RandomSource src(7);
  const int draws = 200000;
  std::map<std::uint32_t, double> counts;
  for (int r = 0; r < draws; ++r) counts[path_code(sampler(7, 1, src.split(static_cast<std::uint64_t>(r))).s)] += 1;
  ASSERT_EQ(counts.size(), 35u);
  std::vector<double> observed, expected;
  for (auto& [code, count] : counts) {
    observed.push_back(count);
    expected.push_back(draws / 35.0);
  }
  EXPECT_GT(testing_support::chi_square_p_value(observed, expected), 0.001);
  const auto check = check_covariance(
      7, 50000, [&](int r) { return sampler(7, 1, src.split("cov").split(static_cast<std::uint64_t>(r))).y; },
      [](int i, int j) { return static_cast<double>(i) * (7 - j) / 7; });
  EXPECT_LT(check.worst_z, 3.5);
}

// Oracle: Cholesky factor of the bridge covariance, used to compare the law of max |Y|.
TEST(PinnedCoupling, BridgeMaximumMatchesCholeskySampler) {
  const int n = 16, draws = 40000;
  std::vector<double> chol(n * n, 0.0);
  auto cov = [&](int i, int j) { return static_cast<double>(std::min(i, j)) * (n - std::max(i, j)) / n; };
  for (int i = 0; i < n - 1; ++i)
    for (int j = 0; j <= i; ++j) {
      double v = cov(i + 1, j + 1);
      for (int k = 0; k < j; ++k) v -= chol[i * n + k] * chol[j * n + k];
      chol[i * n + j] = i == j ? std::sqrt(v) : v / chol[j * n + j];
    }
  kmt::PinnedCouplingSampler sampler;
  const RandomSource src(88);
  std::vector<double> ours, oracle;
  for (int r = 0; r < draws; ++r) {
    const auto c = sampler(n, 0, src.split(static_cast<std::uint64_t>(r)));
    double m = 0.0;
    for (double v : c.y) m = std::max(m, std::fabs(v));
    ours.push_back(m);
    auto engine = src.split("oracle").engine_for(static_cast<std::uint64_t>(r));
    std::vector<double> g(n - 1);
    for (auto& v : g) v = kmt::draw_standard_normal(engine);
    m = 0.0;
    for (int i = 0; i < n - 1; ++i) {
      double v = 0.0;
      for (int j = 0; j <= i; ++j) v += chol[i * n + j] * g[j];
      m = std::max(m, std::fabs(v));
    }
    oracle.push_back(m);
  }
  std::sort(ours.begin(), ours.end());
  std::sort(oracle.begin(), oracle.end());
  // Two-sample Kolmogorov-Smirnov at alpha = 0.001: c(alpha) = 1.949.
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < ours.size() && j < oracle.size()) {
    if (ours[i] <= oracle[j]) ++i; else ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) - static_cast<double>(j)) / draws);
  }
  EXPECT_LT(d, 1.949 * std::sqrt(2.0 / draws));
}

TEST(WalkCoupling, OneStepIsSignOfGaussian) {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const auto c = kmt::sample_walk_coupling(1, {}, RandomSource(seed));
    ASSERT_EQ(c.walk[1], c.gauss[1] > 0 ? 1 : -1);
  }
}

TEST(WalkCoupling, EndpointEqualsTopGaussian) {
  const RandomSource src(31);
  const auto c = kmt::sample_walk_coupling(100, {}, src);
  const kmt::WalkEndpointLaw law(100);
  auto engine = kmt::CounterEngine(kmt::detail::child_key(src.key(), kmt::kEndpointLabel));
  const auto top = kmt::quantile_couple_binomial(law, engine);
  EXPECT_EQ(c.gauss[100], top.z);
  EXPECT_EQ(c.walk.endpoint(), top.s);
}

TEST(WalkCoupling, CovarianceIsWalkCovariance) {
  kmt::WalkCouplingSampler sampler;
  const RandomSource src(8);
  const auto check = check_covariance(
      8, 100000,
      [&](int r) {
        const auto c = sampler.walk(8, src.split(static_cast<std::uint64_t>(r)));
        return std::vector<double>(c.gauss.values().begin(), c.gauss.values().end());
      },
      [](int i, int j) { return static_cast<double>(std::min(i, j)); });
  EXPECT_LT(check.worst_z, 3.0) << "pair (" << check.worst_i << "," << check.worst_j << ")";
}

TEST(WalkCoupling, IncrementsAreIidSigns) {
  kmt::WalkCouplingSampler sampler;
  const RandomSource src(9);
  const int draws = 100000;
  std::vector<double> observed(256, 0.0), expected(256, draws / 256.0);
  for (int r = 0; r < draws; ++r) observed[path_code(sampler.walk(8, src.split(static_cast<std::uint64_t>(r))).walk.values())] += 1;
  EXPECT_GT(testing_support::chi_square_p_value(observed, expected), 0.001);
}

TEST(BlockSchedule, DoublingBoundaries) {
  const kmt::BlockSchedule s20(20);
  EXPECT_EQ(s20.boundaries, (std::vector<std::int64_t>{4, 16}));
  EXPECT_EQ(s20.lengths, (std::vector<std::int64_t>{4, 12, 4}));
  const kmt::BlockSchedule s4(4);
  EXPECT_EQ(s4.boundaries, (std::vector<std::int64_t>{4}));
  EXPECT_EQ(s4.lengths, (std::vector<std::int64_t>{4}));
  const kmt::BlockSchedule s3(3);
  EXPECT_TRUE(s3.boundaries.empty());
  EXPECT_EQ(s3.lengths, (std::vector<std::int64_t>{3}));
  const kmt::BlockSchedule big(std::int64_t{1} << 20);
  EXPECT_EQ(big.boundaries, (std::vector<std::int64_t>{4, 16, 256, 65536}));
  EXPECT_EQ(big.lengths.back(), (std::int64_t{1} << 20) - 65536);
  EXPECT_THROW(kmt::BlockSchedule(0), kmt::DomainError);
}

TEST(InfiniteCoupling, SingleBlockHorizonBehavesLikeWalkCoupling) {
  kmt::WalkCouplingSampler sampler;
  const RandomSource src(10);
  const int draws = 100000;
  std::vector<double> observed(16, 0.0), expected(16, draws / 16.0);
  for (int r = 0; r < draws; ++r) observed[path_code(sampler.infinite(4, src.split(static_cast<std::uint64_t>(r))).walk.values())] += 1;
  EXPECT_GT(testing_support::chi_square_p_value(observed, expected), 0.001);
  const auto check = check_covariance(
      4, 100000,
      [&](int r) {
        const auto c = sampler.infinite(4, src.split("cov").split(static_cast<std::uint64_t>(r)));
        return std::vector<double>(c.gauss.values().begin(), c.gauss.values().end());
      },
      [](int i, int j) { return static_cast<double>(std::min(i, j)); });
  EXPECT_LT(check.worst_z, 3.0);
}

TEST(InfiniteCoupling, IncrementsAcrossBlockBoundariesAreIid) {
  kmt::WalkCouplingSampler sampler;
  const RandomSource src(300);
  const int draws = 100000;
  const std::vector<int> windows{0, 12, 252, 292};
  std::vector<std::vector<double>> observed(windows.size(), std::vector<double>(256, 0.0));
  for (int r = 0; r < draws; ++r) {
    const auto c = sampler.infinite(300, src.split(static_cast<std::uint64_t>(r)));
    for (std::size_t w = 0; w < windows.size(); ++w)
      observed[w][path_code(c.walk.values().subspan(static_cast<std::size_t>(windows[w]), 9))] += 1;
  }
  const std::vector<double> expected(256, draws / 256.0);
  for (std::size_t w = 0; w < windows.size(); ++w)
    EXPECT_GT(testing_support::chi_square_p_value(observed[w], expected), 0.001) << "window at " << windows[w];
}

TEST(InfiniteCoupling, PrefixOfLongerHorizonRepeatsCompleteBlocks) {
  const RandomSource src(12);
  const auto short_run = kmt::sample_infinite_coupling(16, {}, src);
  const auto long_run = kmt::sample_infinite_coupling(300, {}, src);
  for (std::size_t i = 0; i <= 16; ++i) {
    ASSERT_EQ(short_run.walk[i], long_run.walk[i]);
    ASSERT_EQ(short_run.gauss[i], long_run.gauss[i]);
  }
  // A partial final block is resampled at its own length, so only complete blocks carry over.
  const auto mid_run = kmt::sample_infinite_coupling(20, {}, src);
  for (std::size_t i = 0; i <= 16; ++i) ASSERT_EQ(mid_run.gauss[i], long_run.gauss[i]);
}

TEST(MaxDeviation, Examples) {
  const std::vector<double> a{0.0, 1.0, 2.0}, b{0.0, 0.5, 2.5};
  EXPECT_EQ(kmt::max_deviation(a, a), 0.0);
  EXPECT_EQ(kmt::max_deviation(a, b), 0.5);
  EXPECT_THROW(kmt::max_deviation(a, std::vector<double>{0.0, 1.0}), kmt::DomainError);
}

TEST(MaxDeviation, AgreesWithIndependentScan) {
  const auto c = kmt::sample_walk_coupling(1 << 10, {}, RandomSource(1024));
  std::vector<double> diffs;
  for (std::size_t i = 0; i < c.walk.values().size(); ++i) diffs.push_back(std::fabs(c.walk[i] - c.gauss[i]));
  EXPECT_EQ(kmt::max_deviation(c), *std::max_element(diffs.begin(), diffs.end()));
}

}  // namespace
