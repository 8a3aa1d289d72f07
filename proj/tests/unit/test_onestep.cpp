#include <gtest/gtest.h>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <map>
#include <vector>

#include "kmt/core/normal.hpp"
#include "kmt/onestep/coupling.hpp"
#include "kmt/onestep/lattice_law.hpp"
#include "support.hpp"

namespace {

using kmt::ConditionalWalkLaw;
using kmt::RandomSource;
using kmt::WalkEndpointLaw;

TEST(ConditionalLaw, FourStepsPinnedAtZero) {
  const auto law = kmt::conditional_law(4, 2, 0);
  EXPECT_EQ(law.support(), (std::vector<std::int64_t>{-2, 0, 2}));
  const auto pmf = law.pmf();
  ASSERT_EQ(pmf.size(), 3u);
  EXPECT_NEAR(pmf[0], 1.0 / 6, 1e-15);
  EXPECT_NEAR(pmf[1], 4.0 / 6, 1e-15);
  EXPECT_NEAR(pmf[2], 1.0 / 6, 1e-15);
}

TEST(ConditionalLaw, ForcedPath) {
  const auto law = kmt::conditional_law(2, 1, 2);
  EXPECT_EQ(law.support(), (std::vector<std::int64_t>{1}));
  EXPECT_EQ(law.pmf(), (std::vector<double>{1.0}));
}

TEST(ConditionalLaw, MatchesEnumerationAtTwenty) {
  const auto counts = testing_support::enumerate_paths(20, 10);
  const auto law = kmt::conditional_law(20, 10, 0);
  const double total = 184756.0;
  double mass = 0.0;
  for (std::int64_t s = -10; s <= 10; s += 2) {
    const auto it = counts.find({static_cast<int>(s), 0});
    const double expected = it == counts.end() ? 0.0 : it->second / total;
    EXPECT_NEAR(law.law().pmf(s), expected, 1e-12) << "s=" << s;
    mass += law.law().pmf(s);
  }
  EXPECT_NEAR(mass, 1.0, 1e-12);
}

TEST(ConditionalLaw, SupportMatchesFeasibilityRule) {
  for (std::int64_t n = 2; n <= 14; ++n)
    for (std::int64_t k = 1; k < n; ++k)
      for (std::int64_t a = -n; a <= n; a += 2) {
        const auto law = kmt::conditional_law(n, k, a);
        std::vector<std::int64_t> expected;
        for (std::int64_t s = -k; s <= k; s += 2) {
          if (std::llabs(a - s) <= n - k) expected.push_back(s);
        }
        ASSERT_EQ(law.support(), expected) << n << " " << k << " " << a;
      }
}

TEST(ConditionalLaw, LogPathCountsAreLogBinomials) {
  const auto law = kmt::conditional_law(10, 4, 2);
  const auto logs = law.log_path_counts();
  const auto support = law.support();
  for (std::size_t i = 0; i < support.size(); ++i) {
    const double direct = std::log(boost::math::binomial_coefficient<double>(4, static_cast<unsigned>((4 + support[i]) / 2)) *
                                   boost::math::binomial_coefficient<double>(6, static_cast<unsigned>((6 + 2 - support[i]) / 2)));
    EXPECT_NEAR(logs[i], direct, 1e-12);
  }
}

TEST(ConditionalLaw, RejectsInfeasibleInputs) {
  EXPECT_THROW(kmt::conditional_law(4, 2, 1), kmt::DomainError);
  EXPECT_THROW(kmt::conditional_law(4, 2, 6), kmt::DomainError);
  EXPECT_THROW(kmt::conditional_law(4, 0, 0), kmt::DomainError);
  EXPECT_THROW(kmt::conditional_law(4, 4, 0), kmt::DomainError);
  EXPECT_THROW(kmt::conditional_law(0, 0, 0), kmt::DomainError);
}

TEST(ConditionalLaw, LargeLawHasUnitMassAndStableTails) {
  const auto law = kmt::conditional_law(1 << 20, 1 << 19, 1000);
  double mass = 0.0;
  for (double p : law.pmf()) mass += p;
  EXPECT_NEAR(mass, 1.0, 1e-12);
  EXPECT_NEAR(law.law().sf(law.law().last() - 2), law.law().pmf(law.law().last()), 1e-300);
}

TEST(BinomialCoupling, OneStepSplitsAtMedian) {
  const WalkEndpointLaw law(1);
  EXPECT_EQ(kmt::couple_at_gaussian(law, 0.3).s, 1);
  EXPECT_EQ(kmt::couple_at_gaussian(law, -0.3).s, -1);
  EXPECT_EQ(kmt::couple_at_gaussian(law, 1e-9).s, 1);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto pair = kmt::quantile_couple_binomial(1, RandomSource(seed));
    ASSERT_EQ(pair.s, pair.z > 0 ? 1 : -1);
  }
}

TEST(BinomialCoupling, TwoStepsLowerThreshold) {
  const WalkEndpointLaw law(2);
  const double cut = std::sqrt(2.0) * kmt::standard_normal_quantile(0.25);
  EXPECT_EQ(kmt::couple_at_gaussian(law, cut - 1e-9).s, -2);
  EXPECT_EQ(kmt::couple_at_gaussian(law, cut + 1e-9).s, 0);
  EXPECT_EQ(kmt::couple_at_gaussian(law, -cut + 1e-9).s, 2);
}

TEST(BinomialCoupling, EndpointMarginalMatchesBinomial) {
  const int n = 100, draws = 1000000;
  const WalkEndpointLaw law(n);
  const RandomSource src(2024);
  std::vector<double> observed(n + 1, 0.0), expected(n + 1, 0.0);
  for (int i = 0; i < draws; ++i) {
    auto engine = src.engine_for(static_cast<std::uint64_t>(i));
    const auto pair = kmt::quantile_couple_binomial(law, engine);
    observed[static_cast<std::size_t>((pair.s + n) / 2)] += 1;
  }
  const boost::math::binomial_distribution<double> bin(n, 0.5);
  for (int x = 0; x <= n; ++x) expected[static_cast<std::size_t>(x)] = draws * boost::math::pdf(bin, x);
  EXPECT_GT(testing_support::chi_square_p_value(observed, expected), 0.001);
}

TEST(ConditionalCoupling, FourStepMiddleInterval) {
  const ConditionalWalkLaw law(4, 2, 0);
  const double lo = kmt::standard_normal_quantile(1.0 / 6);
  EXPECT_EQ(kmt::couple_at_gaussian(law, lo - 1e-9).s, -2);
  EXPECT_EQ(kmt::couple_at_gaussian(law, lo + 1e-9).s, 0);
  EXPECT_EQ(kmt::couple_at_gaussian(law, -lo - 1e-9).s, 0);
  EXPECT_EQ(kmt::couple_at_gaussian(law, -lo + 1e-9).s, 2);
  EXPECT_EQ(kmt::couple_at_uniform(law, 1.0 / 6).s, -2);  // ties go to the lower point
}

TEST(ConditionalCoupling, DegenerateLaw) {
  const ConditionalWalkLaw law(2, 1, 2);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto pair = kmt::quantile_couple_conditional(law, RandomSource(seed));
    ASSERT_EQ(pair.s, 1);
    ASSERT_EQ(pair.w, 0.0);
  }
}

TEST(ConditionalCoupling, MarginalMatchesLaw) {
  const int draws = 1000000;
  const ConditionalWalkLaw law(12, 6, 0);
  const RandomSource src(99);
  std::map<std::int64_t, double> counts;
  double z_sum = 0.0, z_sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    auto engine = src.engine_for(static_cast<std::uint64_t>(i));
    const auto pair = kmt::quantile_couple_conditional(law, engine);
    counts[pair.s] += 1;
    z_sum += pair.z;
    z_sq += pair.z * pair.z;
  }
  std::vector<double> observed, expected;
  for (auto s : law.support()) {
    observed.push_back(counts[s]);
    expected.push_back(draws * law.law().pmf(s));
  }
  EXPECT_GT(testing_support::chi_square_p_value(observed, expected), 0.001);
  const double var = z_sq / draws - (z_sum / draws) * (z_sum / draws);
  EXPECT_NEAR(var, 3.0, 3 * 3.0 * std::sqrt(2.0 / draws));
}

TEST(CouplingProperties, MonotoneInGaussianCoordinate) {
  const ConditionalWalkLaw law(101, 40, 7);
  std::int64_t previous = law.law().first();
  for (double z = -200.0; z <= 200.0; z += 0.01) {
    const auto s = kmt::couple_at_gaussian(law, z).s;
    ASSERT_GE(s, previous);
    previous = s;
  }
  EXPECT_EQ(previous, law.law().last());
}

TEST(CouplingProperties, SymmetricForCenteredLaw) {
  const ConditionalWalkLaw law(64, 32, 0);
  for (double z = 0.013; z < 12.0; z += 0.17) {
    ASSERT_EQ(kmt::couple_at_gaussian(law, z).s, -kmt::couple_at_gaussian(law, -z).s) << z;
  }
  const WalkEndpointLaw endpoint(50);
  for (double z = 0.013; z < 40.0; z += 0.31) {
    ASSERT_EQ(kmt::couple_at_gaussian(endpoint, z).s, -kmt::couple_at_gaussian(endpoint, -z).s) << z;
  }
}

TEST(CouplingProperties, UniformAndGaussianFormsAgree) {
  const WalkEndpointLaw law(1000);
  const RandomSource src(5);
  for (std::uint64_t i = 0; i < 2000; ++i) {
    const double u = src.engine_for(i).uniform();
    const auto a = kmt::couple_at_uniform(law, u);
    const auto b = kmt::couple_at_gaussian(law, a.z);
    ASSERT_LE(std::llabs(a.s - b.s), 2);  // only a jump can separate them, at a rounding tie
  }
}

TEST(ExpMomentEstimate, ThetaZeroIsExactlyOne) {
  const std::vector<double> thetas{0.0};
  const auto report = kmt::exp_moment_estimate(kmt::OneStepCoupler::binomial, 1, 0, 0, thetas, 1000, RandomSource(1));
  ASSERT_EQ(report.points.size(), 1u);
  EXPECT_EQ(report.points[0].estimate, 1.0);
  EXPECT_EQ(report.points[0].standard_error, 0.0);
  EXPECT_EQ(report.replicates, 1000);
}

// E exp(|sign(Z) - Z|) = 2 * int_0^inf exp(|1 - z|) phi(z) dz.
TEST(ExpMomentEstimate, OneStepMatchesQuadrature) {
  using boost::math::quadrature::gauss_kronrod;
  auto integrand = [](double z) { return std::exp(std::fabs(1.0 - z)) * kmt::normal_pdf(z); };
  const double exact =
      2.0 * (gauss_kronrod<double, 61>::integrate(integrand, 0.0, 1.0, 15, 1e-13) +
             gauss_kronrod<double, 61>::integrate(integrand, 1.0, 40.0, 15, 1e-13));
  const std::vector<double> thetas{1.0};
  const auto report =
      kmt::exp_moment_estimate(kmt::OneStepCoupler::binomial, 1, 0, 0, thetas, 200000, RandomSource(17));
  EXPECT_LT(std::fabs(report.points[0].estimate - exact), 3 * report.points[0].standard_error)
      << report.points[0].estimate << " vs " << exact;
}

TEST(ExpMomentEstimate, ConditionalKind) {
  const std::vector<double> thetas{0.0, 0.5};
  const auto report =
      kmt::exp_moment_estimate(kmt::OneStepCoupler::conditional, 40, 20, 4, thetas, 5000, RandomSource(3));
  EXPECT_EQ(report.points[0].estimate, 1.0);
  EXPECT_GT(report.points[1].estimate, 1.0);
  EXPECT_FALSE(report.points[1].failed);
}

TEST(ExpMomentEstimate, OverflowIsFlaggedPerPoint) {
  const std::vector<double> thetas{0.1, 1e6};
  const auto report = kmt::exp_moment_estimate(kmt::OneStepCoupler::binomial, 10, 0, 0, thetas, 1000, RandomSource(3));
  EXPECT_FALSE(report.points[0].failed);
  EXPECT_TRUE(report.points[1].failed);
}

TEST(ExpMomentEstimate, RequiresThousandReplicates) {
  const std::vector<double> thetas{0.1};
  EXPECT_THROW(kmt::exp_moment_estimate(kmt::OneStepCoupler::binomial, 10, 0, 0, thetas, 999, RandomSource(3)),
               kmt::DomainError);
}

TEST(ExpMomentEstimate, ThreadCountDoesNotChangeResult) {
  const std::vector<double> thetas{0.2};
  const auto a = kmt::exp_moment_estimate(kmt::OneStepCoupler::binomial, 100, 0, 0, thetas, 4000, RandomSource(8), 1);
  const auto b = kmt::exp_moment_estimate(kmt::OneStepCoupler::binomial, 100, 0, 0, thetas, 4000, RandomSource(8), 8);
  EXPECT_EQ(a.points[0].estimate, b.points[0].estimate);
  EXPECT_EQ(a.points[0].standard_error, b.points[0].standard_error);
}

}  // namespace
