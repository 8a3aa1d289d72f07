#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "kmt/core/normal.hpp"
#include "kmt/core/parallel.hpp"
#include "kmt/core/random.hpp"
#include "kmt/core/types.hpp"
#include "kmt/onestep/lattice_law.hpp"

namespace kmt {

/// A walk value coupled to a Gaussian value. `w` is the walk value minus its
/// conditional mean (equal to `s` for the unconditioned endpoint law).
struct CoupledPair {
  std::int64_t s = 0;
  double z = 0.0;
  double w = 0.0;
};

/// Monotone quantile coupling driven by a single uniform u:
/// z = sigma * Phi^{-1}(u) and s = G^{-1}(u), with G the law's CDF.
template <class Law>
CoupledPair couple_at_uniform(const Law& law, double u) {
  CoupledPair pair;
  pair.z = law.sigma() * standard_normal_quantile(u);
  pair.s = law.law().quantile(u);
  pair.w = static_cast<double>(pair.s) - law.center();
  return pair;
}

/// Deterministic form of the coupling given the Gaussian coordinate:
/// s = G^{-1}(Phi(z / sigma)), evaluated through the tail that holds Phi exactly.
template <class Law>
CoupledPair couple_at_gaussian(const Law& law, double z) {
  const double x = z / law.sigma();
  CoupledPair pair;
  pair.z = z;
  pair.s = x <= 0.0 ? law.law().quantile(std::max(normal_cdf(x), std::numeric_limits<double>::denorm_min()))
                    : law.law().quantile_upper(normal_sf(x));
  pair.w = static_cast<double>(pair.s) - law.center();
  return pair;
}

/// Couple S_n (sum of n fair signs) with Z ~ N(0, n).
inline CoupledPair quantile_couple_binomial(const WalkEndpointLaw& law, CounterEngine& engine) {
  return couple_at_uniform(law, engine.uniform());
}

inline CoupledPair quantile_couple_binomial(std::int64_t n, const RandomSource& src) {
  const WalkEndpointLaw law(n);
  auto engine = src.engine();
  return quantile_couple_binomial(law, engine);
}

/// Couple S_k | S_n = a with Z ~ N(0, k(n-k)/n).
inline CoupledPair quantile_couple_conditional(const ConditionalWalkLaw& law, CounterEngine& engine) {
  return couple_at_uniform(law, engine.uniform());
}

inline CoupledPair quantile_couple_conditional(const ConditionalWalkLaw& law, const RandomSource& src) {
  auto engine = src.engine();
  return quantile_couple_conditional(law, engine);
}

enum class OneStepCoupler { binomial, conditional };

namespace detail {

/// Mean and jackknife standard error of exp(theta * d) over the samples.
/// For a sample mean the jackknife SE reduces to s / sqrt(N).
inline GridEstimate exp_moment_point(std::span<const double> distances, double theta) {
  GridEstimate point;
  point.parameter = theta;
  const double count = static_cast<double>(distances.size());
  double mean = 0.0, m2 = 0.0, seen = 0.0;
  for (double d : distances) {
    const double v = std::exp(theta * d);
    if (!std::isfinite(v)) {
      point.failed = true;
      point.failure = "overflow in exp(theta*|d|)";
      return point;
    }
    seen += 1.0;
    const double delta = v - mean;
    mean += delta / seen;
    m2 += delta * (v - mean);
  }
  point.estimate = mean;
  point.standard_error = count > 1 ? std::sqrt(m2 / (count - 1.0) / count) : 0.0;
  if (!std::isfinite(point.estimate) || !std::isfinite(point.standard_error)) {
    point.failed = true;
    point.failure = "non-finite estimate";
  }
  return point;
}

}  // namespace detail

/// Monte-Carlo estimate of E exp(theta |W - Z|) for a one-step coupling, per theta.
///
/// `binomial` couples S_n with N(0,n) (k and a ignored); `conditional` couples
/// W_k = S_k - ka/n given S_n = a with N(0, k(n-k)/n). Replicate i uses
/// stream src.split(i), so results do not depend on `threads`.
inline CouplingReport exp_moment_estimate(OneStepCoupler kind, std::int64_t n, std::int64_t k, std::int64_t a,
                                          std::span<const double> thetas, std::int64_t replicates,
                                          const RandomSource& src, int threads = 1) {
  detail::require(replicates >= 1000, "exp_moment_estimate: need at least 1000 replicates");
  const auto start = std::chrono::steady_clock::now();
  std::vector<double> distances;
  if (kind == OneStepCoupler::binomial) {
    const WalkEndpointLaw law(n);
    distances = run_replicates(replicates, threads, [&](std::int64_t i) {
      auto engine = src.engine_for(static_cast<std::uint64_t>(i));
      const auto pair = quantile_couple_binomial(law, engine);
      return std::fabs(pair.w - pair.z);
    });
  } else {
    const ConditionalWalkLaw law(n, k, a);
    distances = run_replicates(replicates, threads, [&](std::int64_t i) {
      auto engine = src.engine_for(static_cast<std::uint64_t>(i));
      const auto pair = quantile_couple_conditional(law, engine);
      return std::fabs(pair.w - pair.z);
    });
  }
  CouplingReport report;
  report.label = kind == OneStepCoupler::binomial
                     ? "binomial n=" + std::to_string(n)
                     : "conditional n=" + std::to_string(n) + " k=" + std::to_string(k) + " a=" + std::to_string(a);
  report.replicates = replicates;
  for (double theta : thetas) report.points.push_back(detail::exp_moment_point(distances, theta));
  report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace kmt
