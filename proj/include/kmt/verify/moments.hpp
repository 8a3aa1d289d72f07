#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kmt/core/errors.hpp"
#include "kmt/core/parallel.hpp"
#include "kmt/core/random.hpp"
#include "kmt/core/types.hpp"
#include "kmt/onestep/coupling.hpp"
#include "kmt/recursion/pinned.hpp"
#include "kmt/recursion/walk.hpp"
#include "kmt/verify/statistics.hpp"

namespace kmt {

inline constexpr double kMaxLambda = 0.5;

/// Monte-Carlo estimate of E exp(lambda max_i |W_i - Y_i|) for the pinned coupling at endpoint a.
/// Replicate r uses stream src/#r.
inline CouplingReport estimate_exp_max_moment(std::int64_t n, std::int64_t a, std::span<const double> lambdas,
                                              std::int64_t replicates, const RandomSource& src, int threads = 1,
                                              const BridgeCouplingConfig& cfg = {}) {
  detail::require(replicates >= 1000, "estimate_exp_max_moment: need at least 1000 replicates");
  for (double l : lambdas) {
    detail::require(l >= 0.0 && l <= kMaxLambda, "estimate_exp_max_moment: lambda must lie in [0, 0.5]");
  }
  detail::require(ConditionalWalkLaw::feasible(n, a), "estimate_exp_max_moment: infeasible (n=" + std::to_string(n) +
                                                          ", a=" + std::to_string(a) + ")");
  const auto start = std::chrono::steady_clock::now();
  const auto distances = run_replicates(replicates, threads, [&](std::int64_t r) {
    PinnedCouplingSampler sampler(cfg);
    return max_deviation(sampler(n, a, src.split(static_cast<std::uint64_t>(r))));
  });
  CouplingReport report;
  report.label = "pinned max n=" + std::to_string(n) + " a=" + std::to_string(a);
  report.replicates = replicates;
  for (double l : lambdas) report.points.push_back(detail::exp_moment_point(distances, l));
  report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/// log(estimate) / log(n) per grid point; NaN for failed points.
inline std::vector<double> log_estimate_over_log_n(const CouplingReport& report, std::int64_t n) {
  detail::require(n >= 2, "log_estimate_over_log_n: need n >= 2");
  std::vector<double> out;
  for (const auto& p : report.points) {
    out.push_back(p.failed ? std::nan("") : std::log(p.estimate) / std::log(static_cast<double>(n)));
  }
  return out;
}

struct SweepPoint {
  std::int64_t a = 0;
  double a2_over_n = 0.0;
  double log_estimate = 0.0;
  double log_se = 0.0;  // delta method: se / estimate
};

/// log E exp(lambda max|W - Y|) against a^2/n across endpoints at fixed n.
struct EndpointSweep {
  std::int64_t n = 0;
  double lambda = 0.0;
  std::vector<SweepPoint> points;
  stats::LinearFit fit;
  /// slope / lambda^2, an empirical analogue of the a^2/n coefficient.
  double implied_k = 0.0;
};

inline EndpointSweep fit_endpoint_sweep(std::int64_t n, std::span<const std::int64_t> endpoints, double lambda,
                                        std::int64_t replicates, const RandomSource& src, int threads = 1) {
  detail::require(endpoints.size() >= 2, "fit_endpoint_sweep: need at least two endpoints");
  detail::require(lambda > 0.0, "fit_endpoint_sweep: lambda must be positive");
  EndpointSweep out;
  out.n = n;
  out.lambda = lambda;
  std::vector<double> x, y;
  const double grid[] = {lambda};
  for (auto a : endpoints) {
    const auto report = estimate_exp_max_moment(n, a, grid, replicates, src.split(static_cast<std::uint64_t>(a + n)),
                                                threads);
    const auto& p = report.points.front();
    if (p.failed) throw EstimationFailure("fit_endpoint_sweep: " + p.failure + " at a=" + std::to_string(a));
    SweepPoint sp{a, static_cast<double>(a * a) / static_cast<double>(n), std::log(p.estimate),
                  p.standard_error / p.estimate};
    x.push_back(sp.a2_over_n);
    y.push_back(sp.log_estimate);
    out.points.push_back(sp);
  }
  out.fit = stats::least_squares(x, y);
  out.implied_k = out.fit.slope / (lambda * lambda);
  return out;
}

}  // namespace kmt
