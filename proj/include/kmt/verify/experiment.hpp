#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "kmt/core/errors.hpp"
#include "kmt/core/parallel.hpp"
#include "kmt/core/random.hpp"
#include "kmt/core/types.hpp"
#include "kmt/recursion/walk.hpp"
#include "kmt/verify/skorokhod.hpp"
#include "kmt/verify/statistics.hpp"

namespace kmt {

inline constexpr std::uint64_t kDefaultSeed = 20240601;

enum class Scheme { kmt_recursive, skorokhod, independent };

inline std::string_view scheme_name(Scheme s) noexcept {
  switch (s) {
    case Scheme::kmt_recursive: return "kmt-recursive";
    case Scheme::skorokhod: return "skorokhod";
    case Scheme::independent: return "independent";
  }
  return "unknown";
}

inline Scheme parse_scheme(std::string_view name) {
  for (Scheme s : {Scheme::kmt_recursive, Scheme::skorokhod, Scheme::independent}) {
    if (scheme_name(s) == name) return s;
  }
  throw DomainError("unknown scheme '" + std::string(name) + "' (expected kmt-recursive, skorokhod or independent)");
}

struct ExperimentPlan {
  std::vector<std::int64_t> ns;
  /// One count per n, or a single count used for every n.
  std::vector<std::int64_t> replicates;
  std::vector<double> lambdas;
  std::vector<double> thetas;
  std::uint64_t seed = kDefaultSeed;
  Scheme scheme = Scheme::kmt_recursive;
  double dt = 0.0;  // skorokhod only; 0 selects exact sampling
  int threads = 1;

  std::int64_t replicates_for(std::size_t i) const { return replicates.size() == 1 ? replicates[0] : replicates[i]; }

  void validate() const {
    detail::require(!ns.empty(), "ExperimentPlan: no n values");
    detail::require(std::is_sorted(ns.begin(), ns.end()) && std::adjacent_find(ns.begin(), ns.end()) == ns.end(),
                    "ExperimentPlan: n values must be strictly ascending");
    detail::require(ns.front() >= 1, "ExperimentPlan: n values must be positive");
    detail::require(replicates.size() == 1 || replicates.size() == ns.size(),
                    "ExperimentPlan: need one replicate count or one per n");
    for (auto r : replicates) detail::require(r >= 100, "ExperimentPlan: replicate counts must be >= 100");
    detail::require(dt == 0.0 || (dt > 0.0 && dt <= 1e-3), "ExperimentPlan: dt must be 0 or in (0, 1e-3]");
    detail::require(threads >= 1, "ExperimentPlan: threads must be >= 1");
  }

  /// Stream of replicate r at n: seed/<scheme>/#n/#r.
  RandomSource stream(std::int64_t n) const {
    return RandomSource(seed).split(scheme_name(scheme)).split(static_cast<std::uint64_t>(n));
  }
};

/// max_i |S_i - Y_i| for one draw of the scheme at horizon n.
inline double sample_max_deviation(Scheme scheme, std::int64_t n, double dt, const RandomSource& src) {
  switch (scheme) {
    case Scheme::kmt_recursive: {
      WalkCouplingSampler sampler;
      return max_deviation(sampler.walk(n, src));
    }
    case Scheme::skorokhod: {
      const auto s = skorokhod_couple(n, dt, src);
      return max_deviation(s.walk, s.gauss);
    }
    case Scheme::independent: {
      const auto [walk, gauss] = independent_couple(n, src);
      return max_deviation(walk, gauss);
    }
  }
  throw DomainError("sample_max_deviation: unknown scheme");
}

enum class GrowthModel { linear_in_log_n, power_law };

inline std::string_view model_name(GrowthModel m) noexcept {
  return m == GrowthModel::linear_in_log_n ? "linear-in-log-n" : "power-law";
}

struct Interval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct QuantileRow {
  std::int64_t n = 0;
  std::int64_t replicates = 0;
  double median = 0.0;
  double q90 = 0.0;
  double q99 = 0.0;
  double median_se = 0.0;
  double median_lower = 0.0;
  double median_upper = 0.0;
};

struct TailPoint {
  double x = 0.0;
  double log_tail = 0.0;
  double band_lower = 0.0;
  double band_upper = 0.0;
  double fitted = 0.0;
};

/// log P(max >= median + x) against x, with a simultaneous bootstrap band.
struct TailCheck {
  std::int64_t n = 0;
  double probability_floor = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  double band_multiplier = 0.0;
  std::vector<TailPoint> points;
  bool negative_slope = false;
  bool within_bands = false;
};

struct GrowthFit {
  Scheme scheme = Scheme::kmt_recursive;
  GrowthModel model = GrowthModel::linear_in_log_n;
  /// linear-in-log-n: {c1, c2} in median = c1 log n + c2.
  /// power-law: {exponent, log prefactor} in log median = exponent log n + log prefactor.
  std::vector<Interval> coefficients;
  std::vector<double> residuals;
  double residual_sd = 0.0;
  /// Coefficient of (log n)^2 added to the fitted model; positive means upward curvature.
  Interval curvature;
  /// Slope of median / log n against log n.
  Interval ratio_trend;
  std::vector<QuantileRow> rows;
  std::vector<TailCheck> tails;
  std::vector<std::vector<double>> samples;  // max deviations per n, by replicate index
  double wall_clock_seconds = 0.0;
};

namespace detail {

inline double median_in_place(std::vector<double>& xs) {
  const std::size_t mid = (xs.size() - 1) / 2;
  std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
  const double lo = xs[mid];
  if (xs.size() % 2 == 1) return lo;
  return 0.5 * (lo + *std::min_element(xs.begin() + static_cast<std::ptrdiff_t>(mid) + 1, xs.end()));
}

struct GrowthCoefficients {
  double a = 0.0, b = 0.0, curvature = 0.0, ratio_slope = 0.0;
  std::vector<double> residuals;
  double residual_sd = 0.0;
};

inline GrowthCoefficients fit_growth(GrowthModel model, std::span<const std::int64_t> ns,
                                     std::span<const double> medians) {
  std::vector<double> logn, target, ratio;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double l = std::log(static_cast<double>(ns[i]));
    logn.push_back(l);
    target.push_back(model == GrowthModel::linear_in_log_n ? medians[i] : std::log(medians[i]));
    ratio.push_back(medians[i] / l);
  }
  GrowthCoefficients out;
  const auto fit = stats::least_squares(logn, target);
  out.a = fit.slope;
  out.b = fit.intercept;
  out.residuals = fit.residuals;
  out.residual_sd = fit.residual_sd;
  if (ns.size() >= 3) out.curvature = stats::quadratic_fit(logn, target)[2];
  out.ratio_slope = stats::least_squares(logn, ratio).slope;
  return out;
}

inline double tail_fraction(std::span<const double> sorted, double threshold) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), threshold);
  return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
}

}  // namespace detail

inline constexpr int kTailGridPoints = 16;
inline constexpr double kTailProbabilityFloor = 1e-3;

/// Exponential-tail check at one n. The x grid runs from x_max/16 to x_max, where
/// P(max >= median + x_max) is the floor (at least 1e-3, and at least 10/R).
inline TailCheck tail_check(std::int64_t n, std::span<const double> samples, CounterEngine& engine,
                            int resamples = stats::kBootstrapResamples) {
  detail::require(samples.size() >= 100, "tail_check: need at least 100 samples");
  TailCheck out;
  out.n = n;
  const double count = static_cast<double>(samples.size());
  out.probability_floor = std::max(kTailProbabilityFloor, 10.0 / count);
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double med = stats::sorted_quantile(sorted, 0.5);
  const double x_max = stats::sorted_quantile(sorted, 1.0 - out.probability_floor) - med;
  detail::require(x_max > 0.0, "tail_check: degenerate sample");
  const double floor_log = std::log(0.5 / count);
  std::vector<double> xs, log_tail;
  for (int j = 1; j <= kTailGridPoints; ++j) {
    xs.push_back(x_max * j / kTailGridPoints);
    log_tail.push_back(std::max(floor_log, std::log(detail::tail_fraction(sorted, med + xs.back()))));
  }
  // Bootstrap each curve with its own median, then form a sup-t band.
  std::vector<std::vector<double>> boot(static_cast<std::size_t>(resamples));
  std::vector<double> buffer(samples.size());
  for (auto& curve : boot) {
    const auto idx = stats::resample_indices(samples.size(), engine);
    for (std::size_t i = 0; i < idx.size(); ++i) buffer[i] = samples[idx[i]];
    std::sort(buffer.begin(), buffer.end());
    const double m = stats::sorted_quantile(buffer, 0.5);
    for (double x : xs) curve.push_back(std::max(floor_log, std::log(detail::tail_fraction(buffer, m + x))));
  }
  std::vector<double> sd(xs.size());
  for (std::size_t j = 0; j < xs.size(); ++j) {
    std::vector<double> column;
    for (const auto& curve : boot) column.push_back(curve[j]);
    sd[j] = std::max(stats::mean_se(column).se * std::sqrt(static_cast<double>(resamples)), 1e-12);
  }
  std::vector<double> sup;
  for (const auto& curve : boot) {
    double worst = 0.0;
    for (std::size_t j = 0; j < xs.size(); ++j) worst = std::max(worst, std::fabs(curve[j] - log_tail[j]) / sd[j]);
    sup.push_back(worst);
  }
  out.band_multiplier = stats::quantile(sup, 0.95);
  const auto fit = stats::least_squares(xs, log_tail);
  out.slope = fit.slope;
  out.intercept = fit.intercept;
  out.negative_slope = fit.slope < 0.0;
  out.within_bands = true;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    TailPoint p{xs[j], log_tail[j], log_tail[j] - out.band_multiplier * sd[j],
                log_tail[j] + out.band_multiplier * sd[j], fit(xs[j])};
    out.within_bands = out.within_bands && p.fitted >= p.band_lower && p.fitted <= p.band_upper;
    out.points.push_back(p);
  }
  return out;
}

/// Medians, tail quantiles and growth fit of max deviation across the plan's n values.
///
/// The kmt scheme is fitted as c1 log n + c2 and the others on log-log axes.
/// Intervals are percentile bootstraps that resample replicates within each n.
inline GrowthFit run_deviation_experiment(const ExperimentPlan& plan) {
  plan.validate();
  const auto start = std::chrono::steady_clock::now();
  GrowthFit out;
  out.scheme = plan.scheme;
  out.model = plan.scheme == Scheme::kmt_recursive ? GrowthModel::linear_in_log_n : GrowthModel::power_law;
  auto boot_engine = RandomSource(plan.seed).split(scheme_name(plan.scheme)).split("bootstrap").engine();

  std::vector<double> medians;
  for (std::size_t i = 0; i < plan.ns.size(); ++i) {
    const std::int64_t n = plan.ns[i];
    const RandomSource src = plan.stream(n);
    auto samples = run_replicates(plan.replicates_for(i), plan.threads, [&](std::int64_t r) {
      return sample_max_deviation(plan.scheme, n, plan.dt, src.split(static_cast<std::uint64_t>(r)));
    });
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    QuantileRow row;
    row.n = n;
    row.replicates = plan.replicates_for(i);
    row.median = stats::sorted_quantile(sorted, 0.5);
    row.q90 = stats::sorted_quantile(sorted, 0.9);
    row.q99 = stats::sorted_quantile(sorted, 0.99);
    const auto boot = stats::bootstrap(samples, stats::median_of, boot_engine);
    row.median_se = boot.se;
    row.median_lower = boot.lower;
    row.median_upper = boot.upper;
    out.rows.push_back(row);
    medians.push_back(row.median);
    out.samples.push_back(std::move(samples));
  }

  for (std::size_t i = 0; i < plan.ns.size(); ++i) out.tails.push_back(tail_check(plan.ns[i], out.samples[i], boot_engine));

  if (plan.ns.size() >= 2) {
    const auto point = detail::fit_growth(out.model, plan.ns, medians);
    out.residuals = point.residuals;
    out.residual_sd = point.residual_sd;
    std::vector<double> a, b, curv, trend;
    std::vector<double> boot_medians(plan.ns.size()), buffer;
    for (int rep = 0; rep < stats::kBootstrapResamples; ++rep) {
      for (std::size_t i = 0; i < plan.ns.size(); ++i) {
        const auto& xs = out.samples[i];
        const auto idx = stats::resample_indices(xs.size(), boot_engine);
        buffer.resize(xs.size());
        for (std::size_t j = 0; j < idx.size(); ++j) buffer[j] = xs[idx[j]];
        boot_medians[i] = detail::median_in_place(buffer);
      }
      const auto g = detail::fit_growth(out.model, plan.ns, boot_medians);
      a.push_back(g.a);
      b.push_back(g.b);
      curv.push_back(g.curvature);
      trend.push_back(g.ratio_slope);
    }
    auto interval = [](double estimate, std::vector<double> reps) {
      std::sort(reps.begin(), reps.end());
      return Interval{estimate, stats::sorted_quantile(reps, 0.025), stats::sorted_quantile(reps, 0.975)};
    };
    out.coefficients = {interval(point.a, a), interval(point.b, b)};
    out.curvature = interval(point.curvature, curv);
    out.ratio_trend = interval(point.ratio_slope, trend);
  }
  out.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace kmt
