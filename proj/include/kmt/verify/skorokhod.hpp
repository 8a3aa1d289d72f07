#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "kmt/core/errors.hpp"
#include "kmt/core/normal.hpp"
#include "kmt/core/random.hpp"
#include "kmt/core/types.hpp"

namespace kmt {

/// First-exit law of Brownian motion from (-1, 1) started at 0, and the law of
/// its position at a fixed time given no exit yet. Times are in units where the
/// interval has half-width 1; scale by d^2 for half-width d.
namespace exit_law {

inline constexpr double kSeriesSwitch = 0.5;

/// P(tau <= s) from the image series; accurate for small s.
inline double cdf_small(double s) {
  double sum = 0.0;
  for (int k = 0; k < 12; ++k) {
    const double term = std::erfc((2.0 * k + 1.0) / std::sqrt(2.0 * s));
    sum += (k % 2 == 0 ? term : -term);
    if (term < 1e-300) break;
  }
  return 2.0 * sum;
}

/// P(tau > s) from the eigenfunction series; accurate for large s.
inline double sf_large(double s) {
  const double c = std::numbers::pi * std::numbers::pi / 8.0;
  double sum = 0.0;
  for (int k = 0; k < 12; ++k) {
    const double m = 2.0 * k + 1.0;
    const double term = std::exp(-m * m * c * s) / m;
    sum += (k % 2 == 0 ? term : -term);
    if (term < 1e-300) break;
  }
  return 4.0 / std::numbers::pi * sum;
}

inline double cdf(double s) {
  if (s <= 0.0) return 0.0;
  return s < kSeriesSwitch ? cdf_small(s) : 1.0 - sf_large(s);
}

inline double sf(double s) {
  if (s <= 0.0) return 1.0;
  return s < kSeriesSwitch ? 1.0 - cdf_small(s) : sf_large(s);
}

inline double density(double s) {
  if (s <= 0.0) return 0.0;
  double sum = 0.0;
  if (s < kSeriesSwitch) {
    const double scale = 1.0 / std::sqrt(2.0 * std::numbers::pi * s * s * s);
    for (int k = 0; k < 12; ++k) {
      const double m = 2.0 * k + 1.0;
      const double term = m * std::exp(-m * m / (2.0 * s));
      sum += (k % 2 == 0 ? term : -term);
    }
    return 2.0 * scale * sum;
  }
  const double c = std::numbers::pi * std::numbers::pi / 8.0;
  for (int k = 0; k < 12; ++k) {
    const double m = 2.0 * k + 1.0;
    const double term = m * std::exp(-m * m * c * s);
    sum += (k % 2 == 0 ? term : -term);
  }
  return std::numbers::pi / 2.0 * sum;
}

/// Exit time with P(tau <= t) = u, solved in the tail that keeps u exact.
inline double quantile(double u) {
  detail::require(u > 0.0 && u < 1.0, "exit_law::quantile: u must lie in (0,1)");
  const bool lower = u <= 0.5;
  const double target = lower ? u : 1.0 - u;
  auto f = [&](double t) {
    const double value = lower ? cdf(t) - target : target - sf(t);
    return std::make_pair(value, density(t));
  };
  // Median is about 0.76; the bracket covers u in [1e-300, 1 - 1e-300].
  std::uintmax_t iterations = 200;
  return boost::math::tools::newton_raphson_iterate(f, 0.76, 1e-4, 600.0, 50, iterations);
}

/// Sub-probability density of B_s on (-1, 1) killed at the boundary, via images.
inline double killed_density_small(double y, double s) {
  double sum = 0.0;
  for (int m = -3; m <= 3; ++m) {
    const double term = std::exp(-(y - 2.0 * m) * (y - 2.0 * m) / (2.0 * s));
    sum += (m % 2 == 0 ? term : -term);
  }
  return sum / std::sqrt(2.0 * std::numbers::pi * s);
}

/// Same density via the odd cosine modes.
inline double killed_density_large(double y, double s) {
  const double c = std::numbers::pi * std::numbers::pi / 8.0;
  double sum = 0.0;
  for (int k = 0; k < 12; ++k) {
    const double m = 2.0 * k + 1.0;
    sum += std::cos(m * std::numbers::pi * y / 2.0) * std::exp(-m * m * c * s);
  }
  return sum;
}

/// Position at time s of Brownian motion from 0 conditioned on staying in (-1, 1).
inline double sample_killed_position(double s, CounterEngine& engine) {
  if (s < kSeriesSwitch) {
    // Proposal N(0, s) truncated to (-1, 1); accept with density / proposal <= 1.
    const double sd = std::sqrt(s);
    for (;;) {
      const double y = sd * draw_standard_normal(engine);
      if (std::fabs(y) >= 1.0) continue;
      double ratio = 0.0;
      for (int m = -3; m <= 3; ++m) {
        const double term = std::exp(-2.0 * m * (m - y) / s);
        ratio += (m % 2 == 0 ? term : -term);
      }
      if (engine.uniform() < ratio) return y;
    }
  }
  // Proposal cos(pi y / 2) / 2; higher modes enter through T_m(c) / c, a polynomial in c.
  const double decay = std::numbers::pi * std::numbers::pi * s / 8.0;
  double bound = 1.0;
  for (int k = 1; k < 12; ++k) {
    const double m = 2.0 * k + 1.0;
    bound += m * std::exp(-(m * m - 1.0) * decay);
  }
  for (;;) {
    const double y = 2.0 / std::numbers::pi * std::asin(2.0 * engine.uniform() - 1.0);
    const double c = std::cos(std::numbers::pi * y / 2.0);
    double prev = 1.0, cur = 1.0, ratio = 1.0;
    for (int k = 1; k < 12; ++k) {
      const double m = 2.0 * k + 1.0;
      const double next = (4.0 * c * c - 2.0) * cur - prev;
      prev = cur;
      cur = next;
      ratio += cur * std::exp(-(m * m - 1.0) * decay);
    }
    if (engine.uniform() * bound < ratio) return y;
  }
}

}  // namespace exit_law

/// Walk and Brownian path from successive first exits of [c-1, c+1].
struct SkorokhodSample {
  WalkPath walk;
  GaussianPath gauss;
  std::vector<double> exit_times;  // tau_1 < ... < tau_n
};

/// Default safety budget on Brownian time per step (E tau_n = n).
inline constexpr double kSkorokhodTimeBudget = 64.0;

namespace detail {

inline void skorokhod_budget_exceeded(std::int64_t n, std::int64_t exits, double t) {
  throw RareEventError("skorokhod_couple: only " + std::to_string(exits) + " of " + std::to_string(n) +
                       " exits by Brownian time " + std::to_string(t));
}

/// Exact sampler: alternate spheres (intervals around the current point reaching
/// the nearest barrier) with stops at integer times.
inline SkorokhodSample skorokhod_exact(std::int64_t n, double budget, CounterEngine& engine) {
  std::vector<std::int64_t> s(static_cast<std::size_t>(n + 1), 0);
  std::vector<double> b(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> exits;
  exits.reserve(static_cast<std::size_t>(n));
  double t = 0.0, x = 0.0;
  std::int64_t center = 0, next_time = 1;
  while (static_cast<std::int64_t>(exits.size()) < n) {
    if (t > budget) skorokhod_budget_exceeded(n, static_cast<std::int64_t>(exits.size()), t);
    const double offset = x - static_cast<double>(center);
    const double d = 1.0 - std::fabs(offset);
    if (d < 1e-13) {
      center += offset > 0.0 ? 1 : -1;
      x = static_cast<double>(center);
      exits.push_back(t);
      s[exits.size()] = center;
      continue;
    }
    const double horizon = next_time <= n ? static_cast<double>(next_time) - t : INFINITY;
    const double scaled = horizon / (d * d);
    const double u = engine.uniform();
    if (!(scaled < INFINITY) || u < exit_law::cdf(scaled)) {
      t += d * d * std::min(exit_law::quantile(u), scaled);
      x += engine.uniform() < 0.5 ? -d : d;
      continue;
    }
    x += d * exit_law::sample_killed_position(scaled, engine);
    t = static_cast<double>(next_time);
    b[static_cast<std::size_t>(next_time)] = x;
    ++next_time;
  }
  for (; next_time <= n; ++next_time) {
    const double step = static_cast<double>(next_time) - t;
    x += std::sqrt(step) * draw_standard_normal(engine);
    t = static_cast<double>(next_time);
    b[static_cast<std::size_t>(next_time)] = x;
  }
  return {WalkPath(std::move(s)), GaussianPath(std::move(b), CovarianceKind::walk), std::move(exits)};
}

/// Euler-grid sampler: exits are detected at grid points, so a path overshoots by O(sqrt(dt)).
inline SkorokhodSample skorokhod_grid(std::int64_t n, double dt, double budget, CounterEngine& engine) {
  const auto per_unit = static_cast<std::int64_t>(std::llround(1.0 / dt));
  detail::require(per_unit >= 1 && std::fabs(static_cast<double>(per_unit) * dt - 1.0) < 1e-9,
                  "skorokhod_couple: 1/dt must be an integer");
  const auto max_steps = static_cast<std::int64_t>(budget * static_cast<double>(per_unit));
  const double sd = std::sqrt(dt);
  std::vector<std::int64_t> s(static_cast<std::size_t>(n + 1), 0);
  std::vector<double> b(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> exits;
  double x = 0.0;
  std::int64_t center = 0;
  for (std::int64_t step = 1;; ++step) {
    if (step > max_steps && static_cast<std::int64_t>(exits.size()) < n)
      skorokhod_budget_exceeded(n, static_cast<std::int64_t>(exits.size()), static_cast<double>(step) * dt);
    x += sd * draw_standard_normal(engine);
    if (step % per_unit == 0 && step / per_unit <= n) b[static_cast<std::size_t>(step / per_unit)] = x;
    if (static_cast<std::int64_t>(exits.size()) < n && std::fabs(x - static_cast<double>(center)) >= 1.0) {
      center += x > static_cast<double>(center) ? 1 : -1;
      exits.push_back(static_cast<double>(step) * dt);
      s[exits.size()] = center;
    }
    if (static_cast<std::int64_t>(exits.size()) == n && step >= n * per_unit) break;
  }
  return {WalkPath(std::move(s)), GaussianPath(std::move(b), CovarianceKind::walk), std::move(exits)};
}

}  // namespace detail

/// Skorokhod-embedding baseline: the walk steps to c +- 1 when Brownian motion
/// first leaves [c-1, c+1], and the Gaussian side is Brownian motion at integer times.
///
/// dt = 0 samples exit times and integer-time positions exactly; dt in (0, 1e-3]
/// runs an Euler grid with that step instead. Throws RareEventError when n exits
/// have not happened by Brownian time time_budget * (n + 1).
inline SkorokhodSample skorokhod_couple(std::int64_t n, double dt, const RandomSource& src,
                                        double time_budget = kSkorokhodTimeBudget) {
  detail::require(n >= 1, "skorokhod_couple: n must be positive");
  detail::require(dt == 0.0 || (dt > 0.0 && dt <= 1e-3), "skorokhod_couple: dt must be 0 (exact) or in (0, 1e-3]");
  detail::require(time_budget > 0.0, "skorokhod_couple: time_budget must be positive");
  const double budget = time_budget * static_cast<double>(n + 1);
  auto engine = src.engine();
  return dt == 0.0 ? detail::skorokhod_exact(n, budget, engine) : detail::skorokhod_grid(n, dt, budget, engine);
}

/// Walk and Gaussian random walk drawn independently: iid signs beside iid N(0,1) increments.
inline std::pair<WalkPath, GaussianPath> independent_couple(std::int64_t n, const RandomSource& src) {
  detail::require(n >= 1, "independent_couple: n must be positive");
  auto engine = src.engine();
  std::vector<std::int64_t> s(static_cast<std::size_t>(n + 1), 0);
  std::vector<double> y(static_cast<std::size_t>(n + 1), 0.0);
  for (std::size_t i = 1; i < s.size(); ++i) {
    s[i] = s[i - 1] + (engine.uniform() < 0.5 ? -1 : 1);
    y[i] = y[i - 1] + draw_standard_normal(engine);
  }
  return {WalkPath(std::move(s)), GaussianPath(std::move(y), CovarianceKind::walk)};
}

}  // namespace kmt
