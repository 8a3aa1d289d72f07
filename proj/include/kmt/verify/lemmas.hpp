#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "kmt/core/errors.hpp"
#include "kmt/core/random.hpp"
#include "kmt/core/types.hpp"
#include "kmt/onestep/lattice_law.hpp"
#include "kmt/verify/statistics.hpp"

namespace kmt {

/// A moment estimate beside the bound it should respect.
struct MomentCheck {
  double estimate = 0.0;
  double standard_error = 0.0;
  double bound = 0.0;
  /// estimate <= bound + 3 SE (exact checks have SE = 0).
  bool holds = false;
};

/// E exp(4 theta^2 S_n^2 / n) summed exactly over the binomial law, against (1 - 16 theta^2)^{-1/2}.
inline MomentCheck endpoint_square_moment_exact(std::int64_t n, double theta) {
  detail::require(n >= 1, "endpoint_square_moment_exact: n must be positive");
  detail::require(16.0 * theta * theta < 1.0, "endpoint_square_moment_exact: need 16 theta^2 < 1");
  const double dn = static_cast<double>(n);
  const double c = 4.0 * theta * theta / dn;
  double sum = 0.0;
  for (std::int64_t up = 0; up <= n; ++up) {
    const double s = static_cast<double>(2 * up - n);
    sum += std::exp(log_path_count(n, 2 * up - n) - dn * std::log(2.0) + c * s * s);
  }
  MomentCheck out;
  out.estimate = sum;
  out.bound = 1.0 / std::sqrt(1.0 - 16.0 * theta * theta);
  out.holds = out.estimate <= out.bound;
  return out;
}

namespace detail {

/// S_k for the first k entries of a uniformly shuffled arrangement of n signs summing to a.
inline std::int64_t exchangeable_partial_sum(std::vector<int>& signs, std::int64_t k, CounterEngine& engine) {
  const auto n = signs.size();
  std::int64_t s = 0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    const auto j = i + static_cast<std::size_t>(engine.uniform() * static_cast<double>(n - i));
    std::swap(signs[i], signs[std::min(j, n - 1)]);
    s += signs[i];
  }
  return s;
}

inline std::vector<int> sign_arrangement(std::int64_t n, std::int64_t a) {
  detail::require(ConditionalWalkLaw::feasible(n, a), "sign_arrangement: infeasible (n, a)");
  std::vector<int> signs(static_cast<std::size_t>(n), -1);
  std::fill_n(signs.begin(), (n + a) / 2, 1);
  return signs;
}

template <class F>
MomentCheck exchangeable_moment(std::int64_t n, std::int64_t a, std::int64_t k, std::int64_t replicates,
                                const RandomSource& src, double bound, F&& statistic) {
  detail::require(k >= 1 && k <= n, "exchangeable moment: need 1 <= k <= n");
  detail::require(replicates >= 1000, "exchangeable moment: need at least 1000 replicates");
  auto signs = sign_arrangement(n, a);
  auto engine = src.engine();
  std::vector<double> values(static_cast<std::size_t>(replicates));
  for (auto& v : values) v = statistic(exchangeable_partial_sum(signs, k, engine));
  const auto ms = stats::mean_se(values);
  return {ms.mean, ms.se, bound, ms.mean <= bound + 3.0 * ms.se};
}

}  // namespace detail

/// E exp(theta W_k / sqrt k), W_k = S_k - k a / n under a uniform permutation of fixed signs; bound exp(theta^2).
inline MomentCheck exchangeable_exp_moment(std::int64_t n, std::int64_t a, std::int64_t k, double theta,
                                           std::int64_t replicates, const RandomSource& src) {
  const double center = static_cast<double>(k * a) / static_cast<double>(n);
  const double scale = theta / std::sqrt(static_cast<double>(k));
  return detail::exchangeable_moment(n, a, k, replicates, src, std::exp(theta * theta), [&](std::int64_t s) {
    return std::exp(scale * (static_cast<double>(s) - center));
  });
}

/// E exp(alpha S_k^2 / k) under a uniform permutation of fixed signs; bound exp(1 + 3 alpha a^2 / (4n)).
inline MomentCheck exchangeable_square_moment(std::int64_t n, std::int64_t a, std::int64_t k, double alpha,
                                              std::int64_t replicates, const RandomSource& src) {
  detail::require(3 * k <= 2 * n, "exchangeable_square_moment: need k <= 2n/3");
  const double bound = std::exp(1.0 + 3.0 * alpha * static_cast<double>(a * a) / (4.0 * static_cast<double>(n)));
  return detail::exchangeable_moment(n, a, k, replicates, src, bound, [&](std::int64_t s) {
    const double ds = static_cast<double>(s);
    return std::exp(alpha * ds * ds / static_cast<double>(k));
  });
}

/// Smallest constants consistent with a set of one-step estimates.
struct OneStepConstants {
  /// Largest upper 3-SE limit of E exp(theta |S_n - Z_n|) over the unconditioned reports.
  double kappa = 0.0;
  /// Smallest c with estimate <= exp(1 + c theta^2 a^2 / n) at every conditional point (0 if none bind).
  double c = 0.0;
};

struct ConditionalPoint {
  std::int64_t n = 0;
  std::int64_t a = 0;
  double theta = 0.0;
  double estimate = 0.0;
};

inline OneStepConstants implied_constants(std::span<const CouplingReport> unconditional,
                                          std::span<const ConditionalPoint> conditional) {
  OneStepConstants out;
  for (const auto& r : unconditional) {
    for (const auto& p : r.points) {
      if (!p.failed) out.kappa = std::max(out.kappa, p.estimate + 3.0 * p.standard_error);
    }
  }
  for (const auto& p : conditional) {
    const double excess = std::log(p.estimate) - 1.0;
    if (excess <= 0.0) continue;
    const double scale = p.theta * p.theta * static_cast<double>(p.a * p.a) / static_cast<double>(p.n);
    out.c = scale > 0.0 ? std::max(out.c, excess / scale) : INFINITY;
  }
  return out;
}

}  // namespace kmt
