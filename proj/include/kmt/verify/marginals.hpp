#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "kmt/core/errors.hpp"
#include "kmt/core/parallel.hpp"
#include "kmt/core/random.hpp"
#include "kmt/core/types.hpp"
#include "kmt/recursion/pinned.hpp"
#include "kmt/verify/experiment.hpp"
#include "kmt/verify/statistics.hpp"

namespace kmt {

inline constexpr std::int64_t kMaxEnumeratedSteps = 12;

/// Bit i-1 set iff step i goes up.
inline std::uint32_t step_mask(std::span<const std::int64_t> path) {
  std::uint32_t mask = 0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (path[i] > path[i - 1]) mask |= 1u << (i - 1);
  }
  return mask;
}

/// Chi-square of sampled step patterns against the uniform law on the allowed patterns.
/// `allowed(mask)` selects the support; `draw(r)` returns the path of replicate r.
template <class Allowed, class Draw>
stats::GoodnessOfFit path_pattern_test(std::int64_t n, std::int64_t replicates, int threads, Allowed&& allowed,
                                       Draw&& draw) {
  detail::require(n >= 1 && n <= kMaxEnumeratedSteps,
                  "path_pattern_test: n must lie in [1, " + std::to_string(kMaxEnumeratedSteps) + "]");
  const auto masks = run_replicates(replicates, threads, [&](std::int64_t r) { return step_mask(draw(r)); });
  const std::uint32_t patterns = 1u << n;
  std::vector<std::int64_t> cell(patterns, -1);
  std::vector<double> observed;
  for (std::uint32_t m = 0; m < patterns; ++m) {
    if (!allowed(m)) continue;
    cell[m] = static_cast<std::int64_t>(observed.size());
    observed.push_back(0.0);
  }
  for (auto m : masks) {
    detail::require(cell[m] >= 0, "path_pattern_test: sampled path outside the support");
    observed[static_cast<std::size_t>(cell[m])] += 1.0;
  }
  const std::vector<double> probs(observed.size(), 1.0 / static_cast<double>(observed.size()));
  return stats::chi_square_test(observed, probs);
}

/// Uniformity of the walk's step pattern for any scheme (all 2^n patterns equally likely).
inline stats::GoodnessOfFit walk_marginal_test(Scheme scheme, std::int64_t n, std::int64_t replicates,
                                               const RandomSource& src, int threads = 1, double dt = 0.0) {
  return path_pattern_test(n, replicates, threads, [](std::uint32_t) { return true; }, [&](std::int64_t r) {
    const auto stream = src.split(static_cast<std::uint64_t>(r));
    std::vector<std::int64_t> path;
    switch (scheme) {
      case Scheme::kmt_recursive: {
        WalkCouplingSampler sampler;
        const auto c = sampler.walk(n, stream);
        path.assign(c.walk.values().begin(), c.walk.values().end());
        break;
      }
      case Scheme::skorokhod: {
        const auto c = skorokhod_couple(n, dt, stream);
        path.assign(c.walk.values().begin(), c.walk.values().end());
        break;
      }
      case Scheme::independent: {
        const auto c = independent_couple(n, stream);
        path.assign(c.first.values().begin(), c.first.values().end());
        break;
      }
    }
    return path;
  });
}

/// Uniformity of pinned-coupling paths on the paths from 0 to a.
inline stats::GoodnessOfFit pinned_marginal_test(std::int64_t n, std::int64_t a, std::int64_t replicates,
                                                 const RandomSource& src, int threads = 1,
                                                 const BridgeCouplingConfig& cfg = {}) {
  detail::require(ConditionalWalkLaw::feasible(n, a), "pinned_marginal_test: infeasible (n, a)");
  const int ups = static_cast<int>((n + a) / 2);
  return path_pattern_test(
      n, replicates, threads, [&](std::uint32_t m) { return std::popcount(m) == ups; },
      [&](std::int64_t r) {
        PinnedCouplingSampler sampler(cfg);
        return sampler(n, a, src.split(static_cast<std::uint64_t>(r))).s;
      });
}

}  // namespace kmt
