#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "kmt/core/errors.hpp"
#include "kmt/core/random.hpp"
#include "kmt/core/types.hpp"
#include "kmt/onestep/coupling.hpp"
#include "kmt/onestep/lattice_law.hpp"
#include "kmt/recursion/pinned.hpp"

namespace kmt {

inline constexpr std::uint64_t kEndpointLabel = detail::hash_label("endpoint");
inline constexpr std::uint64_t kBridgeLabel = detail::hash_label("bridge");
inline constexpr std::uint64_t kBlockLabel = detail::hash_label("block");

/// Coupled walk and Gaussian random walk sampled at integer times.
struct WalkCoupling {
  WalkPath walk;
  GaussianPath gauss;
};

/// Doubling schedule m_r = 2^(2^r) truncated at a horizon.
///
/// `boundaries` lists every m_r <= horizon; `lengths` lists the block lengths in
/// order, the last one partial when the horizon is not itself a boundary.
struct BlockSchedule {
  std::int64_t horizon = 0;
  std::vector<std::int64_t> boundaries;
  std::vector<std::int64_t> lengths;

  static std::int64_t boundary(int r) {
    detail::require(r >= 0 && r <= 5, "BlockSchedule: m_r overflows 64 bits beyond r = 5");
    return std::int64_t{1} << (std::int64_t{1} << r);
  }

  explicit BlockSchedule(std::int64_t n) : horizon(n) {
    detail::require(n >= 1, "BlockSchedule: horizon must be positive");
    std::int64_t previous = 0;
    for (int r = 1; r <= 5 && boundary(r) <= n; ++r) {
      boundaries.push_back(boundary(r));
      lengths.push_back(boundary(r) - previous);
      previous = boundary(r);
    }
    if (previous < n) lengths.push_back(n - previous);
  }

  std::size_t blocks() const noexcept { return lengths.size(); }
};

/// Workspace-holding sampler for the full-walk and infinite-horizon couplings.
class WalkCouplingSampler {
 public:
  explicit WalkCouplingSampler(BridgeCouplingConfig cfg = {}) : cfg_(std::move(cfg)) { cfg_.validate(); }

  /// Fill s[1..n], y[1..n] given s[0], y[0]: top endpoint coupling, then the pinned recursion.
  void fill(std::span<std::int64_t> s, std::span<double> y, std::uint64_t key) {
    const auto n = static_cast<std::int64_t>(s.size()) - 1;
    endpoint_.assign(n);
    CounterEngine engine(detail::child_key(key, kEndpointLabel));
    const auto top = quantile_couple_binomial(endpoint_, engine);
    s[static_cast<std::size_t>(n)] = s[0] + top.s;
    y[static_cast<std::size_t>(n)] = y[0] + top.z;
    filler_.fill(s, y, detail::child_key(key, kBridgeLabel), cfg_);
  }

  WalkCoupling walk(std::int64_t n, const RandomSource& src) {
    detail::require(n >= 1, "sample_walk_coupling: n must be positive");
    std::vector<std::int64_t> s(static_cast<std::size_t>(n + 1), 0);
    std::vector<double> y(static_cast<std::size_t>(n + 1), 0.0);
    fill(s, y, src.key());
    return {WalkPath(std::move(s)), GaussianPath(std::move(y), CovarianceKind::walk)};
  }

  /// Independent block couplings of lengths n_r, each shifted by the running endpoint.
  WalkCoupling infinite(std::int64_t horizon, const RandomSource& src) {
    const BlockSchedule schedule(horizon);
    std::vector<std::int64_t> s(static_cast<std::size_t>(horizon + 1), 0);
    std::vector<double> y(static_cast<std::size_t>(horizon + 1), 0.0);
    const std::uint64_t blocks_key = detail::child_key(src.key(), kBlockLabel);
    std::size_t offset = 0;
    for (std::size_t r = 0; r < schedule.blocks(); ++r) {
      const auto len = static_cast<std::size_t>(schedule.lengths[r]);
      fill(std::span(s).subspan(offset, len + 1), std::span(y).subspan(offset, len + 1),
           detail::child_key(blocks_key, detail::hash_index(r + 1)));
      offset += len;
    }
    return {WalkPath(std::move(s)), GaussianPath(std::move(y), CovarianceKind::walk)};
  }

 private:
  BridgeCouplingConfig cfg_;
  WalkEndpointLaw endpoint_;
  detail::PinnedFiller filler_;
};

/// S_n coupled with Z ~ N(0, n), then the pinned coupling given S_n with the linear tilt added.
inline WalkCoupling sample_walk_coupling(std::int64_t n, const BridgeCouplingConfig& cfg, const RandomSource& src) {
  WalkCouplingSampler sampler(cfg);
  return sampler.walk(n, src);
}

/// One coupling valid for every n <= horizon; block r uses stream src/"block"/#r.
inline WalkCoupling sample_infinite_coupling(std::int64_t horizon, const BridgeCouplingConfig& cfg,
                                             const RandomSource& src) {
  WalkCouplingSampler sampler(cfg);
  return sampler.infinite(horizon, src);
}

/// max_i |walk_i - gauss_i|.
template <class A, class B>
double max_deviation(std::span<const A> walk, std::span<const B> gauss) {
  detail::require(walk.size() == gauss.size(), "max_deviation: length mismatch");
  double out = 0.0;
  for (std::size_t i = 0; i < walk.size(); ++i) {
    const double d = std::fabs(static_cast<double>(walk[i]) - static_cast<double>(gauss[i]));
    if (d > out) out = d;
  }
  return out;
}

inline double max_deviation(const WalkPath& walk, const GaussianPath& gauss) {
  return max_deviation(walk.values(), gauss.values());
}

inline double max_deviation(const WalkCoupling& c) { return max_deviation(c.walk, c.gauss); }

inline double max_deviation(const PinnedCoupling& c) {
  return max_deviation(std::span<const double>(c.w), std::span<const double>(c.y));
}

inline double max_deviation(const std::vector<double>& walk, const std::vector<double>& gauss) {
  return max_deviation(std::span<const double>(walk), std::span<const double>(gauss));
}

}  // namespace kmt
