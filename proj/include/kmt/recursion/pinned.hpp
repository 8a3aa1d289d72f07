#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kmt/core/errors.hpp"
#include "kmt/core/normal.hpp"
#include "kmt/core/random.hpp"
#include "kmt/core/types.hpp"
#include "kmt/onestep/lattice_law.hpp"

namespace kmt {

/// Controls the recursive bridge coupling.
///
/// Segments of length <= base_case_cutoff are filled with independent walk and
/// bridge samples. Longer segments split at split_rule(n) (default floor(n/2)),
/// which must satisfy n/3 <= k <= 2n/3.
struct BridgeCouplingConfig {
  std::int64_t base_case_cutoff = 2;
  std::function<std::int64_t(std::int64_t)> split_rule;

  std::int64_t split(std::int64_t n) const {
    const std::int64_t k = split_rule ? split_rule(n) : n / 2;
    detail::require(3 * k >= n && 3 * k <= 2 * n && k >= 1 && k < n,
                    "BridgeCouplingConfig: split_rule(" + std::to_string(n) + ") = " + std::to_string(k) +
                        " violates n/3 <= k <= 2n/3");
    return k;
  }

  void validate() const {
    detail::require(base_case_cutoff >= 2, "BridgeCouplingConfig: base_case_cutoff must be >= 2");
  }
};

namespace detail {

/// Fills a segment of a (walk, Gaussian) pair by the recursive one-step coupling.
///
/// Works on absolute arrays: s[0], s[n], y[0], y[n] are given and the interior
/// is filled so that s is uniform over lattice paths between its endpoints and
/// y minus the line through its endpoints is a Brownian bridge at integer times.
/// Each segment [l, r] owns one stream key; its children use child_key(key, "L")
/// and child_key(key, "R"), so the result does not depend on traversal order.
class PinnedFiller {
 public:
  void fill(std::span<std::int64_t> s, std::span<double> y, std::uint64_t key, const BridgeCouplingConfig& cfg) {
    const auto n = static_cast<std::int64_t>(s.size()) - 1;
    stack_.clear();
    stack_.push_back({0, n, key});
    while (!stack_.empty()) {
      const Segment seg = stack_.back();
      stack_.pop_back();
      const std::int64_t m = seg.right - seg.left;
      if (m <= cfg.base_case_cutoff) {
        fill_base(s, y, seg);
        continue;
      }
      const std::int64_t k = cfg.split(m);
      const std::int64_t b = s[seg.right] - s[seg.left];
      law_.assign(m, k, b);
      CounterEngine engine(seg.key);
      const double u = engine.uniform();
      const std::int64_t mid = seg.left + k;
      s[mid] = s[seg.left] + law_.law().quantile(u);
      const double tilt = static_cast<double>(k) / static_cast<double>(m);
      y[mid] = y[seg.left] + tilt * (y[seg.right] - y[seg.left]) + law_.sigma() * standard_normal_quantile(u);
      stack_.push_back({mid, seg.right, child_key(seg.key, kRightLabel)});
      stack_.push_back({seg.left, mid, child_key(seg.key, kLeftLabel)});
    }
  }

 private:
  struct Segment {
    std::int64_t left;
    std::int64_t right;
    std::uint64_t key;
  };

  // Independent exact samples: a uniform lattice path between the endpoints and
  // a discrete Brownian bridge, both built sequentially.
  static void fill_base(std::span<std::int64_t> s, std::span<double> y, const Segment& seg) {
    const std::int64_t m = seg.right - seg.left;
    if (m <= 1) return;
    CounterEngine engine(seg.key);
    std::int64_t ups = (m + s[seg.right] - s[seg.left]) / 2;
    for (std::int64_t i = 1; i < m; ++i) {
      const std::int64_t remaining = m - i + 1;
      const bool up = engine.uniform() * static_cast<double>(remaining) < static_cast<double>(ups);
      if (up) --ups;
      s[seg.left + i] = s[seg.left + i - 1] + (up ? 1 : -1);
    }
    for (std::int64_t i = 1; i < m; ++i) {
      const double remaining = static_cast<double>(m - i + 1);
      const double prev = y[seg.left + i - 1];
      y[seg.left + i] = prev + (y[seg.right] - prev) / remaining +
                        std::sqrt((remaining - 1.0) / remaining) * draw_standard_normal(engine);
    }
  }

  std::vector<Segment> stack_;
  ConditionalWalkLaw law_;
};

}  // namespace detail

/// Top-split quantities for a pinned coupling held in absolute arrays with s[0] = y[0] = 0.
struct SplitDiagnostics {
  std::int64_t split = 0;
  double tl = 0.0, tr = 0.0, t = 0.0;
};

inline SplitDiagnostics split_diagnostics(std::span<const std::int64_t> s, std::span<const double> y,
                                          std::int64_t k) {
  SplitDiagnostics d;
  const auto n = static_cast<std::int64_t>(s.size()) - 1;
  if (k <= 0 || k >= n) return d;
  d.split = k;
  const double a = static_cast<double>(s[n]);
  const double big_s = static_cast<double>(s[k]);
  const double big_z = y[k];
  const double dk = static_cast<double>(k), dr = static_cast<double>(n - k);
  for (std::int64_t i = 0; i <= k; ++i) {
    const double frac = static_cast<double>(i) / dk;
    d.tl = std::max(d.tl, std::fabs(static_cast<double>(s[i]) - frac * big_s - (y[i] - frac * big_z)));
  }
  for (std::int64_t i = k; i <= n; ++i) {
    const double j = static_cast<double>(i - k);
    const double z_right = y[i] - (static_cast<double>(n - i) / dr) * big_z;
    d.tr = std::max(d.tr, std::fabs(static_cast<double>(s[i] - s[k]) - (j / dr) * (a - big_s) - z_right));
  }
  d.t = std::fabs(big_s - static_cast<double>(k * s[n]) / static_cast<double>(n) - big_z);
  return d;
}

/// Reusable sampler for the pinned (walk | S_n = a, Gaussian bridge) coupling.
class PinnedCouplingSampler {
 public:
  explicit PinnedCouplingSampler(BridgeCouplingConfig cfg = {}) : cfg_(std::move(cfg)) { cfg_.validate(); }

  PinnedCoupling operator()(std::int64_t n, std::int64_t a, const RandomSource& src) {
    detail::require(ConditionalWalkLaw::feasible(n, a),
                    "sample_pinned_coupling: infeasible (n=" + std::to_string(n) + ", a=" + std::to_string(a) + ")");
    PinnedCoupling out;
    out.n = n;
    out.a = a;
    out.s.assign(static_cast<std::size_t>(n + 1), 0);
    out.y.assign(static_cast<std::size_t>(n + 1), 0.0);
    out.s[static_cast<std::size_t>(n)] = a;
    filler_.fill(out.s, out.y, src.key(), cfg_);
    out.w.resize(out.s.size());
    for (std::int64_t i = 0; i <= n; ++i) {
      out.w[static_cast<std::size_t>(i)] =
          static_cast<double>(out.s[static_cast<std::size_t>(i)]) - static_cast<double>(i * a) / static_cast<double>(n);
    }
    if (n > cfg_.base_case_cutoff) {
      const auto d = split_diagnostics(out.s, out.y, cfg_.split(n));
      out.split = d.split;
      out.diag_tl = d.tl;
      out.diag_tr = d.tr;
      out.diag_t = d.t;
    }
    return out;
  }

  const BridgeCouplingConfig& config() const noexcept { return cfg_; }
  detail::PinnedFiller& filler() noexcept { return filler_; }

 private:
  BridgeCouplingConfig cfg_;
  detail::PinnedFiller filler_;
};

/// One draw of the coupled (pinned walk, Gaussian bridge) vector.
inline PinnedCoupling sample_pinned_coupling(std::int64_t n, std::int64_t a, const BridgeCouplingConfig& cfg,
                                             const RandomSource& src) {
  PinnedCouplingSampler sampler(cfg);
  return sampler(n, a, src);
}

}  // namespace kmt
