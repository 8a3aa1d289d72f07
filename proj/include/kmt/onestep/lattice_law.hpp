#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "kmt/core/errors.hpp"

namespace kmt {

/// Log of |A_b^m| = C(m, (m+b)/2), the number of m-step +-1 paths from 0 to b.
inline double log_path_count(std::int64_t m, std::int64_t b) {
  detail::require(m >= 0 && std::llabs(b) <= m && ((m + b) % 2 == 0), "log_path_count: infeasible (m, b)");
  const double up = static_cast<double>((m + b) / 2);
  const double down = static_cast<double>((m - b) / 2);
  return std::lgamma(static_cast<double>(m) + 1.0) - std::lgamma(up + 1.0) - std::lgamma(down + 1.0);
}

/// A discrete law on the parity lattice {first, first+2, ...}.
///
/// Weights are stored unnormalized (mode = 1) together with lower and upper
/// cumulative sums, each accumulated from its own tail so both tails keep full
/// relative precision. Points whose weight falls below kTrim relative to the
/// mode are dropped; their total mass is far below the 2^-53 resolution of
/// the uniforms that drive inversion.
class LatticeLaw {
 public:
  static constexpr double kTrim = 1e-32;

  LatticeLaw() = default;

  /// Rebuild in place for a unimodal law on x in [xmin, xmax] mapped to s = 2x - shift.
  /// `ratio(x)` must return w(x+1)/w(x).
  template <class Ratio>
  void assign(std::int64_t xmin, std::int64_t xmax, std::int64_t mode, std::int64_t shift, Ratio ratio) {
    mode = std::clamp(mode, xmin, xmax);
    weights_.clear();
    // Downward from the mode, stored reversed.
    double w = 1.0;
    std::int64_t x = mode;
    weights_.push_back(1.0);
    while (x > xmin) {
      w /= ratio(x - 1);
      if (w < kTrim) break;
      weights_.push_back(w);
      --x;
    }
    const std::int64_t lo = x;
    std::reverse(weights_.begin(), weights_.end());
    w = 1.0;
    x = mode;
    while (x < xmax) {
      w *= ratio(x);
      if (w < kTrim) break;
      weights_.push_back(w);
      ++x;
    }
    first_ = 2 * lo - shift;
    finalize();
  }

  std::size_t size() const noexcept { return weights_.size(); }
  std::int64_t first() const noexcept { return first_; }
  std::int64_t last() const noexcept { return first_ + 2 * (static_cast<std::int64_t>(size()) - 1); }
  std::int64_t value(std::size_t i) const noexcept { return first_ + 2 * static_cast<std::int64_t>(i); }
  double probability(std::size_t i) const noexcept { return weights_[i] / total_; }

  /// P(X = s); zero off the lattice or outside the retained window.
  double pmf(std::int64_t s) const noexcept {
    if (s < first_ || s > last() || ((s - first_) & 1)) return 0.0;
    return probability(static_cast<std::size_t>((s - first_) / 2));
  }

  /// P(X <= s).
  double cdf(std::int64_t s) const noexcept {
    if (s < first_) return 0.0;
    if (s >= last()) return 1.0;
    const auto i = static_cast<std::size_t>((s - first_) / 2);
    return lower_[i] / total_;
  }

  /// P(X > s), summed from the top.
  double sf(std::int64_t s) const noexcept {
    if (s < first_) return 1.0;
    if (s >= last()) return 0.0;
    const auto i = static_cast<std::size_t>((s - first_) / 2);
    return upper_[i] / total_;
  }

  /// Smallest support point s with P(X <= s) >= u (ties go to the lower point).
  std::int64_t quantile(double u) const {
    detail::require(u > 0.0 && u < 1.0, "LatticeLaw::quantile: u must lie in (0,1)");
    if (u > 0.5) return quantile_upper(1.0 - u);  // 1 - u is exact here
    const double target = u * total_;
    const auto i = static_cast<std::size_t>(std::lower_bound(lower_.begin(), lower_.end(), target) - lower_.begin());
    return value(std::min(i, size() - 1));
  }

  /// Same point expressed through the upper tail: smallest s with P(X > s) <= q.
  std::int64_t quantile_upper(double q) const {
    detail::require(q >= 0.0 && q < 1.0, "LatticeLaw::quantile_upper: q must lie in [0,1)");
    const double target = q * total_;
    const auto i = static_cast<std::size_t>(
        std::lower_bound(upper_.begin(), upper_.end(), target, [](double a, double b) { return a > b; }) -
        upper_.begin());
    return value(std::min(i, size() - 1));
  }

 private:
  void finalize() {
    const std::size_t m = weights_.size();
    lower_.resize(m);
    upper_.resize(m);
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) lower_[i] = (acc += weights_[i]);
    acc = 0.0;
    for (std::size_t i = m; i-- > 0;) {
      upper_[i] = acc;
      acc += weights_[i];
    }
    total_ = acc;
  }

  std::int64_t first_ = 0;
  std::vector<double> weights_;
  std::vector<double> lower_;  // sum of weights at or below point i
  std::vector<double> upper_;  // sum of weights strictly above point i
  double total_ = 0.0;
};

/// Law of S_n = sum of n fair +-1 signs.
class WalkEndpointLaw {
 public:
  WalkEndpointLaw() = default;
  explicit WalkEndpointLaw(std::int64_t n) { assign(n); }

  void assign(std::int64_t n) {
    detail::require(n >= 1, "WalkEndpointLaw: n must be positive");
    n_ = n;
    const double dn = static_cast<double>(n);
    law_.assign(0, n, n / 2, n, [dn](std::int64_t x) {
      const double dx = static_cast<double>(x);
      return (dn - dx) / (dx + 1.0);
    });
  }

  std::int64_t n() const noexcept { return n_; }
  /// Standard deviation of the Gaussian partner N(0, n).
  double sigma() const noexcept { return std::sqrt(static_cast<double>(n_)); }
  double center() const noexcept { return 0.0; }
  const LatticeLaw& law() const noexcept { return law_; }

 private:
  std::int64_t n_ = 0;
  LatticeLaw law_;
};

/// Exact law of S_k given S_n = a for the simple random walk:
/// g(s) = |A_s^k| |A_{a-s}^{n-k}| / |A_a^n|, a hypergeometric law on the number of up-steps.
class ConditionalWalkLaw {
 public:
  ConditionalWalkLaw() = default;
  ConditionalWalkLaw(std::int64_t n, std::int64_t k, std::int64_t a) { assign(n, k, a); }

  static bool feasible(std::int64_t n, std::int64_t a) noexcept {
    return n >= 1 && a >= -n && a <= n && ((n + a) % 2 == 0);
  }

  void assign(std::int64_t n, std::int64_t k, std::int64_t a) {
    detail::require(feasible(n, a), "conditional_law: infeasible endpoint a=" + std::to_string(a) +
                                        " for n=" + std::to_string(n));
    detail::require(k >= 1 && k < n, "conditional_law: need 1 <= k < n");
    n_ = n;
    k_ = k;
    a_ = a;
    const std::int64_t ups = (n + a) / 2;
    const std::int64_t xmin = std::max<std::int64_t>(0, k - (n - ups));
    const std::int64_t xmax = std::min(k, ups);
    const std::int64_t mode = ((k + 1) * (ups + 1)) / (n + 2);
    const double dn = static_cast<double>(n), dk = static_cast<double>(k), dp = static_cast<double>(ups);
    law_.assign(xmin, xmax, mode, k, [=](std::int64_t x) {
      const double dx = static_cast<double>(x);
      return (dp - dx) * (dk - dx) / ((dx + 1.0) * (dn - dp - dk + dx + 1.0));
    });
  }

  std::int64_t n() const noexcept { return n_; }
  std::int64_t k() const noexcept { return k_; }
  std::int64_t a() const noexcept { return a_; }
  /// Standard deviation of the Gaussian partner N(0, k(n-k)/n).
  double sigma() const noexcept {
    return std::sqrt(static_cast<double>(k_) * static_cast<double>(n_ - k_) / static_cast<double>(n_));
  }
  /// E(S_k) = k a / n; W_k = S_k - center().
  double center() const noexcept {
    return static_cast<double>(k_ * a_) / static_cast<double>(n_);
  }
  const LatticeLaw& law() const noexcept { return law_; }

  std::vector<std::int64_t> support() const {
    std::vector<std::int64_t> out(law_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = law_.value(i);
    return out;
  }

  std::vector<double> pmf() const {
    std::vector<double> out(law_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = law_.probability(i);
    return out;
  }

  /// log |A_s^k| + log |A_{a-s}^{n-k}| for each support point.
  std::vector<double> log_path_counts() const {
    std::vector<double> out(law_.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const std::int64_t s = law_.value(i);
      out[i] = log_path_count(k_, s) + log_path_count(n_ - k_, a_ - s);
    }
    return out;
  }

 private:
  std::int64_t n_ = 0, k_ = 0, a_ = 0;
  LatticeLaw law_;
};

inline ConditionalWalkLaw conditional_law(std::int64_t n, std::int64_t k, std::int64_t a) {
  return ConditionalWalkLaw(n, k, a);
}

}  // namespace kmt
