#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kmt/core/errors.hpp"

namespace kmt {

/// Lattice path S_0..S_n with unit increments and S_0 = 0.
class WalkPath {
 public:
  explicit WalkPath(std::vector<std::int64_t> values) : values_(std::move(values)) {
    detail::require(values_.size() >= 2, "WalkPath: need at least one step");
    detail::require(values_.front() == 0, "WalkPath: values[0] must be 0");
    for (std::size_t i = 1; i < values_.size(); ++i) {
      detail::require(std::llabs(values_[i] - values_[i - 1]) == 1, "WalkPath: increments must be +-1");
    }
  }

  std::int64_t steps() const noexcept { return static_cast<std::int64_t>(values_.size()) - 1; }
  std::int64_t operator[](std::size_t i) const noexcept { return values_[i]; }
  std::int64_t endpoint() const noexcept { return values_.back(); }
  int increment(std::size_t i) const noexcept { return static_cast<int>(values_[i] - values_[i - 1]); }
  std::span<const std::int64_t> values() const noexcept { return values_; }

 private:
  std::vector<std::int64_t> values_;
};

enum class CovarianceKind { bridge, walk };

/// Gaussian vector at integer times 0..n with bridge (i∧j)(n-(i∨j))/n or walk i∧j covariance.
class GaussianPath {
 public:
  GaussianPath(std::vector<double> values, CovarianceKind kind) : values_(std::move(values)), kind_(kind) {
    detail::require(values_.size() >= 2, "GaussianPath: need at least one step");
    detail::require(values_.front() == 0.0, "GaussianPath: values[0] must be 0");
    if (kind_ == CovarianceKind::bridge) {
      detail::require(values_.back() == 0.0, "GaussianPath: bridge must end at 0");
    }
  }

  std::int64_t steps() const noexcept { return static_cast<std::int64_t>(values_.size()) - 1; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  CovarianceKind kind() const noexcept { return kind_; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::vector<double> values_;
  CovarianceKind kind_;
};

/// One draw of the pinned coupling: centered walk W_i = S_i - i a/n beside a Gaussian bridge.
///
/// diag_* hold the top-split quantities T_L, T_R, T; they are zero when n <= 2
/// (or whenever the top node is a base case).
struct PinnedCoupling {
  std::int64_t n = 0;
  std::int64_t a = 0;
  std::vector<std::int64_t> s;  // lattice path S_0..S_n
  std::vector<double> w;
  std::vector<double> y;
  std::int64_t split = 0;  // top split index k, 0 when the top node is a base case
  double diag_tl = 0.0;
  double diag_tr = 0.0;
  double diag_t = 0.0;

  WalkPath walk() const { return WalkPath(s); }
  GaussianPath bridge() const { return GaussianPath(y, CovarianceKind::bridge); }
};

/// Monte-Carlo estimate at one grid point.
struct GridEstimate {
  double parameter = 0.0;
  double estimate = 0.0;
  double standard_error = 0.0;
  bool failed = false;  // overflow or non-finite estimate
  std::string failure;
};

struct CouplingReport {
  std::string label;
  std::vector<GridEstimate> points;
  std::int64_t replicates = 0;
  double wall_clock_seconds = 0.0;
};

}  // namespace kmt
