#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "kmt/core/errors.hpp"
#include "kmt/core/normal.hpp"
#include "kmt/core/random.hpp"
#include "kmt/stein/quadrature.hpp"

namespace kmt {

/// A mean-zero density on a finite interval [lo, hi].
///
/// Construction checks positivity on the open support, unit mass and zero mean
/// (both to 1e-10) and records the variance. `breaks` lists interior points
/// where the pdf is not smooth; quadrature splits there.
class DensitySpec {
 public:
  using Fn = std::function<double(double)>;

  DensitySpec(std::string name, double lo, double hi, Fn pdf, Fn quantile = {}, std::vector<double> breaks = {})
      : name_(std::move(name)), lo_(lo), hi_(hi), pdf_(std::move(pdf)), quantile_(std::move(quantile)),
        breaks_(std::move(breaks)) {
    detail::require(std::isfinite(lo_) && std::isfinite(hi_) && lo_ < hi_,
                    "DensitySpec: support must be a finite interval");
    for (int i = 1; i < 1000; ++i) {
      const double x = lo_ + (hi_ - lo_) * i / 1000.0;
      detail::require(pdf_(x) > 0.0, "DensitySpec " + name_ + ": pdf must be positive on the open support");
    }
    const double mass = quad::integrate(pdf_, lo_, hi_, breaks_);
    detail::require(std::fabs(mass - 1.0) <= 1e-10, "DensitySpec " + name_ + ": pdf does not integrate to 1");
    const double mean = quad::integrate([this](double x) { return x * pdf_(x); }, lo_, hi_, breaks_);
    detail::require(std::fabs(mean) <= 1e-10, "DensitySpec " + name_ + ": mean must be 0");
    variance_ = quad::integrate([this](double x) { return x * x * pdf_(x); }, lo_, hi_, breaks_);
  }

  const std::string& name() const noexcept { return name_; }
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  double variance() const noexcept { return variance_; }
  const std::vector<double>& breaks() const noexcept { return breaks_; }

  /// rho(x), zero outside the support.
  double pdf(double x) const { return (x < lo_ || x > hi_) ? 0.0 : pdf_(x); }

  bool contains(double x) const noexcept { return x >= lo_ && x <= hi_; }
  bool has_quantile() const noexcept { return static_cast<bool>(quantile_); }

  /// One draw by inversion; only for densities built with a quantile function.
  double sample(CounterEngine& engine) const {
    detail::require(has_quantile(), "DensitySpec " + name_ + ": no quantile function for sampling");
    return quantile_(engine.uniform());
  }

  /// E f(X) by quadrature.
  template <class F>
  double expect(F f) const {
    return quad::integrate([&](double x) { return f(x) * pdf_(x); }, lo_, hi_, breaks_);
  }

 private:
  std::string name_;
  double lo_, hi_;
  Fn pdf_;
  Fn quantile_;
  std::vector<double> breaks_;
  double variance_ = 0.0;
};

/// Uniform on [-half_width, half_width]; half_width = sqrt(3) gives unit variance.
inline DensitySpec uniform_density(double half_width = std::numbers::sqrt3) {
  detail::require(half_width > 0.0, "uniform_density: half_width must be positive");
  const double c = 0.5 / half_width;
  return DensitySpec(
      "uniform", -half_width, half_width, [c](double) { return c; },
      [half_width](double u) { return half_width * (2.0 * u - 1.0); });
}

/// Triangular on [lo, hi] with the given mode; the mean (lo + mode + hi) / 3 must vanish.
inline DensitySpec triangular_density(double lo, double mode, double hi) {
  detail::require(lo < hi && lo <= mode && mode <= hi, "triangular_density: need lo <= mode <= hi, lo < hi");
  const double width = hi - lo;
  auto pdf = [=](double x) {
    if (x <= mode) return mode > lo ? 2.0 * (x - lo) / (width * (mode - lo)) : 2.0 / width;
    return hi > mode ? 2.0 * (hi - x) / (width * (hi - mode)) : 2.0 / width;
  };
  auto quantile = [=](double u) {
    const double split = (mode - lo) / width;
    return u <= split ? lo + std::sqrt(u * width * (mode - lo)) : hi - std::sqrt((1.0 - u) * width * (hi - mode));
  };
  return DensitySpec("triangular", lo, hi, pdf, quantile, {mode});
}

/// Standard normal restricted to [-bound, bound] and renormalized.
inline DensitySpec truncated_normal_density(double bound = 8.0) {
  detail::require(bound > 0.0, "truncated_normal_density: bound must be positive");
  const double mass = 1.0 - 2.0 * normal_sf(bound);
  const double lower = normal_cdf(-bound);
  return DensitySpec(
      "truncated-normal", -bound, bound, [mass](double x) { return normal_pdf(x) / mass; },
      [=](double u) {
        const double p = lower + u * mass;
        return p < 0.5 ? standard_normal_quantile(p) : -standard_normal_quantile(lower + (1.0 - u) * mass);
      });
}

}  // namespace kmt
