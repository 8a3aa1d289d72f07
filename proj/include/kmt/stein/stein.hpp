#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/interpolators/pchip.hpp>

#include "kmt/core/errors.hpp"
#include "kmt/stein/density.hpp"
#include "kmt/stein/quadrature.hpp"

namespace kmt {

/// h(x) = (int_x^hi y rho(y) dy) / rho(x) for a DensitySpec.
///
/// exact() runs quadrature per call. operator() interpolates a monotone cubic
/// through exact values on a 4096-point grid built at construction, so the
/// object is immutable and safe to share across threads.
class SteinFunction {
 public:
  static constexpr std::size_t kGridPoints = 4096;

  explicit SteinFunction(DensitySpec density) : density_(std::move(density)) {
    std::vector<double> xs(kGridPoints), us(kGridPoints, 0.0);
    const double lo = density_.lo(), hi = density_.hi();
    for (std::size_t i = 0; i < kGridPoints; ++i) {
      xs[i] = i + 1 == kGridPoints ? hi : lo + (hi - lo) * static_cast<double>(i) / (kGridPoints - 1);
    }
    // u accumulated cell by cell, from the lower end up to 0 and from the upper end down.
    const auto& d = density_;
    auto integrand = [&d](double y) { return y * d.pdf(y); };
    for (std::size_t i = 1; i < kGridPoints && xs[i] <= 0.0; ++i) {
      us[i] = us[i - 1] - quad::integrate(integrand, xs[i - 1], xs[i], d.breaks());
    }
    for (std::size_t i = kGridPoints - 1; i-- > 0 && xs[i] > 0.0;) {
      us[i] = us[i + 1] + quad::integrate(integrand, xs[i], xs[i + 1], d.breaks());
    }
    std::vector<double> hs(kGridPoints, 0.0);
    for (std::size_t i = 1; i + 1 < kGridPoints; ++i) hs[i] = us[i] / d.pdf(xs[i]);
    interp_ = std::make_shared<Interp>(std::move(xs), std::move(hs));
  }

  const DensitySpec& density() const noexcept { return density_; }

  /// u(x) = int_x^hi y rho(y) dy, taken from whichever end avoids cancellation.
  double u(double x) const {
    require_support(x);
    const auto& d = density_;
    auto integrand = [&d](double y) { return y * d.pdf(y); };
    if (x <= 0.0) return -quad::integrate(integrand, d.lo(), x, d.breaks());
    return quad::integrate(integrand, x, d.hi(), d.breaks());
  }

  /// Direct evaluation; 0 at both support endpoints.
  double exact(double x) const {
    require_support(x);
    if (x <= density_.lo() || x >= density_.hi()) return 0.0;
    return u(x) / density_.pdf(x);
  }

  double operator()(double x) const {
    require_support(x);
    return (*interp_)(x);
  }

 private:
  using Interp = boost::math::interpolators::pchip<std::vector<double>>;

  void require_support(double x) const {
    detail::require(density_.contains(x), "SteinFunction: x = " + std::to_string(x) + " outside the support of " +
                                              density_.name());
  }

  DensitySpec density_;
  std::shared_ptr<const Interp> interp_;
};

inline SteinFunction stein_h(const DensitySpec& density) { return SteinFunction(density); }

/// A test function with its derivative; `kinks` marks points where phi' jumps.
struct TestFunction {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::vector<double> kinks;
};

/// The battery used by the identity checks: x, x^2, x^3, sin and a clipped line.
inline std::vector<TestFunction> test_function_battery() {
  return {
      {"x", [](double x) { return x; }, [](double) { return 1.0; }, {}},
      {"x^2", [](double x) { return x * x; }, [](double x) { return 2.0 * x; }, {}},
      {"x^3", [](double x) { return x * x * x; }, [](double x) { return 3.0 * x * x; }, {}},
      {"sin", [](double x) { return std::sin(x); }, [](double x) { return std::cos(x); }, {}},
      {"clip", [](double x) { return std::clamp(x, -0.5, 0.5); },
       [](double x) { return std::fabs(x) < 0.5 ? 1.0 : 0.0; }, {-0.5, 0.5}},
  };
}

/// |E(X phi(X)) - E(T(X) phi'(X))| for X ~ density, by adaptive quadrature.
/// Non-convergence surfaces as EstimationFailure.
inline double stein_identity_residual(const DensitySpec& density, const std::function<double(double)>& coefficient,
                                      const TestFunction& phi) {
  std::vector<double> breaks = density.breaks();
  breaks.insert(breaks.end(), phi.kinks.begin(), phi.kinks.end());
  auto lhs_f = [&](double x) { return x * phi.f(x) * density.pdf(x); };
  auto rhs_f = [&](double x) { return coefficient(x) * phi.df(x) * density.pdf(x); };
  const double lhs = quad::integrate(lhs_f, density.lo(), density.hi(), breaks);
  const double rhs = quad::integrate(rhs_f, density.lo(), density.hi(), breaks);
  return std::fabs(lhs - rhs);
}

inline double stein_identity_residual(const SteinFunction& h, const TestFunction& phi) {
  return stein_identity_residual(h.density(), [&h](double x) { return h.exact(x); }, phi);
}

/// (1/n) sum h(x_i): the Stein coefficient of (x_1 + ... + x_n)/sqrt(n) for iid summands.
inline double iid_sum_coefficient(std::span<const double> xs, const SteinFunction& h) {
  detail::require(!xs.empty(), "iid_sum_coefficient: need at least one value");
  double sum = 0.0;
  for (double x : xs) sum += h(x);
  return sum / static_cast<double>(xs.size());
}

/// T = n - s y + (1 - y^2)/2, the coefficient of S_n + Y.
inline double smoothed_srw_coefficient(std::int64_t n, std::int64_t s, double y) {
  detail::require(n >= 1, "smoothed_srw_coefficient: n must be positive");
  detail::require(std::llabs(s) <= n && (n + s) % 2 == 0, "smoothed_srw_coefficient: s must satisfy |s| <= n, s = n mod 2");
  detail::require(y >= -1.0 && y <= 1.0, "smoothed_srw_coefficient: y must lie in [-1, 1]");
  const double dn = static_cast<double>(n), ds = static_cast<double>(s);
  return dn - ds * y + 0.5 * (1.0 - y * y);
}

namespace detail {

inline void check_permutation_args(std::span<const int> eps, std::int64_t k, double y) {
  const auto n = static_cast<std::int64_t>(eps.size());
  require(k >= 1 && k < n, "permutation_coefficient: need 1 <= k < n");
  require(y >= -1.0 && y <= 1.0, "permutation_coefficient: y must lie in [-1, 1]");
  for (int e : eps) require(e == 1 || e == -1, "permutation_coefficient: entries must be +-1");
}

}  // namespace detail

/// (1/n) sum_{i<=k<j} a_ij + (1 - y^2)/2 with a_ij = 1 - e_i e_j - (e_i - e_j) y,
/// where eps holds the already permuted signs.
inline double permutation_coefficient(std::span<const int> eps, std::int64_t k, double y) {
  detail::check_permutation_args(eps, k, y);
  const auto n = static_cast<std::int64_t>(eps.size());
  double sum = 0.0;
  for (std::int64_t i = 0; i < k; ++i)
    for (std::int64_t j = k; j < n; ++j) {
      const double ei = eps[static_cast<std::size_t>(i)], ej = eps[static_cast<std::size_t>(j)];
      sum += 1.0 - ei * ej - (ei - ej) * y;
    }
  return sum / static_cast<double>(n) + 0.5 * (1.0 - y * y);
}

/// Same value in O(n): k(n-k)/n - (sum_{i<=k} e)(sum_{j>k} e)/n - W y + (1 - y^2)/2,
/// with W = sum_{i<=k} e_i - k S / n.
inline double permutation_coefficient_closed(std::span<const int> eps, std::int64_t k, double y) {
  detail::check_permutation_args(eps, k, y);
  const auto n = static_cast<std::int64_t>(eps.size());
  double left = 0.0, right = 0.0;
  for (std::int64_t i = 0; i < n; ++i) (i < k ? left : right) += eps[static_cast<std::size_t>(i)];
  const double dn = static_cast<double>(n), dk = static_cast<double>(k);
  const double w = left - dk * (left + right) / dn;
  return dk * (dn - dk) / dn - left * right / dn - w * y + 0.5 * (1.0 - y * y);
}

/// sum_{i=1}^n D_i with D_i = h(X_i) X_{i+1} (X_{i-1} + X_{i+1}), X_0 = 0,
/// for xs = (X_1, ..., X_{n+1}).
inline double autocorr_coefficient(std::span<const double> xs, const SteinFunction& h) {
  detail::require(xs.size() >= 2, "autocorr_coefficient: need X_1..X_{n+1} with n >= 1");
  for (double x : xs) {
    detail::require(h.density().contains(x), "autocorr_coefficient: value outside the support");
  }
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double prev = i == 0 ? 0.0 : xs[i - 1];
    total += h(xs[i]) * xs[i + 1] * (prev + xs[i + 1]);
  }
  return total;
}

/// Per-term D_i values, same conventions as autocorr_coefficient.
inline std::vector<double> autocorr_terms(std::span<const double> xs, const SteinFunction& h) {
  detail::require(xs.size() >= 2, "autocorr_terms: need X_1..X_{n+1} with n >= 1");
  std::vector<double> out;
  out.reserve(xs.size() - 1);
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    detail::require(h.density().contains(xs[i]) && h.density().contains(xs[i + 1]),
                    "autocorr_terms: value outside the support");
    const double prev = i == 0 ? 0.0 : xs[i - 1];
    out.push_back(h(xs[i]) * xs[i + 1] * (prev + xs[i + 1]));
  }
  return out;
}

/// Polynomial sum_j c_j x^j and its derivative, by Horner.
struct Polynomial {
  std::vector<double> coefficients;

  double operator()(double x) const {
    double acc = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
    return acc;
  }

  double derivative(double x) const {
    double acc = 0.0;
    for (std::size_t j = coefficients.size(); j-- > 1;) acc = acc * x + static_cast<double>(j) * coefficients[j];
    return acc;
  }
};

inline constexpr int kMaxEnumerationSteps = 12;

/// |E(S~ phi(S~)) - E(T phi'(S~))| with S~ = S_n + Y, T = n - S_n Y + (1 - Y^2)/2,
/// summed over all 2^n sign vectors with 64-point Gauss-Legendre in Y.
inline double discrete_identity_check(int n, const Polynomial& phi) {
  detail::require(n >= 1 && n <= kMaxEnumerationSteps,
                  "discrete_identity_check: n must lie in [1, " + std::to_string(kMaxEnumerationSteps) + "]");
  double lhs = 0.0, rhs = 0.0;
  const std::uint32_t count = 1u << n;
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    const auto s = static_cast<std::int64_t>(2 * std::popcount(mask)) - n;
    const double ds = static_cast<double>(s);
    // Y has density 1/2 on [-1, 1].
    lhs += 0.5 * quad::legendre64([&](double y) { return (ds + y) * phi(ds + y); });
    rhs += 0.5 * quad::legendre64([&](double y) { return smoothed_srw_coefficient(n, s, y) * phi.derivative(ds + y); });
  }
  return std::fabs(lhs - rhs) / static_cast<double>(count);
}

/// Residuals of the two integration-by-parts identities for X uniform on {-1, 1}, Y uniform on [-1, 1]:
/// E(X phi(X+Y)) = E((1 - XY) phi'(X+Y)) and E(Y phi(X+Y)) = E((1 - Y^2) phi'(X+Y)) / 2.
inline std::pair<double, double> sign_uniform_identity_residuals(const TestFunction& phi) {
  double first = 0.0, second = 0.0;
  for (int x : {-1, 1}) {
    const double dx = x;
    std::vector<double> breaks;
    for (double k : phi.kinks) breaks.push_back(k - dx);
    const double a = quad::integrate([&](double y) { return dx * phi.f(dx + y); }, -1.0, 1.0, breaks);
    const double b = quad::integrate([&](double y) { return (1.0 - dx * y) * phi.df(dx + y); }, -1.0, 1.0, breaks);
    const double c = quad::integrate([&](double y) { return y * phi.f(dx + y); }, -1.0, 1.0, breaks);
    const double d = quad::integrate([&](double y) { return 0.5 * (1.0 - y * y) * phi.df(dx + y); }, -1.0, 1.0, breaks);
    // Each (x, y) cell has weight 1/2 * 1/2.
    first += 0.25 * (a - b);
    second += 0.25 * (c - d);
  }
  return {std::fabs(first), std::fabs(second)};
}

}  // namespace kmt
