#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "kmt/core/errors.hpp"
#include "kmt/core/random.hpp"

namespace kmt::stats {

/// Type-7 (linear interpolation) sample quantile of already sorted data.
inline double sorted_quantile(std::span<const double> sorted, double p) {
  detail::require(!sorted.empty(), "sorted_quantile: empty sample");
  detail::require(p >= 0.0 && p <= 1.0, "sorted_quantile: p must lie in [0,1]");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> data, double p) {
  std::sort(data.begin(), data.end());
  return sorted_quantile(data, p);
}

inline double median(std::vector<double> data) { return quantile(std::move(data), 0.5); }

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(std::span<const double> xs) {
  detail::require(xs.size() >= 2, "mean_se: need at least two values");
  const double n = static_cast<double>(xs.size());
  double mean = 0.0, m2 = 0.0, k = 0.0;
  for (double x : xs) {
    k += 1.0;
    const double d = x - mean;
    mean += d / k;
    m2 += d * (x - mean);
  }
  return {mean, std::sqrt(m2 / (n - 1.0) / n)};
}

/// P(chi^2_dof > stat).
inline double chi_square_sf(double stat, double dof) {
  detail::require(dof > 0.0, "chi_square_sf: dof must be positive");
  if (stat <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * stat);
}

struct GoodnessOfFit {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Pearson chi-square of observed counts against cell probabilities.
/// Cells with expected count below 5 are pooled into a single cell.
inline GoodnessOfFit chi_square_test(std::span<const double> observed, std::span<const double> probabilities) {
  detail::require(observed.size() == probabilities.size(), "chi_square_test: size mismatch");
  const double total = std::accumulate(observed.begin(), observed.end(), 0.0);
  GoodnessOfFit out;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  int cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double expected = total * probabilities[i];
    if (expected < 5.0) {
      pooled_obs += observed[i];
      pooled_exp += expected;
      continue;
    }
    out.statistic += (observed[i] - expected) * (observed[i] - expected) / expected;
    ++cells;
  }
  if (pooled_exp > 0.0) {
    out.statistic += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++cells;
  }
  out.dof = cells - 1;
  out.p_value = out.dof > 0 ? chi_square_sf(out.statistic, out.dof) : 1.0;
  return out;
}

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double slope_se = 0.0;
  double residual_sd = 0.0;
  std::vector<double> residuals;

  double operator()(double x) const noexcept { return intercept + slope * x; }
};

/// Ordinary least squares y = a + b x.
inline LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size() && x.size() >= 2, "least_squares: need >= 2 paired points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  detail::require(sxx > 0.0, "least_squares: x values are all equal");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    fit.residuals.push_back(y[i] - fit(x[i]));
    rss += fit.residuals.back() * fit.residuals.back();
  }
  if (x.size() > 2) {
    fit.residual_sd = std::sqrt(rss / (n - 2.0));
    fit.slope_se = fit.residual_sd / std::sqrt(sxx);
  }
  return fit;
}

/// Least squares y = c0 + c1 x + c2 x^2 via the normal equations; returns {c0, c1, c2}.
inline std::array<double, 3> quadratic_fit(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size() && x.size() >= 3, "quadratic_fit: need >= 3 paired points");
  // Center x for conditioning, then map back.
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double s[5] = {0, 0, 0, 0, 0}, t[3] = {0, 0, 0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = x[i] - mx;
    double p = 1.0;
    for (int k = 0; k < 5; ++k) {
      s[k] += p;
      if (k < 3) t[k] += p * y[i];
      p *= u;
    }
  }
  double m[3][4] = {{s[0], s[1], s[2], t[0]}, {s[1], s[2], s[3], t[1]}, {s[2], s[3], s[4], t[2]}};
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::fabs(m[r][col]) > std::fabs(m[pivot][col])) pivot = r;
    for (int c = 0; c < 4; ++c) std::swap(m[col][c], m[pivot][c]);
    detail::require(m[col][col] != 0.0, "quadratic_fit: singular design");
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
    }
  }
  const double b0 = m[0][3] / m[0][0], b1 = m[1][3] / m[1][1], b2 = m[2][3] / m[2][2];
  return {b0 - b1 * mx + b2 * mx * mx, b1 - 2.0 * b2 * mx, b2};
}

/// Indices for one bootstrap resample of size n.
inline std::vector<std::size_t> resample_indices(std::size_t n, CounterEngine& engine) {
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = static_cast<std::size_t>(engine.uniform() * static_cast<double>(n));
  return idx;
}

inline constexpr int kBootstrapResamples = 200;

struct BootstrapSummary {
  double estimate = 0.0;
  double se = 0.0;
  double lower = 0.0;  // 2.5% percentile
  double upper = 0.0;  // 97.5% percentile
  std::vector<double> replicates;
};

/// Percentile bootstrap of statistic(sample) over `resamples` resamples.
inline BootstrapSummary bootstrap(std::span<const double> data,
                                  const std::function<double(std::span<const double>)>& statistic,
                                  CounterEngine& engine, int resamples = kBootstrapResamples) {
  detail::require(!data.empty(), "bootstrap: empty sample");
  BootstrapSummary out;
  out.estimate = statistic(data);
  std::vector<double> buffer(data.size());
  for (int b = 0; b < resamples; ++b) {
    const auto idx = resample_indices(data.size(), engine);
    for (std::size_t i = 0; i < idx.size(); ++i) buffer[i] = data[idx[i]];
    out.replicates.push_back(statistic(buffer));
  }
  const auto ms = mean_se(out.replicates);
  out.se = ms.se * std::sqrt(static_cast<double>(resamples));
  std::vector<double> sorted = out.replicates;
  std::sort(sorted.begin(), sorted.end());
  out.lower = sorted_quantile(sorted, 0.025);
  out.upper = sorted_quantile(sorted, 0.975);
  return out;
}

inline double median_of(std::span<const double> xs) { return median(std::vector<double>(xs.begin(), xs.end())); }

}  // namespace kmt::stats
