#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "kmt/core/errors.hpp"

namespace kmt::quad {

inline constexpr double kAbsTol = 1e-11;
inline constexpr double kRelTol = 1e-9;

/// Adaptive Gauss-Kronrod over [a, b], split at the given interior breakpoints.
/// Throws EstimationFailure when the error estimate misses max(kAbsTol, kRelTol * L1).
template <class F>
double integrate(F f, double a, double b, const std::vector<double>& breaks = {}) {
  using boost::math::quadrature::gauss_kronrod;
  std::vector<double> cuts{a};
  for (double c : breaks) {
    if (c > a && c < b) cuts.push_back(c);
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    double error = 0.0, l1 = 0.0;
    const double piece = gauss_kronrod<double, 61>::integrate(f, cuts[i], cuts[i + 1], 15, 1e-11, &error, &l1);
    // Boost reports the error estimate on the mapped interval [-1, 1] but rescales L1.
    error *= 0.5 * (cuts[i + 1] - cuts[i]);
    if (!std::isfinite(piece) || error > std::max(kAbsTol, kRelTol * l1)) {
      throw EstimationFailure("quadrature did not converge on [" + std::to_string(cuts[i]) + ", " +
                              std::to_string(cuts[i + 1]) + "], error estimate " + std::to_string(error) + " vs L1 " + std::to_string(l1));
    }
    total += piece;
  }
  return total;
}

/// Fixed 64-point Gauss-Legendre over [-1, 1]; exact for polynomials of degree <= 127.
template <class F>
double legendre64(F f) {
  return boost::math::quadrature::gauss<double, 64>::integrate(f, -1.0, 1.0);
}

}  // namespace kmt::quad
