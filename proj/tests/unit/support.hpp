#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <cstdint>
#include <map>
#include <vector>

namespace testing_support {

// Pearson goodness of fit; cells with expected count below 5 are pooled into one.
inline double chi_square_p_value(const std::vector<double>& observed, const std::vector<double>& expected) {
  double stat = 0.0, pooled_obs = 0.0, pooled_exp = 0.0;
  int cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (expected[i] < 5.0) {
      pooled_obs += observed[i];
      pooled_exp += expected[i];
      continue;
    }
    stat += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
    ++cells;
  }
  if (pooled_exp > 0.0) {
    stat += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++cells;
  }
  if (cells < 2) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(cells - 1), stat));
}

// Pearson statistic and degrees of freedom, for pooling several tables.
inline std::pair<double, int> chi_square_statistic(const std::vector<double>& observed,
                                                   const std::vector<double>& expected) {
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i)
    stat += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
  return {stat, static_cast<int>(observed.size()) - 1};
}

inline double chi_square_sf(double stat, int dof) {
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
}

// Counts of (S_k, S_n) over all 2^n sign sequences, by brute force.
inline std::map<std::pair<int, int>, double> enumerate_paths(int n, int k) {
  std::map<std::pair<int, int>, double> counts;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    int s = 0, sk = 0;
    for (int i = 0; i < n; ++i) {
      s += (mask >> i) & 1u ? 1 : -1;
      if (i + 1 == k) sk = s;
    }
    counts[{sk, s}] += 1.0;
  }
  return counts;
}

}  // namespace testing_support
