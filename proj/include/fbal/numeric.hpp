#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace fbal {

/// Mean whose rounding does not depend on the order of `values` (they are
/// summed in sorted order). Reorders its argument.
inline double order_invariant_mean(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

/// log(sum(exp(values))), order-invariant like order_invariant_mean.
inline double order_invariant_log_sum_exp(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  const double m = values.back();
  if (!std::isfinite(m)) return m;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - m);
  return m + std::log(sum);
}

}  // namespace fbal
