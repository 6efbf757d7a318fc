#include "fbal/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fbal/numeric.hpp"
#include "fbal/priors.hpp"

namespace fbal::metrics {

double mse(const Vector& mean, const Vector& truth) {
  if (mean.size() != truth.size()) throw std::invalid_argument("mse: length mismatch");
  if (mean.size() == 0) throw std::invalid_argument("mse: empty input");
  return (mean - truth).squaredNorm() / static_cast<double>(mean.size());
}

double nlpd(const PredictiveDraws& draws, const Vector& truth) {
  const auto m = truth.size();
  if (m == 0) throw std::invalid_argument("nlpd: empty input");
  if (draws.mean.rows() != m || draws.variance.rows() != m || draws.mean.cols() != draws.variance.cols())
    throw std::invalid_argument("nlpd: shape mismatch");
  const auto n = draws.mean.cols();
  if (n == 0) throw std::invalid_argument("nlpd: no posterior draws");

  const double log_n = std::log(static_cast<double>(n));
  std::vector<double> terms(static_cast<std::size_t>(n));
  std::vector<double> per_point(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = draws.variance(i, j);
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::domain_error("nlpd: non-positive predictive variance at point " + std::to_string(i));
      const double r = truth[i] - draws.mean(i, j);
      terms[static_cast<std::size_t>(j)] = -kHalfLog2Pi - 0.5 * std::log(v) - 0.5 * r * r / v;
    }
    per_point[static_cast<std::size_t>(i)] = -(order_invariant_log_sum_exp(terms) - log_n);
  }
  double sum = 0.0;
  for (double v : per_point) sum += v;
  return sum / static_cast<double>(m);
}

}  // namespace fbal::metrics
