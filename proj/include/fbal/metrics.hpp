#pragma once

#include <cstddef>

#include "fbal/core.hpp"
#include "fbal/predictive.hpp"

namespace fbal::metrics {

struct MetricPoint {
  std::size_t step = 0;
  double mse = 0.0;
  double nlpd = 0.0;
};

double mse(const Vector& mean, const Vector& truth);

/// Negative log of the equal-weight Gaussian mixture density over draws,
/// averaged over points (nats per point). Computed with log-sum-exp.
double nlpd(const PredictiveDraws& draws, const Vector& truth);

}  // namespace fbal::metrics
