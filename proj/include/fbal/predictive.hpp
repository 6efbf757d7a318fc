#pragma once

#include "fbal/core.hpp"

namespace fbal {

/// Per-point predictive mean and acquisition uncertainty, raw target units.
struct PredictiveSummary {
  Vector mean;
  Vector uncertainty;
};

/// Per-draw Gaussian predictive components over a set of points, raw target
/// units: column j holds draw j's mean and observation-level variance.
struct PredictiveDraws {
  Matrix mean;      // points x draws
  Matrix variance;  // points x draws, includes observation noise
};

struct Prediction {
  PredictiveSummary summary;
  PredictiveDraws draws;
};

}  // namespace fbal
