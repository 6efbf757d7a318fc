#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fbal/core.hpp"
#include "fbal/predictive.hpp"
#include "fbal/priors.hpp"
#include "fbal/sampler.hpp"

namespace fbal::bnn {

/// Fully connected tanh network with a single linear output.
struct MlpArchitecture {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden{32, 16, 8};

  /// Sum over layers of (fan_in + 1) * fan_out.
  std::size_t parameter_count() const;
  /// "32-16-8"; "linear" when there are no hidden layers.
  std::string name() const;
  static std::vector<std::size_t> parse_hidden(const std::string& name);

  bool operator==(const MlpArchitecture&) const = default;
};

/// Flat weight layout, layer by layer: the fan_out x fan_in weight matrix in
/// column-major order followed by the fan_out biases.
struct BnnParameters {
  Vector weights;
  double noise_scale = 1.0;
};

/// Network output for one standardized input.
double forward(const MlpArchitecture& arch, const Vector& weights, const Vector& x);
/// Outputs for a batch of standardized inputs (one per row).
Vector forward_batch(const MlpArchitecture& arch, const Vector& weights, const Matrix& x);

/// Unnormalized log posterior over (w, log sigma): Gaussian likelihood,
/// Normal(0, 1) on every weight and bias, `noise_prior` on sigma plus the
/// log-Jacobian of the log transform.
class LogJoint {
 public:
  /// Block of one layer in the flat weight vector.
  struct Layer {
    Eigen::Index fan_in;
    Eigen::Index fan_out;
    Eigen::Index offset;
  };

  LogJoint(MlpArchitecture arch, StandardizedData data, ScalePrior noise_prior);

  std::size_t dimension() const { return arch_.parameter_count() + 1; }
  const MlpArchitecture& architecture() const { return arch_; }

  /// Unconstrained point z = (w, log sigma). Returns -infinity when the
  /// value overflows; `gradient` is written when non-null.
  double operator()(const Vector& z, Vector* gradient = nullptr) const;

  LogDensityTarget target() const;

 private:
  MlpArchitecture arch_;
  StandardizedData data_;
  ScalePrior noise_prior_;
  std::vector<Layer> shapes_;
};

double log_joint(const MlpArchitecture& arch, const StandardizedData& data, const BnnParameters& params,
                 const ScalePrior& noise_prior = ScalePrior::half_normal(1.0));
Vector grad_log_joint(const MlpArchitecture& arch, const StandardizedData& data, const BnnParameters& params,
                      const ScalePrior& noise_prior = ScalePrior::half_normal(1.0));

Vector to_unconstrained(const BnnParameters& params);
BnnParameters from_unconstrained(const Vector& z);

/// Draw from the prior, used to start chains away from the all-zero saddle.
BnnParameters sample_prior(const MlpArchitecture& arch, const ScalePrior& noise_prior, Rng& rng);

struct BnnPosterior {
  MlpArchitecture arch;
  Standardizer standardizer;
  std::vector<BnnParameters> draws;
  std::vector<SampleChain> chains;
};

BnnPosterior fit(const MlpArchitecture& arch, const Dataset& data, const NutsConfig& nuts,
                 const ScalePrior& noise_prior = ScalePrior::half_normal(1.0));

/// Ensemble mean of network outputs; uncertainty is the spread of outputs
/// across draws plus the mean noise variance. Raw target units.
PredictiveSummary predict(const BnnPosterior& post, const Matrix& points);
PredictiveDraws predictive_draws(const BnnPosterior& post, const Matrix& points);
/// Summary and per-draw components from one pass over the ensemble.
Prediction predict_all(const BnnPosterior& post, const Matrix& points);

}  // namespace fbal::bnn
