#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "fbal/core.hpp"
#include "fbal/predictive.hpp"
#include "fbal/priors.hpp"
#include "fbal/sampler.hpp"

namespace fbal::gp {

/// Matérn 5/2 covariance with one lengthscale per input dimension.
double matern52(const Vector& x, const Vector& x_prime, const Vector& lengthscales, double output_scale);

/// Covariance between the rows of `a` and the rows of `b`.
Matrix matern52_matrix(const Matrix& a, const Matrix& b, const Vector& lengthscales, double output_scale);

struct GpHyperparameters {
  Vector lengthscales;       // standardized-input units
  double output_scale = 1.0; // s^2, standardized-target variance units
  double noise_scale = 1.0;  // sigma, standardized-target units
};

/// Unconstrained layout: (log lengthscales..., log s^2, log sigma).
Vector to_unconstrained(const GpHyperparameters& hp);
GpHyperparameters from_unconstrained(const Vector& z);

/// Lower Cholesky factor of K + sigma^2 I (plus any jitter that was needed)
/// and alpha = (K + sigma^2 I)^-1 y.
struct Factorization {
  Matrix lower;
  Vector alpha;
  double jitter = 0.0;
};

/// Tries no jitter, then 1e-10, 1e-9, ... 1e-6 on the diagonal.
std::optional<Factorization> factorize(const Matrix& inputs, const Vector& targets, const GpHyperparameters& hp);

struct GpPriors {
  ScalePrior lengthscale = ScalePrior::log_normal(0.0, 1.0);
  ScalePrior output_scale = ScalePrior::log_normal(0.0, 1.0);
  ScalePrior noise = ScalePrior::half_normal(1.0);
};

/// Log marginal likelihood plus hyperparameter log priors (with the
/// log-transform Jacobians) as a function of the unconstrained vector.
class LogJoint {
 public:
  LogJoint(StandardizedData data, GpPriors priors = {});

  std::size_t dimension() const { return static_cast<std::size_t>(data_.inputs.cols()) + 2; }
  /// Returns -infinity when K + sigma^2 I cannot be factorized.
  double operator()(const Vector& z, Vector* gradient = nullptr) const;
  /// Prior terms only.
  double log_prior(const Vector& z, Vector* gradient = nullptr) const;
  LogDensityTarget target() const;

 private:
  StandardizedData data_;
  GpPriors priors_;
};

double log_joint(const StandardizedData& data, const GpHyperparameters& hp, const GpPriors& priors = {});
Vector grad_log_joint(const StandardizedData& data, const GpHyperparameters& hp, const GpPriors& priors = {});

GpHyperparameters sample_prior(std::size_t input_dim, const GpPriors& priors, Rng& rng);

struct GpPosterior {
  Standardizer standardizer;
  StandardizedData train;
  std::vector<GpHyperparameters> draws;
  std::vector<Factorization> factors;
  std::vector<SampleChain> chains;
};

/// Conditions the GP on `data` for each given hyperparameter draw.
GpPosterior condition(const Dataset& data, std::vector<GpHyperparameters> draws);

GpPosterior fit(const Dataset& data, const NutsConfig& nuts, const GpPriors& priors = {});

/// Single-draw posterior via gradient ascent with backtracking line search
/// from `restarts` prior draws.
GpPosterior fit_map(const Dataset& data, std::uint64_t seed, std::uint64_t stream, std::size_t restarts = 10,
                    const GpPriors& priors = {});
GpHyperparameters find_map(const LogJoint& model, std::size_t input_dim, Rng& rng, std::size_t restarts,
                           const GpPriors& priors = {});

/// Per-draw latent mean and variance in standardized target units. Variance
/// is clamped at zero; `raw_variance` receives the unclamped values.
struct SinglePrediction {
  Vector mean;
  Vector variance;
  Vector raw_variance;
};

SinglePrediction predict_single(const GpPosterior& post, std::size_t draw, const Matrix& points);

/// Ensemble mean of draw means; uncertainty is the mean latent variance plus
/// the spread of draw means. No observation noise. Raw target units.
PredictiveSummary predict(const GpPosterior& post, const Matrix& points);
/// Per-draw means and latent-plus-noise variances, raw target units.
PredictiveDraws predictive_draws(const GpPosterior& post, const Matrix& points);
/// Summary and per-draw components from one pass over the ensemble.
Prediction predict_all(const GpPosterior& post, const Matrix& points);

}  // namespace fbal::gp
