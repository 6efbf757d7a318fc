#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fbal/core.hpp"
#include "fbal/rng.hpp"

namespace fbal {

/// Differentiable log-density over an unconstrained real vector. The
/// evaluator returns log p(z) and writes its gradient; -infinity marks a
/// point where the model cannot be evaluated (overflow, failed factorization).
struct LogDensityTarget {
  using Evaluator = std::function<double(const Vector& z, Vector& gradient)>;

  std::size_t dimension = 0;
  Evaluator evaluate;
};

struct PhasePoint {
  Vector position;
  Vector momentum;
  Vector gradient;
  double log_density = 0.0;

  /// Potential plus kinetic energy with identity mass matrix.
  double hamiltonian() const;
};

PhasePoint make_phase_point(const LogDensityTarget& target, const Vector& position, const Vector& momentum);

struct LeapfrogResult {
  PhasePoint point;
  bool divergent = false;
};

inline constexpr double kDivergenceThreshold = 1000.0;

/// One half-kick / drift / half-kick step. Divergence is flagged when the
/// new log density is -infinity or the energy rises by more than
/// kDivergenceThreshold over `reference_energy` (defaults to the start point).
LeapfrogResult leapfrog(const LogDensityTarget& target, const PhasePoint& start, double step_size,
                        std::optional<double> reference_energy = std::nullopt);

struct NutsConfig {
  std::size_t warmup_steps = 500;
  std::size_t kept_samples = 500;
  std::size_t chains = 1;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  /// Unset means "pick a reasonable step size by doubling/halving".
  std::optional<double> initial_step_size;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  void validate() const;
};

struct SampleChain {
  Matrix draws;  // kept_samples x dimension
  Vector log_density;
  double accept_stat_mean = 0.0;
  std::size_t divergence_count = 0;
  std::size_t warmup_divergence_count = 0;
  double adapted_step_size = 0.0;
  std::size_t max_leapfrog_steps = 0;
  double mean_tree_depth = 0.0;
};

class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Nesterov dual averaging of log step size toward a target acceptance
/// statistic (gamma 0.05, t0 10, kappa 0.75; shrinkage point log(10 eps0)).
class DualAveraging {
 public:
  static constexpr double kMinStep = 1e-8;
  static constexpr double kMaxStep = 1e2;

  DualAveraging(double initial_step_size, double target_accept, double gamma = 0.05, double t0 = 10.0,
                double kappa = 0.75);

  /// Feeds one acceptance statistic and returns the next step size.
  double update(double accept_stat);
  double step_size() const { return step_size_; }
  /// Averaged iterate; the step size frozen after warmup.
  double final_step_size() const;

 private:
  double target_;
  double gamma_;
  double t0_;
  double kappa_;
  double mu_;
  double counter_ = 0.0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
  double step_size_;
};

/// Step-size schedule produced by feeding `accept_stats` through dual
/// averaging; element i is the step size used after observing stat i.
std::vector<double> adapt_step_size(const std::vector<double>& accept_stats, double initial_step_size,
                                    const NutsConfig& cfg);

double find_reasonable_step_size(const LogDensityTarget& target, const Vector& position, Rng& rng,
                                 double initial = 1.0);

/// Per-transition bookkeeping exposed for tests.
struct TransitionInfo {
  double accept_stat = 0.0;
  bool divergent = false;
  int tree_depth = 0;
  std::size_t leapfrog_steps = 0;
};

/// One NUTS transition from `current` with multinomial sampling over the
/// doubled trajectory and the generalized U-turn check across subtrees.
PhasePoint nuts_transition(const LogDensityTarget& target, const PhasePoint& current, double step_size,
                           int max_tree_depth, Rng& rng, TransitionInfo& info);

/// Runs cfg.chains independent chains, all started from `init`.
std::vector<SampleChain> nuts_sample(const LogDensityTarget& target, const Vector& init, const NutsConfig& cfg);
/// One start point per chain.
std::vector<SampleChain> nuts_sample(const LogDensityTarget& target, const std::vector<Vector>& inits,
                                     const NutsConfig& cfg);

struct ParameterSummary {
  double mean = 0.0;
  double sd = 0.0;
  double split_rhat = 1.0;
};

struct ChainDiagnostics {
  std::vector<ParameterSummary> parameters;
  std::size_t divergences = 0;
  double max_split_rhat = 1.0;
};

/// Split-Rhat treats each chain's halves as separate chains; degenerate
/// (zero-variance) parameters report 1.0.
ChainDiagnostics diagnostics(const std::vector<SampleChain>& chains);

double split_rhat(const std::vector<Vector>& chains);

}  // namespace fbal
