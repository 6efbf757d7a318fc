#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fbal/bnn.hpp"
#include "fbal/core.hpp"
#include "fbal/gp.hpp"
#include "fbal/predictive.hpp"
#include "fbal/sampler.hpp"
#include "fbal/testbed.hpp"

namespace fbal::active {

enum class SurrogateKind { kFbnn, kGp, kGpMap };

std::string to_string(SurrogateKind kind);
SurrogateKind parse_surrogate(const std::string& name);

struct SurrogateConfig {
  SurrogateKind kind = SurrogateKind::kFbnn;
  /// Hidden widths; the input width comes from the benchmark.
  std::vector<std::size_t> hidden{32, 16, 8};
  ScalePrior noise_prior = ScalePrior::half_normal(1.0);
  NutsConfig nuts;
  std::size_t map_restarts = 10;
};

/// Candidates still selectable on the grid and the measurement order.
class AcquisitionState {
 public:
  explicit AcquisitionState(std::size_t grid_size);

  bool selectable(std::size_t index) const { return mask_.at(index); }
  const std::vector<bool>& mask() const { return mask_; }
  const std::vector<std::size_t>& measured() const { return measured_; }
  std::size_t remaining() const { return remaining_; }

  /// Records a measurement; the index leaves the candidate set unless
  /// re-measurement is allowed.
  void record(std::size_t index, bool keep_selectable = false);

 private:
  std::vector<bool> mask_;
  std::vector<std::size_t> measured_;
  std::size_t remaining_;
};

/// Index of the largest uncertainty among selectable candidates; ties go to
/// the lowest index.
std::size_t select_next(const PredictiveSummary& summary, const AcquisitionState& state);

/// Any fitted surrogate, reduced to what the loop needs.
class FittedSurrogate {
 public:
  static constexpr std::size_t kFitAttempts = 3;

  /// Sampler failures are retried up to kFitAttempts times in total, each
  /// from a fresh start on a stream derived from the previous one. Every
  /// retry halves the gap between target_accept and 1 and doubles warmup.
  static FittedSurrogate fit(const SurrogateConfig& cfg, const Dataset& data, std::uint64_t seed,
                             std::uint64_t stream);

  Prediction predict(const Matrix& points) const;
  const std::vector<SampleChain>& chains() const;
  std::size_t draw_count() const;
  std::size_t attempts() const { return attempts_; }

 private:
  static FittedSurrogate fit_once(const SurrogateConfig& cfg, const NutsConfig& nuts, const Dataset& data,
                                  std::uint64_t seed, std::uint64_t stream);

  std::size_t attempts_ = 1;
  std::optional<bnn::BnnPosterior> bnn_;
  std::optional<gp::GpPosterior> gp_;
};

/// Draws measurements; repeated requests at a grid index are served from a
/// cache unless re-measurement is allowed (then each repeat gets a new draw).
class Experiment {
 public:
  Experiment(const testbed::TestFunctionSpec& spec, const EvaluationGrid& grid, std::uint64_t seed,
             bool fresh_repeats = false);

  double measure(std::size_t grid_index);

 private:
  const testbed::TestFunctionSpec& spec_;
  const EvaluationGrid& grid_;
  Rng rng_;
  bool fresh_repeats_;
  std::vector<std::optional<double>> cache_;
  std::vector<std::uint64_t> count_;
};

struct InitialDesign {
  std::vector<std::size_t> indices;
  Dataset data;
};

/// 1D: four evenly spaced grid points including both ends. Otherwise ten
/// distinct grid points drawn uniformly with the run seed.
InitialDesign initial_design(const testbed::TestFunctionSpec& spec, const EvaluationGrid& grid, std::uint64_t seed,
                             Experiment& experiment);
std::vector<std::size_t> initial_design_indices(const EvaluationGrid& grid, std::uint64_t seed);

struct StepRecord {
  std::size_t step = 0;
  std::size_t selected_index = 0;
  Vector x;
  double y_observed = 0.0;
  double fit_seconds = 0.0;
  double mse = 0.0;
  double nlpd = 0.0;
  double max_uncertainty = 0.0;
  std::size_t dataset_size = 0;
  std::size_t divergences = 0;
  double max_split_rhat = 1.0;
  std::size_t fit_attempts = 1;
};

struct CampaignConfig {
  SurrogateConfig surrogate;
  std::size_t steps = 40;
  std::uint64_t seed = 0;
  bool allow_remeasure = false;
};

struct CampaignFailure {
  std::size_t step = 0;
  std::string message;
};

struct RunRecord {
  std::string function;
  CampaignConfig config;
  EvaluationGrid grid;
  Vector ground_truth;
  std::vector<std::size_t> initial_indices;
  Dataset initial_data;
  Dataset final_data;
  double initial_fit_seconds = 0.0;
  std::vector<StepRecord> steps;
  std::optional<PredictiveSummary> final_prediction;
  std::optional<ChainDiagnostics> final_diagnostics;
  std::optional<CampaignFailure> failure;
};

/// Called after each completed step with its record and the predictive
/// summary the selection was made from.
using StepCallback = std::function<void(const StepRecord&, const PredictiveSummary& acquisition)>;

/// Initial design, fit, then `steps` rounds of predict / select / measure /
/// append / refit. Metrics are taken after each refit against the noiseless
/// truth on the full grid. A failing fit ends the campaign; the record holds
/// everything completed before it.
RunRecord run_campaign(const testbed::TestFunctionSpec& spec, const CampaignConfig& cfg,
                       const StepCallback& on_step = {});

/// Default acquisition budgets per benchmark.
std::size_t default_steps(const testbed::TestFunctionSpec& spec);

}  // namespace fbal::active
