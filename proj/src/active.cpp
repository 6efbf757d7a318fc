#include "fbal/active.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "fbal/metrics.hpp"

namespace fbal::active {

std::string to_string(SurrogateKind kind) {
  switch (kind) {
    case SurrogateKind::kFbnn:
      return "fbnn";
    case SurrogateKind::kGp:
      return "gp";
    case SurrogateKind::kGpMap:
      return "gp-map";
  }
  return "unknown";
}

SurrogateKind parse_surrogate(const std::string& name) {
  if (name == "fbnn") return SurrogateKind::kFbnn;
  if (name == "gp") return SurrogateKind::kGp;
  if (name == "gp-map") return SurrogateKind::kGpMap;
  throw std::invalid_argument("unknown surrogate: " + name);
}

AcquisitionState::AcquisitionState(std::size_t grid_size) : mask_(grid_size, true), remaining_(grid_size) {}

void AcquisitionState::record(std::size_t index, bool keep_selectable) {
  if (index >= mask_.size()) throw std::out_of_range("grid index out of range");
  measured_.push_back(index);
  if (!keep_selectable && mask_[index]) {
    mask_[index] = false;
    --remaining_;
  }
}

std::size_t select_next(const PredictiveSummary& summary, const AcquisitionState& state) {
  const auto& mask = state.mask();
  if (static_cast<std::size_t>(summary.uncertainty.size()) != mask.size())
    throw std::invalid_argument("uncertainty vector does not match the candidate set");
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const double u = summary.uncertainty[static_cast<Eigen::Index>(i)];
    if (std::isnan(u)) continue;
    if (!best || u > summary.uncertainty[static_cast<Eigen::Index>(*best)]) best = i;
  }
  if (!best) throw std::runtime_error("no selectable candidates remain");
  return *best;
}

FittedSurrogate FittedSurrogate::fit(const SurrogateConfig& cfg, const Dataset& data, std::uint64_t seed,
                                     std::uint64_t stream) {
  // A chain that ends warmup in a region its adapted step cannot handle
  // diverges on every transition. Such fits are retried from a fresh start
  // on a derived stream, so the outcome stays a pure function of the inputs.
  // Smaller steps and a longer warmup are the usual cure for divergences.
  NutsConfig nuts = cfg.nuts;
  for (std::size_t attempt = 1;; ++attempt) {
    try {
      FittedSurrogate out = fit_once(cfg, nuts, data, seed, stream);
      out.attempts_ = attempt;
      return out;
    } catch (const SamplerError&) {
      if (attempt >= kFitAttempts) throw;
      stream = mix64(stream ^ hash_string("refit"));
      nuts.target_accept = 0.5 * (1.0 + nuts.target_accept);
      nuts.warmup_steps *= 2;
    }
  }
}

FittedSurrogate FittedSurrogate::fit_once(const SurrogateConfig& cfg, const NutsConfig& base, const Dataset& data,
                                          std::uint64_t seed, std::uint64_t stream) {
  FittedSurrogate out;
  NutsConfig nuts = base;
  nuts.seed = seed;
  nuts.stream = stream;
  switch (cfg.kind) {
    case SurrogateKind::kFbnn: {
      bnn::MlpArchitecture arch{data.dim(), cfg.hidden};
      out.bnn_ = bnn::fit(arch, data, nuts, cfg.noise_prior);
      break;
    }
    case SurrogateKind::kGp:
      out.gp_ = gp::fit(data, nuts);
      break;
    case SurrogateKind::kGpMap:
      out.gp_ = gp::fit_map(data, seed, stream, cfg.map_restarts);
      break;
  }
  return out;
}

Prediction FittedSurrogate::predict(const Matrix& points) const {
  if (bnn_) return bnn::predict_all(*bnn_, points);
  if (gp_) return gp::predict_all(*gp_, points);
  throw std::logic_error("surrogate has not been fitted");
}

const std::vector<SampleChain>& FittedSurrogate::chains() const {
  static const std::vector<SampleChain> kNone;
  if (bnn_) return bnn_->chains;
  if (gp_) return gp_->chains;
  return kNone;
}

std::size_t FittedSurrogate::draw_count() const {
  if (bnn_) return bnn_->draws.size();
  if (gp_) return gp_->draws.size();
  return 0;
}

Experiment::Experiment(const testbed::TestFunctionSpec& spec, const EvaluationGrid& grid, std::uint64_t seed,
                       bool fresh_repeats)
    : spec_(spec),
      grid_(grid),
      rng_(Rng(seed, 0).split("measurement")),
      fresh_repeats_(fresh_repeats),
      cache_(grid.size()),
      count_(grid.size(), 0) {}

double Experiment::measure(std::size_t grid_index) {
  if (grid_index >= grid_.size()) throw std::out_of_range("grid index out of range");
  if (cache_[grid_index] && !fresh_repeats_) return *cache_[grid_index];
  // Each (grid point, repeat) owns a stream, so values do not depend on the
  // order in which points are measured.
  Rng rng = rng_.split(static_cast<std::uint64_t>(grid_index)).split(count_[grid_index]++);
  const double y = testbed::observe(spec_, grid_.point(grid_index), rng);
  cache_[grid_index] = y;
  return y;
}

std::vector<std::size_t> initial_design_indices(const EvaluationGrid& grid, std::uint64_t seed) {
  std::vector<std::size_t> indices;
  if (grid.dim() == 1) {
    const double last = static_cast<double>(grid.size() - 1);
    for (int k = 0; k < 4; ++k) indices.push_back(static_cast<std::size_t>(std::lround(last * k / 3.0)));
    return indices;
  }
  const std::size_t count = std::min<std::size_t>(10, grid.size());
  std::vector<std::size_t> pool(grid.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  Rng rng = Rng(seed, 0).split("initial-design");
  // Partial Fisher-Yates: the first `count` slots are a uniform draw without replacement.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
    indices.push_back(pool[i]);
  }
  return indices;
}

InitialDesign initial_design(const testbed::TestFunctionSpec& spec, const EvaluationGrid& grid, std::uint64_t seed,
                             Experiment& experiment) {
  auto indices = initial_design_indices(grid, seed);
  Matrix x(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(grid.dim()));
  Vector y(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    x.row(static_cast<Eigen::Index>(k)) = grid.points().row(static_cast<Eigen::Index>(indices[k]));
    y[static_cast<Eigen::Index>(k)] = experiment.measure(indices[k]);
  }
  return {std::move(indices), Dataset(spec.bounds, std::move(x), std::move(y))};
}

std::size_t default_steps(const testbed::TestFunctionSpec& spec) {
  if (spec.ising) return 150;
  return spec.dim() == 1 ? 40 : 200;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::uint64_t fit_stream(std::size_t step) { return hash_string("fit") ^ mix64(static_cast<std::uint64_t>(step)); }

}  // namespace

RunRecord run_campaign(const testbed::TestFunctionSpec& spec, const CampaignConfig& cfg, const StepCallback& on_step) {
  if (cfg.steps < 1) throw std::invalid_argument("campaign needs at least one step");
  const EvaluationGrid grid = spec.grid();
  Experiment experiment(spec, grid, cfg.seed, cfg.allow_remeasure);
  InitialDesign design = initial_design(spec, grid, cfg.seed, experiment);

  RunRecord record{spec.name, cfg, grid, testbed::evaluate_grid(spec, grid), design.indices, design.data,
                   design.data, 0.0, {}, std::nullopt, std::nullopt, std::nullopt};
  if (cfg.steps > grid.size() - design.indices.size() && !cfg.allow_remeasure)
    throw std::invalid_argument("campaign asks for more steps than there are unmeasured grid points");

  AcquisitionState state(grid.size());
  for (std::size_t i : design.indices) state.record(i, cfg.allow_remeasure);

  Dataset& data = record.final_data;
  const Matrix& points = grid.points();
  std::optional<FittedSurrogate> model;
  std::optional<Prediction> prediction;

  try {
    const auto start = std::chrono::steady_clock::now();
    model = FittedSurrogate::fit(cfg.surrogate, data, cfg.seed, fit_stream(0));
    record.initial_fit_seconds = seconds_since(start);
    prediction = model->predict(points);
  } catch (const std::exception& e) {
    record.failure = CampaignFailure{0, e.what()};
    return record;
  }

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    StepRecord rec;
    rec.step = step;
    PredictiveSummary acquisition;
    try {
      acquisition = prediction->summary;
      rec.selected_index = select_next(prediction->summary, state);
      rec.max_uncertainty = prediction->summary.uncertainty[static_cast<Eigen::Index>(rec.selected_index)];
      rec.x = grid.point(rec.selected_index);
      rec.y_observed = experiment.measure(rec.selected_index);
      data.append(rec.x, rec.y_observed);
      state.record(rec.selected_index, cfg.allow_remeasure);

      const auto start = std::chrono::steady_clock::now();
      model = FittedSurrogate::fit(cfg.surrogate, data, cfg.seed, fit_stream(step));
      rec.fit_seconds = seconds_since(start);
      rec.fit_attempts = model->attempts();
      prediction = model->predict(points);
      rec.mse = metrics::mse(prediction->summary.mean, record.ground_truth);
      rec.nlpd = metrics::nlpd(prediction->draws, record.ground_truth);
      rec.dataset_size = data.size();
      for (const auto& c : model->chains()) rec.divergences += c.divergence_count;
      if (!model->chains().empty() && model->chains()[0].draws.rows() >= 4)
        rec.max_split_rhat = diagnostics(model->chains()).max_split_rhat;
    } catch (const std::exception& e) {
      record.failure = CampaignFailure{step, e.what()};
      return record;
    }
    record.steps.push_back(rec);
    if (on_step) on_step(rec, acquisition);
  }

  record.final_prediction = prediction->summary;
  if (!model->chains().empty() && model->chains()[0].draws.rows() >= 4)
    record.final_diagnostics = diagnostics(model->chains());
  return record;
}

}  // namespace fbal::active
