#include <stdexcept>

#include "fbal/experiment.hpp"

namespace fbal::experiment {

namespace {

const std::vector<std::string> kOneD{"discontinuous-1", "discontinuous-2", "discontinuous-3",
                                     "nonstationary-1", "nonstationary-2", "nonstationary-3"};
const std::vector<std::string> kTwoD{"phases2d", "rays2d", "ising2d-magnetization", "ising2d-heatcapacity"};
const std::vector<std::uint64_t> kSeeds{0, 1, 2};

SurrogateSpec fbnn(std::vector<std::size_t> hidden, ScalePrior prior) {
  SurrogateSpec s;
  s.config.kind = active::SurrogateKind::kFbnn;
  s.config.hidden = std::move(hidden);
  s.config.noise_prior = std::move(prior);
  s.config.nuts = bench_fbnn_nuts();
  return s;
}

SurrogateSpec gp(std::size_t dim) {
  SurrogateSpec s;
  s.config.kind = active::SurrogateKind::kGp;
  s.config.nuts = bench_gp_nuts(dim);
  return s;
}

}  // namespace

NutsConfig bench_fbnn_nuts() {
  NutsConfig n;
  n.warmup_steps = 150;
  n.kept_samples = 100;
  n.max_tree_depth = 7;
  return n;
}

NutsConfig bench_gp_nuts(std::size_t input_dim) {
  NutsConfig n;
  if (input_dim > 1) {
    n.warmup_steps = 150;
    n.kept_samples = 100;
  }
  return n;
}

std::vector<std::string> bench_presets() { return {"fig3", "fig4", "fig5a", "fig5b", "fig6"}; }

ExperimentConfig bench_preset(const std::string& name) {
  ExperimentConfig cfg;
  cfg.seeds = kSeeds;
  const ScalePrior hn1 = ScalePrior::half_normal(1.0);
  if (name == "fig3" || name == "fig4") {
    cfg.functions = kOneD;
    cfg.surrogates = {fbnn({32, 16, 8}, hn1), gp(1)};
  } else if (name == "fig5a") {
    cfg.functions = kOneD;
    cfg.surrogates = {fbnn({64, 32, 16}, hn1), fbnn({32, 16, 8}, hn1), fbnn({32, 32}, hn1), gp(1)};
  } else if (name == "fig5b") {
    cfg.functions = kOneD;
    cfg.surrogates = {fbnn({32, 16, 8}, hn1), fbnn({32, 16, 8}, ScalePrior::half_normal(0.1)),
                      fbnn({32, 16, 8}, ScalePrior::log_normal(0.0, 1.0)), gp(1)};
  } else if (name == "fig6") {
    cfg.functions = kTwoD;
    cfg.surrogates = {fbnn({32, 16, 8}, hn1), gp(2)};
  } else {
    throw std::invalid_argument("unknown bench preset: " + name);
  }
  return cfg;
}

}  // namespace fbal::experiment
