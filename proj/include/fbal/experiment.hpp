#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbal/active.hpp"

namespace fbal::experiment {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kOutputRootEnv = "FBAL_OUTPUT_ROOT";
inline constexpr const char* kDefaultOutputRoot = "runs";

std::string software_version();

/// Schema violation; `path` names the offending field (e.g. "surrogates[1].nuts.chains").
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// One surrogate setting on the sweep.
struct SurrogateSpec {
  active::SurrogateConfig config;

  /// "gp", "gp-map", "fbnn", or "fbnn-<arch>[-<prior>]" when the network
  /// departs from 32-16-8 with a Half-Normal(1) noise prior.
  std::string label() const;
};

struct ExperimentConfig {
  std::vector<std::string> functions;
  std::vector<SurrogateSpec> surrogates;
  std::vector<std::uint64_t> seeds;
  /// Unset: the benchmark's default budget.
  std::optional<std::size_t> steps;
  bool allow_remeasure = false;
  bool record_timing = false;
  std::map<std::string, std::vector<std::size_t>> resolution;
  std::optional<std::string> output_dir;
};

/// A fully resolved (function, surrogate, seed) campaign.
struct Cell {
  std::string function;
  std::vector<std::size_t> resolution;
  SurrogateSpec surrogate;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  bool allow_remeasure = false;
  bool record_timing = false;

  active::CampaignConfig campaign() const;
  testbed::TestFunctionSpec benchmark() const;
};

/// Parses a config document, or a cell manifest (which yields a one-cell
/// config). Throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Cartesian product functions x surrogates x seeds, duplicates removed,
/// in that nesting order.
std::vector<Cell> expand(const ExperimentConfig& cfg);

nlohmann::json cell_to_json(const Cell& cell);
Cell cell_from_json(const nlohmann::json& j, const std::string& path = "cell");
/// 16 hex digits of a hash over the canonical cell JSON.
std::string cell_hash(const Cell& cell);
/// "<function>__<label>__seed<k>__<hash>".
std::string cell_dir_name(const Cell& cell);

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

std::filesystem::path default_output_root();

enum class CellStatus { kComplete, kFailed, kCached };

struct CellOutcome {
  Cell cell;
  std::filesystem::path directory;
  CellStatus status = CellStatus::kComplete;
  std::string message;
  /// Final-step metrics, present when at least one step completed.
  std::optional<double> final_mse;
  std::optional<double> final_nlpd;
};

/// Runs one cell and writes manifest.json, steps.csv, diagnostics.csv,
/// final_prediction.csv (and timing.csv when timing is recorded) into
/// `root / cell_dir_name(cell)`. A directory already holding a completed
/// manifest for the same cell is reused.
CellOutcome run_cell(const Cell& cell, const std::filesystem::path& root);

using ProgressSink = std::function<void(const std::string& line)>;

struct SweepOptions {
  std::size_t jobs = 1;
  ProgressSink progress;
};

/// Runs every cell with at most `jobs` in flight. Never throws for cell
/// failures; they come back as outcomes. Outcomes follow cell order.
std::vector<CellOutcome> run_sweep(const std::vector<Cell>& cells, const std::filesystem::path& root,
                                   const SweepOptions& options);

/// Hardware threads / 2, at least 1.
std::size_t default_jobs();

/// Named sweeps behind `bench`: fig3, fig4 (same runs as fig3, read for
/// NLPD), fig5a, fig5b, fig6.
std::vector<std::string> bench_presets();
ExperimentConfig bench_preset(const std::string& name);

/// Sampler budgets used by the presets.
NutsConfig bench_fbnn_nuts();
NutsConfig bench_gp_nuts(std::size_t input_dim);

}  // namespace fbal::experiment
