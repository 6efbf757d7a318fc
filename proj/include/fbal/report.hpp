#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbal/experiment.hpp"

namespace fbal::report {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepMetrics {
  std::size_t step = 0;
  double mse = 0.0;
  double nlpd = 0.0;
};

/// One persisted cell as read back from disk.
struct LoadedRun {
  std::filesystem::path directory;
  experiment::Cell cell;
  std::string label;
  bool complete = false;
  nlohmann::json grid;
  std::vector<StepMetrics> steps;
};

/// Accepts cell directories and directories that contain cell directories.
std::vector<LoadedRun> load_runs(const std::vector<std::filesystem::path>& paths);
LoadedRun load_run(const std::filesystem::path& dir);

struct GroupSummary {
  std::string function;
  std::string surrogate;
  std::string architecture;  // empty for GP kinds
  std::string noise_prior;   // empty for GP kinds
  std::size_t runs = 0;
  std::size_t failed = 0;
  std::optional<double> final_mse;
  std::optional<double> final_nlpd;
  /// Mean over seeds of the mean NLPD over the last (up to) ten steps.
  std::optional<double> last10_nlpd;
};

struct CurvePoint {
  std::string function;
  std::string surrogate;
  std::size_t step = 0;
  std::size_t runs = 0;
  double mse = 0.0;
  double nlpd = 0.0;
};

/// Per-function wins of `challenger` over `baseline` on one metric (lower is
/// better; ties count for neither).
struct Tally {
  std::string metric;
  std::string challenger;
  std::size_t challenger_wins = 0;
  std::string baseline;
  std::size_t baseline_wins = 0;
  std::size_t functions = 0;

  /// "mse: fbnn 1 / gp 0"
  std::string line() const;
};

struct Report {
  std::vector<GroupSummary> groups;
  std::vector<CurvePoint> curves;
  std::vector<Tally> tallies;
};

/// Failed runs count toward `failed` and are left out of the means. Runs of
/// the same function on different grids are rejected.
Report build_report(const std::vector<LoadedRun>& runs);

const GroupSummary* find_group(const Report& r, const std::string& function, const std::string& surrogate);

std::string summary_csv(const Report& r);
std::string curves_csv(const Report& r);
std::string tally_text(const Report& r);

}  // namespace fbal::report
