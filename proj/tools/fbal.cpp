// Command-line runner: list benchmarks, run configured sweeps, run the
// figure presets, and aggregate finished runs.

#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fbal/experiment.hpp"
#include "fbal/report.hpp"
#include "fbal/testbed.hpp"

namespace fs = std::filesystem;
namespace ex = fbal::experiment;
namespace rp = fbal::report;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCellFailure = 1;
constexpr int kExitUsage = 2;

std::string grid_text(const std::vector<std::size_t>& res) {
  std::string s;
  for (std::size_t i = 0; i < res.size(); ++i) s += (i ? "x" : "") + std::to_string(res[i]);
  return s;
}

int cmd_list(bool as_json) {
  const auto all = fbal::testbed::catalog();
  if (as_json) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& f : all) {
      nlohmann::json bounds = nlohmann::json::array();
      for (const auto& iv : f.bounds) bounds.push_back({iv.low, iv.high});
      out.push_back({{"name", f.name},
                     {"dim", f.dim()},
                     {"resolution", f.resolution},
                     {"bounds", bounds},
                     {"noise_sigma", f.noise_sigma},
                     {"default_steps", fbal::active::default_steps(f)}});
    }
    std::cout << out.dump(2) << '\n';
    return kExitOk;
  }
  for (const auto& f : all)
    std::cout << f.name << " | " << f.dim() << "D | " << grid_text(f.resolution) << " | "
              << ex::format_double(f.noise_sigma) << '\n';
  return kExitOk;
}

// Append-only progress log next to the runs, mirrored on stderr.
class ProgressLog {
 public:
  explicit ProgressLog(const fs::path& root) : out_(root / "progress.log", std::ios::app) {}

  void operator()(const std::string& line) {
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%S", std::localtime(&now));
    std::cerr << line << '\n';
    if (out_) out_ << stamp << ' ' << line << '\n' << std::flush;
  }

 private:
  std::ofstream out_;
};

bool prepare_root(const fs::path& root) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) {
    std::cerr << "error: cannot create output directory " << root << ": " << ec.message() << '\n';
    return false;
  }
  const fs::path probe = root / ".write-test";
  std::ofstream test(probe);
  if (!test) {
    std::cerr << "error: output directory " << root << " is not writable\n";
    return false;
  }
  test.close();
  fs::remove(probe, ec);
  return true;
}

void print_dry_run(const std::vector<ex::Cell>& cells, const fs::path& root) {
  for (const auto& c : cells) std::cout << (root / ex::cell_dir_name(c)).string() << '\n';
  std::cout << cells.size() << " cells\n";
}

int sweep_exit(const std::vector<ex::CellOutcome>& outcomes) {
  std::size_t failed = 0;
  for (const auto& o : outcomes)
    if (o.status == ex::CellStatus::kFailed) ++failed;
  std::cerr << outcomes.size() - failed << " of " << outcomes.size() << " cells succeeded\n";
  return failed ? kExitCellFailure : kExitOk;
}

std::vector<ex::CellOutcome> execute(const std::vector<ex::Cell>& cells, const fs::path& root, std::size_t jobs) {
  ProgressLog log(root);
  ex::SweepOptions opts;
  opts.jobs = jobs;
  opts.progress = [&log](const std::string& line) { log(line); };
  return ex::run_sweep(cells, root, opts);
}

int cmd_run(const std::string& config_path, std::size_t jobs, bool dry_run) {
  ex::ExperimentConfig cfg;
  std::vector<ex::Cell> cells;
  try {
    cfg = ex::load_config(config_path);
    cells = ex::expand(cfg);
  } catch (const ex::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  }
  const fs::path root = cfg.output_dir ? fs::path(*cfg.output_dir) : ex::default_output_root();
  if (dry_run) {
    print_dry_run(cells, root);
    return kExitOk;
  }
  if (!prepare_root(root)) return kExitUsage;
  return sweep_exit(execute(cells, root, jobs));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

int emit_report(const rp::Report& report, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  write_text(out_dir / "summary.csv", rp::summary_csv(report));
  write_text(out_dir / "learning_curves.csv", rp::curves_csv(report));
  write_text(out_dir / "tallies.txt", rp::tally_text(report));
  std::cout << rp::summary_csv(report) << '\n' << rp::tally_text(report);
  std::cout << "wrote " << (out_dir / "summary.csv").string() << " and learning_curves.csv\n";
  return kExitOk;
}

int cmd_bench(const std::string& preset, std::size_t jobs, bool dry_run, bool print_config) {
  ex::ExperimentConfig cfg;
  try {
    cfg = ex::bench_preset(preset);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (print_config) {
    std::cout << ex::to_json(cfg).dump(2) << '\n';
    return kExitOk;
  }
  // Presets share one pool of cell directories so overlapping sweeps (fig3,
  // fig4 and the 32-16-8 cells of fig5) are computed once.
  const fs::path base = ex::default_output_root();
  const fs::path cells_root = base / "cells";
  const auto cells = ex::expand(cfg);
  if (dry_run) {
    print_dry_run(cells, cells_root);
    return kExitOk;
  }
  if (!prepare_root(cells_root)) return kExitUsage;
  const auto outcomes = execute(cells, cells_root, jobs);
  std::vector<fs::path> dirs;
  for (const auto& o : outcomes)
    if (fs::exists(o.directory / "manifest.json")) dirs.push_back(o.directory);
  try {
    std::vector<rp::LoadedRun> runs;
    for (const auto& d : dirs) runs.push_back(rp::load_run(d));
    emit_report(rp::build_report(runs), base / preset);
  } catch (const rp::ReportError& e) {
    std::cerr << "report error: " << e.what() << '\n';
    return kExitCellFailure;
  }
  return sweep_exit(outcomes);
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& out) {
  std::vector<fs::path> paths(dirs.begin(), dirs.end());
  try {
    const auto runs = rp::load_runs(paths);
    const fs::path out_dir = out.empty() ? ex::default_output_root() / "report" : fs::path(out);
    return emit_report(rp::build_report(runs), out_dir);
  } catch (const rp::ReportError& e) {
    std::cerr << "report error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active learning with fully Bayesian surrogates (FBNN and GP) on benchmark functions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ex::software_version());

  auto* list = app.add_subcommand("list", "List the benchmark catalog");
  bool list_json = false;
  list->add_flag("--json", list_json, "Emit JSON instead of a table");

  auto* run = app.add_subcommand("run", "Run every cell of an experiment config (or a cell manifest)");
  std::string config_path;
  std::size_t jobs = ex::default_jobs();
  bool dry_run = false;
  run->add_option("--config", config_path, "Experiment config or manifest.json")->required()->check(CLI::ExistingFile);
  run->add_option("--jobs", jobs, "Concurrent cells")->check(CLI::PositiveNumber);
  run->add_flag("--dry-run", dry_run, "Print the expanded cells without running them");

  auto* bench = app.add_subcommand("bench", "Run a figure preset and write summary.csv");
  std::string preset;
  bool print_config = false;
  bench->add_option("preset", preset, "fig3 | fig4 | fig5a | fig5b | fig6")->required();
  bench->add_option("--jobs", jobs, "Concurrent cells")->check(CLI::PositiveNumber);
  bench->add_flag("--dry-run", dry_run, "Print the expanded cells without running them");
  bench->add_flag("--print-config", print_config, "Print the preset as a run config");

  auto* report = app.add_subcommand("report", "Aggregate finished runs: tallies, summary and learning curves");
  std::vector<std::string> dirs;
  std::string out;
  report->add_option("dirs", dirs, "Run directories or directories containing them")->required();
  report->add_option("--out", out, "Where to write summary.csv and learning_curves.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*list) return cmd_list(list_json);
    if (*run) return cmd_run(config_path, jobs, dry_run);
    if (*bench) return cmd_bench(preset, jobs, dry_run, print_config);
    if (*report) return cmd_report(dirs, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCellFailure;
  }
  return kExitUsage;
}
