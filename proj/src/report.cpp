#include "fbal/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fbal::report {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const fs::path& file) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ReportError(file.string() + ": bad number \"" + s + "\"");
  }
}

std::vector<StepMetrics> read_steps(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ReportError(file.string() + ": cannot read");
  std::string line;
  if (!std::getline(in, line)) throw ReportError(file.string() + ": empty file");
  const auto header = split_csv_line(line);
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ReportError(file.string() + ": missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_step = column("step"), c_mse = column("mse"), c_nlpd = column("nlpd");
  std::vector<StepMetrics> steps;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) throw ReportError(file.string() + ": ragged row");
    steps.push_back({static_cast<std::size_t>(parse_number(f[c_step], file)), parse_number(f[c_mse], file),
                     parse_number(f[c_nlpd], file)});
  }
  return steps;
}

bool is_cell_dir(const fs::path& p) { return fs::is_regular_file(p / "manifest.json"); }

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string fmt(const std::optional<double>& v) { return v ? experiment::format_double(*v) : "NA"; }

}  // namespace

LoadedRun load_run(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ReportError(dir.string() + ": no manifest.json");
  json m;
  try {
    m = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ReportError(dir.string() + ": invalid manifest: " + e.what());
  }
  if (!m.contains("cell") || !m.contains("grid")) throw ReportError(dir.string() + ": manifest lacks cell or grid");
  LoadedRun run;
  run.directory = dir;
  try {
    run.cell = experiment::cell_from_json(m["cell"], "manifest.cell");
  } catch (const experiment::ConfigError& e) {
    throw ReportError(dir.string() + ": " + e.what());
  }
  run.label = run.cell.surrogate.label();
  run.complete = m.value("status", "") == "complete";
  run.grid = m["grid"];
  if (fs::exists(dir / "steps.csv")) run.steps = read_steps(dir / "steps.csv");
  return run;
}

std::vector<LoadedRun> load_runs(const std::vector<fs::path>& paths) {
  std::vector<LoadedRun> runs;
  for (const auto& p : paths) {
    if (!fs::is_directory(p)) throw ReportError(p.string() + ": not a directory");
    if (is_cell_dir(p)) {
      runs.push_back(load_run(p));
      continue;
    }
    std::vector<fs::path> children;
    for (const auto& entry : fs::directory_iterator(p))
      if (entry.is_directory() && is_cell_dir(entry.path())) children.push_back(entry.path());
    std::sort(children.begin(), children.end());
    if (children.empty()) throw ReportError(p.string() + ": no run directories found");
    for (const auto& c : children) runs.push_back(load_run(c));
  }
  return runs;
}

std::string Tally::line() const {
  return metric + ": " + challenger + " " + std::to_string(challenger_wins) + " / " + baseline + " " +
         std::to_string(baseline_wins);
}

Report build_report(const std::vector<LoadedRun>& runs) {
  // Same function must mean same grid everywhere.
  std::map<std::string, json> grids;
  std::set<std::string> seen_cells;
  for (const auto& r : runs) {
    auto [it, inserted] = grids.emplace(r.cell.function, r.grid);
    if (!inserted && it->second != r.grid)
      throw ReportError("incompatible grids for " + r.cell.function + " (" + r.directory.string() + ")");
    const std::string key = r.cell.function + "|" + r.label + "|" + std::to_string(r.cell.seed);
    if (!seen_cells.insert(key).second)
      throw ReportError("duplicate run for " + r.cell.function + " / " + r.label + " / seed " +
                        std::to_string(r.cell.seed) + " (" + r.directory.string() + ")");
  }

  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::vector<const LoadedRun*>> by_group;
  for (const auto& r : runs) by_group[{r.cell.function, r.label}].push_back(&r);

  Report report;
  for (const auto& [key, members] : by_group) {
    GroupSummary g;
    g.function = key.first;
    g.surrogate = key.second;
    const auto& sc = members.front()->cell.surrogate.config;
    if (sc.kind == active::SurrogateKind::kFbnn) {
      g.architecture = bnn::MlpArchitecture{1, sc.hidden}.name();
      g.noise_prior = sc.noise_prior.name();
    }
    g.runs = members.size();
    std::vector<double> mse, nlpd, last10;
    std::map<std::size_t, std::vector<const StepMetrics*>> per_step;
    for (const LoadedRun* r : members) {
      if (!r->complete || r->steps.empty()) {
        ++g.failed;
        continue;
      }
      mse.push_back(r->steps.back().mse);
      nlpd.push_back(r->steps.back().nlpd);
      const std::size_t from = r->steps.size() > 10 ? r->steps.size() - 10 : 0;
      std::vector<double> tail;
      for (std::size_t i = from; i < r->steps.size(); ++i) tail.push_back(r->steps[i].nlpd);
      last10.push_back(mean(tail));
      for (const auto& s : r->steps) per_step[s.step].push_back(&s);
    }
    if (!mse.empty()) {
      g.final_mse = mean(mse);
      g.final_nlpd = mean(nlpd);
      g.last10_nlpd = mean(last10);
    }
    report.groups.push_back(g);
    for (const auto& [step, items] : per_step) {
      CurvePoint c{g.function, g.surrogate, step, items.size(), 0.0, 0.0};
      for (const StepMetrics* s : items) {
        c.mse += s->mse;
        c.nlpd += s->nlpd;
      }
      c.mse /= static_cast<double>(items.size());
      c.nlpd /= static_cast<double>(items.size());
      report.curves.push_back(c);
    }
  }

  std::set<std::string> labels;
  for (const auto& g : report.groups) labels.insert(g.surrogate);
  std::string baseline;
  if (labels.count("gp"))
    baseline = "gp";
  else if (labels.size() == 2)
    baseline = *labels.rbegin();
  if (baseline.empty()) return report;

  for (const auto& challenger : labels) {
    if (challenger == baseline) continue;
    for (const char* metric : {"mse", "nlpd", "nlpd-last10"}) {
      Tally t{metric, challenger, 0, baseline, 0, 0};
      for (const auto& [fn, grid] : grids) {
        (void)grid;
        const GroupSummary* a = find_group(report, fn, challenger);
        const GroupSummary* b = find_group(report, fn, baseline);
        if (!a || !b) continue;
        auto pick = [&](const GroupSummary* g) {
          const std::string m = metric;
          return m == "mse" ? g->final_mse : m == "nlpd" ? g->final_nlpd : g->last10_nlpd;
        };
        const auto va = pick(a), vb = pick(b);
        if (!va || !vb) continue;
        ++t.functions;
        if (*va < *vb) ++t.challenger_wins;
        if (*vb < *va) ++t.baseline_wins;
      }
      report.tallies.push_back(t);
    }
  }
  return report;
}

const GroupSummary* find_group(const Report& r, const std::string& function, const std::string& surrogate) {
  for (const auto& g : r.groups)
    if (g.function == function && g.surrogate == surrogate) return &g;
  return nullptr;
}

std::string summary_csv(const Report& r) {
  std::ostringstream o;
  o << "function,surrogate,architecture,noise_prior,runs,failed,final_mse_mean,final_nlpd_mean,last10_nlpd_mean\n";
  for (const auto& g : r.groups)
    o << g.function << ',' << g.surrogate << ',' << g.architecture << ',' << g.noise_prior << ',' << g.runs << ','
      << g.failed << ',' << fmt(g.final_mse) << ',' << fmt(g.final_nlpd) << ',' << fmt(g.last10_nlpd) << '\n';
  return o.str();
}

std::string curves_csv(const Report& r) {
  std::ostringstream o;
  o << "function,surrogate,step,runs,mse_mean,nlpd_mean\n";
  for (const auto& c : r.curves)
    o << c.function << ',' << c.surrogate << ',' << c.step << ',' << c.runs << ','
      << experiment::format_double(c.mse) << ',' << experiment::format_double(c.nlpd) << '\n';
  return o.str();
}

std::string tally_text(const Report& r) {
  std::ostringstream o;
  for (const auto& t : r.tallies) o << t.line() << " (of " << t.functions << " functions)\n";
  return o.str();
}

}  // namespace fbal::report
