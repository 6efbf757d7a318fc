#include "fbal/experiment.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#ifndef FBAL_VERSION
#define FBAL_VERSION "0.0.0"
#endif

namespace fbal::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

std::string software_version() { return FBAL_VERSION; }

ConfigError::ConfigError(std::string path, const std::string& message)
    : std::runtime_error(path + ": " + message), path_(std::move(path)) {}

namespace {

const bnn::MlpArchitecture kDefaultArch{};
const ScalePrior kDefaultNoisePrior = ScalePrior::half_normal(1.0);

std::string arch_name(const std::vector<std::size_t>& hidden) { return bnn::MlpArchitecture{1, hidden}.name(); }

// Strict reader over one JSON object: every key must be consumed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }
  std::string at(const char* key) const { return path_ + "." + key; }

  const json* get(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& require(const char* key) {
    const json* v = get(key);
    if (!v) throw ConfigError(at(key), "required field is missing");
    return *v;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(path_ + "." + it.key(), "unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
  return v.get<bool>();
}

std::uint64_t as_uint(const json& v, const std::string& path) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw ConfigError(path, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

std::size_t as_positive(const json& v, const std::string& path) {
  const std::uint64_t n = as_uint(v, path);
  if (n == 0) throw ConfigError(path, "must be positive");
  return static_cast<std::size_t>(n);
}

double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

const json& as_array(const json& v, const std::string& path, bool non_empty) {
  if (!v.is_array()) throw ConfigError(path, "expected an array");
  if (non_empty && v.empty()) throw ConfigError(path, "must not be empty");
  return v;
}

std::string index_path(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

std::vector<std::size_t> parse_arch(const json& v, const std::string& path) {
  try {
    return bnn::MlpArchitecture::parse_hidden(as_string(v, path));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

ScalePrior parse_prior(const json& v, const std::string& path) {
  const std::string name = as_string(v, path);
  try {
    return ScalePrior::parse(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

active::SurrogateKind parse_kind(const json& v, const std::string& path) {
  const std::string name = as_string(v, path);
  try {
    return active::parse_surrogate(name);
  } catch (const std::invalid_argument&) {
    throw ConfigError(path, "unknown surrogate \"" + name + "\" (expected fbnn, gp or gp-map)");
  }
}

void read_nuts(const json& j, const std::string& path, NutsConfig& nuts) {
  ObjectReader r(j, path);
  if (auto* v = r.get("warmup_steps")) nuts.warmup_steps = as_uint(*v, r.at("warmup_steps"));
  if (auto* v = r.get("kept_samples")) nuts.kept_samples = as_uint(*v, r.at("kept_samples"));
  if (auto* v = r.get("chains")) nuts.chains = as_uint(*v, r.at("chains"));
  if (auto* v = r.get("target_accept")) nuts.target_accept = as_double(*v, r.at("target_accept"));
  if (auto* v = r.get("max_tree_depth")) nuts.max_tree_depth = static_cast<int>(as_uint(*v, r.at("max_tree_depth")));
  if (auto* v = r.get("initial_step_size")) {
    if (v->is_null())
      nuts.initial_step_size.reset();
    else
      nuts.initial_step_size = as_double(*v, r.at("initial_step_size"));
  }
  r.finish();
  try {
    nuts.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

json nuts_to_json(const NutsConfig& n) {
  json j;
  j["warmup_steps"] = n.warmup_steps;
  j["kept_samples"] = n.kept_samples;
  j["chains"] = n.chains;
  j["target_accept"] = n.target_accept;
  j["max_tree_depth"] = n.max_tree_depth;
  j["initial_step_size"] = n.initial_step_size ? json(*n.initial_step_size) : json(nullptr);
  return j;
}

SurrogateSpec read_surrogate_object(const json& j, const std::string& path, const NutsConfig& default_nuts) {
  ObjectReader r(j, path);
  SurrogateSpec s;
  s.config.kind = parse_kind(r.require("kind"), r.at("kind"));
  s.config.nuts = default_nuts;
  const bool fbnn = s.config.kind == active::SurrogateKind::kFbnn;
  const bool sampled = s.config.kind != active::SurrogateKind::kGpMap;
  if (auto* v = r.get("architecture")) {
    if (!fbnn) throw ConfigError(r.at("architecture"), "only applies to fbnn");
    s.config.hidden = parse_arch(*v, r.at("architecture"));
  }
  if (auto* v = r.get("noise_prior")) {
    if (!fbnn) throw ConfigError(r.at("noise_prior"), "only applies to fbnn");
    s.config.noise_prior = parse_prior(*v, r.at("noise_prior"));
  }
  if (auto* v = r.get("nuts")) {
    if (!sampled) throw ConfigError(r.at("nuts"), "gp-map does not sample");
    read_nuts(*v, r.at("nuts"), s.config.nuts);
  }
  if (auto* v = r.get("map_restarts")) {
    if (sampled) throw ConfigError(r.at("map_restarts"), "only applies to gp-map");
    s.config.map_restarts = as_positive(*v, r.at("map_restarts"));
  }
  r.finish();
  return s;
}

json surrogate_to_json(const SurrogateSpec& s) {
  json j;
  const auto& c = s.config;
  j["kind"] = active::to_string(c.kind);
  switch (c.kind) {
    case active::SurrogateKind::kFbnn:
      j["architecture"] = arch_name(c.hidden);
      j["noise_prior"] = c.noise_prior.name();
      j["nuts"] = nuts_to_json(c.nuts);
      break;
    case active::SurrogateKind::kGp:
      j["nuts"] = nuts_to_json(c.nuts);
      break;
    case active::SurrogateKind::kGpMap:
      j["map_restarts"] = c.map_restarts;
      break;
  }
  return j;
}

std::vector<std::size_t> read_resolution(const json& v, const std::string& path, std::size_t dim) {
  as_array(v, path, true);
  if (v.size() != dim) throw ConfigError(path, "expected " + std::to_string(dim) + " entries");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t n = as_positive(v[i], index_path(path, i));
    if (n < 2) throw ConfigError(index_path(path, i), "resolution must be at least 2");
    out.push_back(n);
  }
  return out;
}

testbed::TestFunctionSpec checked_lookup(const std::string& name, const std::string& path) {
  try {
    return testbed::lookup(name);
  } catch (const std::invalid_argument&) {
    throw ConfigError(path, "unknown function \"" + name + "\"");
  }
}

ExperimentConfig parse_manifest(const json& doc) {
  ObjectReader r(doc, "manifest");
  for (const char* ignored : {"kind", "software_version", "status", "failure", "grid", "initial_indices", "final",
                              "diagnostics", "timing", "schema_version"})
    r.get(ignored);
  const Cell cell = cell_from_json(r.require("cell"), "manifest.cell");
  r.finish();
  ExperimentConfig cfg;
  cfg.functions = {cell.function};
  cfg.surrogates = {cell.surrogate};
  cfg.seeds = {cell.seed};
  cfg.steps = cell.steps;
  cfg.allow_remeasure = cell.allow_remeasure;
  cfg.record_timing = cell.record_timing;
  cfg.resolution[cell.function] = cell.resolution;
  return cfg;
}

}  // namespace

std::string SurrogateSpec::label() const {
  if (config.kind != active::SurrogateKind::kFbnn) return active::to_string(config.kind);
  std::string out = "fbnn";
  if (config.hidden != kDefaultArch.hidden) out += "-" + arch_name(config.hidden);
  if (!(config.noise_prior == kDefaultNoisePrior)) out += "-" + config.noise_prior.name();
  return out;
}

active::CampaignConfig Cell::campaign() const {
  active::CampaignConfig c;
  c.surrogate = surrogate.config;
  c.steps = steps;
  c.seed = seed;
  c.allow_remeasure = allow_remeasure;
  return c;
}

testbed::TestFunctionSpec Cell::benchmark() const {
  const auto spec = testbed::lookup(function);
  return resolution == spec.resolution ? spec : testbed::with_resolution(spec, resolution);
}

ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("$", "expected a JSON object");
  if (!doc.contains("schema_version")) throw ConfigError("$.schema_version", "required field is missing");
  const json& version = doc["schema_version"];
  if (!version.is_number_integer() || version.get<std::int64_t>() != kSchemaVersion)
    throw ConfigError("$.schema_version", "unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");
  if (doc.contains("cell")) return parse_manifest(doc);

  ObjectReader r(doc, "$");
  r.get("schema_version");
  ExperimentConfig cfg;

  NutsConfig default_nuts;
  if (auto* v = r.get("nuts")) read_nuts(*v, r.at("nuts"), default_nuts);

  std::vector<std::vector<std::size_t>> archs{kDefaultArch.hidden};
  if (auto* v = r.get("architectures")) {
    as_array(*v, r.at("architectures"), true);
    archs.clear();
    for (std::size_t i = 0; i < v->size(); ++i) archs.push_back(parse_arch((*v)[i], index_path(r.at("architectures"), i)));
  }
  std::vector<ScalePrior> priors{kDefaultNoisePrior};
  if (auto* v = r.get("noise_priors")) {
    as_array(*v, r.at("noise_priors"), true);
    priors.clear();
    for (std::size_t i = 0; i < v->size(); ++i) priors.push_back(parse_prior((*v)[i], index_path(r.at("noise_priors"), i)));
  }

  const json& fns = as_array(r.require("functions"), r.at("functions"), true);
  for (std::size_t i = 0; i < fns.size(); ++i) {
    const std::string p = index_path(r.at("functions"), i);
    const std::string name = as_string(fns[i], p);
    checked_lookup(name, p);
    cfg.functions.push_back(name);
  }

  // A bare kind string takes the sweep axes (architectures x noise_priors for
  // fbnn) and the shared NUTS settings; an object is one explicit setting.
  const json& surs = as_array(r.require("surrogates"), r.at("surrogates"), true);
  for (std::size_t i = 0; i < surs.size(); ++i) {
    const std::string p = index_path(r.at("surrogates"), i);
    if (surs[i].is_object()) {
      cfg.surrogates.push_back(read_surrogate_object(surs[i], p, default_nuts));
      continue;
    }
    SurrogateSpec base;
    base.config.kind = parse_kind(surs[i], p);
    base.config.nuts = default_nuts;
    if (base.config.kind != active::SurrogateKind::kFbnn) {
      cfg.surrogates.push_back(base);
      continue;
    }
    for (const auto& a : archs)
      for (const auto& pr : priors) {
        SurrogateSpec s = base;
        s.config.hidden = a;
        s.config.noise_prior = pr;
        cfg.surrogates.push_back(s);
      }
  }

  const json& seeds = as_array(r.require("seeds"), r.at("seeds"), true);
  for (std::size_t i = 0; i < seeds.size(); ++i) cfg.seeds.push_back(as_uint(seeds[i], index_path(r.at("seeds"), i)));

  if (auto* v = r.get("steps")) cfg.steps = as_positive(*v, r.at("steps"));
  if (auto* v = r.get("allow_remeasure")) cfg.allow_remeasure = as_bool(*v, r.at("allow_remeasure"));
  if (auto* v = r.get("record_timing")) cfg.record_timing = as_bool(*v, r.at("record_timing"));
  if (auto* v = r.get("output_dir")) cfg.output_dir = as_string(*v, r.at("output_dir"));
  if (auto* v = r.get("resolution")) {
    ObjectReader res(*v, r.at("resolution"));
    for (auto it = v->begin(); it != v->end(); ++it) {
      const std::string p = res.at(it.key().c_str());
      const auto spec = checked_lookup(it.key(), p);
      cfg.resolution[it.key()] = read_resolution(*res.get(it.key().c_str()), p, spec.dim());
    }
    res.finish();
  }
  r.finish();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot read file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

json to_json(const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["functions"] = cfg.functions;
  j["surrogates"] = json::array();
  for (const auto& s : cfg.surrogates) j["surrogates"].push_back(surrogate_to_json(s));
  j["seeds"] = cfg.seeds;
  if (cfg.steps) j["steps"] = *cfg.steps;
  j["allow_remeasure"] = cfg.allow_remeasure;
  j["record_timing"] = cfg.record_timing;
  if (!cfg.resolution.empty()) {
    j["resolution"] = json::object();
    for (const auto& [name, res] : cfg.resolution) j["resolution"][name] = res;
  }
  if (cfg.output_dir) j["output_dir"] = *cfg.output_dir;
  return j;
}

std::vector<Cell> expand(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty()) throw ConfigError("$.seeds", "must not be empty");
  std::vector<Cell> cells;
  std::set<std::string> seen;
  for (const auto& name : cfg.functions) {
    const auto spec = testbed::lookup(name);
    const auto res_it = cfg.resolution.find(name);
    for (const auto& s : cfg.surrogates)
      for (std::uint64_t seed : cfg.seeds) {
        Cell c;
        c.function = name;
        c.resolution = res_it == cfg.resolution.end() ? spec.resolution : res_it->second;
        c.surrogate = s;
        c.seed = seed;
        c.steps = cfg.steps ? *cfg.steps : active::default_steps(spec);
        c.allow_remeasure = cfg.allow_remeasure;
        c.record_timing = cfg.record_timing;
        if (seen.insert(cell_hash(c)).second) cells.push_back(std::move(c));
      }
  }
  return cells;
}

json cell_to_json(const Cell& c) {
  json j;
  j["function"] = c.function;
  j["resolution"] = c.resolution;
  j["surrogate"] = surrogate_to_json(c.surrogate);
  j["seed"] = c.seed;
  j["steps"] = c.steps;
  j["allow_remeasure"] = c.allow_remeasure;
  j["record_timing"] = c.record_timing;
  return j;
}

Cell cell_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  Cell c;
  c.function = as_string(r.require("function"), r.at("function"));
  const auto spec = checked_lookup(c.function, r.at("function"));
  c.resolution = read_resolution(r.require("resolution"), r.at("resolution"), spec.dim());
  c.surrogate = read_surrogate_object(r.require("surrogate"), r.at("surrogate"), NutsConfig{});
  c.seed = as_uint(r.require("seed"), r.at("seed"));
  c.steps = as_positive(r.require("steps"), r.at("steps"));
  c.allow_remeasure = as_bool(r.require("allow_remeasure"), r.at("allow_remeasure"));
  c.record_timing = as_bool(r.require("record_timing"), r.at("record_timing"));
  r.finish();
  return c;
}

std::string cell_hash(const Cell& cell) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(hash_string(cell_to_json(cell).dump())));
  return buf;
}

std::string cell_dir_name(const Cell& cell) {
  return cell.function + "__" + cell.surrogate.label() + "__seed" + std::to_string(cell.seed) + "__" +
         cell_hash(cell);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

fs::path default_output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? fs::path(env) : fs::path(kDefaultOutputRoot);
}

std::size_t default_jobs() {
  const unsigned hw = std::thread::hardware_concurrency();
  return std::max<std::size_t>(1, hw / 2);
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string coordinate_header(std::size_t dim) {
  std::string h;
  for (std::size_t k = 0; k < dim; ++k) h += "x" + std::to_string(k) + ",";
  return h;
}

std::string steps_csv(const active::RunRecord& rec, bool timing) {
  std::ostringstream o;
  o << "step,selected_index," << coordinate_header(rec.grid.dim())
    << "y_observed,mse,nlpd,max_uncertainty,fit_seconds\n";
  for (const auto& s : rec.steps) {
    o << s.step << ',' << s.selected_index << ',';
    for (Eigen::Index k = 0; k < s.x.size(); ++k) o << format_double(s.x[k]) << ',';
    o << format_double(s.y_observed) << ',' << format_double(s.mse) << ',' << format_double(s.nlpd) << ','
      << format_double(s.max_uncertainty) << ',' << (timing ? format_double(s.fit_seconds) : "NA") << '\n';
  }
  return o.str();
}

std::string diagnostics_csv(const active::RunRecord& rec) {
  std::ostringstream o;
  o << "step,dataset_size,divergences,max_split_rhat,fit_attempts\n";
  for (const auto& s : rec.steps)
    o << s.step << ',' << s.dataset_size << ',' << s.divergences << ',' << format_double(s.max_split_rhat) << ','
      << s.fit_attempts << '\n';
  return o.str();
}

std::string timing_csv(const active::RunRecord& rec) {
  std::ostringstream o;
  o << "step,fit_seconds\n0," << format_double(rec.initial_fit_seconds) << '\n';
  for (const auto& s : rec.steps) o << s.step << ',' << format_double(s.fit_seconds) << '\n';
  return o.str();
}

std::string final_prediction_csv(const active::RunRecord& rec) {
  std::ostringstream o;
  o << coordinate_header(rec.grid.dim()) << "mean,uncertainty,ground_truth\n";
  const Matrix& pts = rec.grid.points();
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index k = 0; k < pts.cols(); ++k) o << format_double(pts(i, k)) << ',';
    o << format_double(rec.final_prediction->mean[i]) << ',' << format_double(rec.final_prediction->uncertainty[i])
      << ',' << format_double(rec.ground_truth[i]) << '\n';
  }
  return o.str();
}

json grid_json(const EvaluationGrid& grid) {
  json b = json::array();
  for (const auto& iv : grid.bounds()) b.push_back({iv.low, iv.high});
  return {{"bounds", b}, {"resolution", grid.resolution()}};
}

std::optional<json> read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) return std::nullopt;
  try {
    return json::parse(in);
  } catch (const json::parse_error&) {
    return std::nullopt;
  }
}

void fill_final(CellOutcome& out, const json& manifest) {
  if (!manifest.contains("final")) return;
  const json& f = manifest["final"];
  if (f.contains("mse") && f["mse"].is_number()) out.final_mse = f["mse"].get<double>();
  if (f.contains("nlpd") && f["nlpd"].is_number()) out.final_nlpd = f["nlpd"].get<double>();
}

}  // namespace

CellOutcome run_cell(const Cell& cell, const fs::path& root) {
  CellOutcome out;
  out.cell = cell;
  out.directory = root / cell_dir_name(cell);

  if (auto m = read_manifest(out.directory);
      m && m->value("status", "") == "complete" && m->contains("cell") && (*m)["cell"] == cell_to_json(cell)) {
    out.status = CellStatus::kCached;
    fill_final(out, *m);
    return out;
  }

  fs::create_directories(out.directory);
  fs::remove(out.directory / "manifest.json");
  fs::remove(out.directory / "final_prediction.csv");

  const auto start = std::chrono::steady_clock::now();
  const active::RunRecord rec = active::run_campaign(cell.benchmark(), cell.campaign());
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  write_file(out.directory / "steps.csv", steps_csv(rec, cell.record_timing));
  write_file(out.directory / "diagnostics.csv", diagnostics_csv(rec));
  write_file(out.directory / "timing.csv", timing_csv(rec));
  if (rec.final_prediction) write_file(out.directory / "final_prediction.csv", final_prediction_csv(rec));

  json m;
  m["schema_version"] = kSchemaVersion;
  m["kind"] = "cell-manifest";
  m["software_version"] = software_version();
  m["cell"] = cell_to_json(cell);
  m["status"] = rec.failure ? "failed" : "complete";
  if (rec.failure) m["failure"] = {{"step", rec.failure->step}, {"message", rec.failure->message}};
  m["grid"] = grid_json(rec.grid);
  m["initial_indices"] = rec.initial_indices;
  if (!rec.steps.empty()) {
    m["final"] = {{"step", rec.steps.back().step}, {"mse", rec.steps.back().mse}, {"nlpd", rec.steps.back().nlpd}};
  }
  if (rec.final_diagnostics) {
    std::size_t attempts = 0;
    for (const auto& s : rec.steps) attempts = std::max(attempts, s.fit_attempts);
    m["diagnostics"] = {{"final_divergences", rec.final_diagnostics->divergences},
                        {"final_max_split_rhat", rec.final_diagnostics->max_split_rhat},
                        {"parameters", rec.final_diagnostics->parameters.size()},
                        {"max_fit_attempts", attempts}};
  }
  m["timing"] = {{"initial_fit_seconds", rec.initial_fit_seconds}, {"total_seconds", total}};
  write_file(out.directory / "manifest.json", m.dump(2) + "\n");

  fill_final(out, m);
  if (rec.failure) {
    out.status = CellStatus::kFailed;
    out.message = "step " + std::to_string(rec.failure->step) + ": " + rec.failure->message;
  }
  return out;
}

std::vector<CellOutcome> run_sweep(const std::vector<Cell>& cells, const fs::path& root, const SweepOptions& options) {
  std::vector<CellOutcome> outcomes(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  const std::size_t total = cells.size();
  auto log = [&](const std::string& line) {
    if (!options.progress) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    options.progress(line);
  };

  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      const Cell& cell = cells[i];
      const std::string tag = "[" + std::to_string(i + 1) + "/" + std::to_string(total) + "] " + cell_dir_name(cell);
      log(tag + " started");
      const auto start = std::chrono::steady_clock::now();
      try {
        outcomes[i] = run_cell(cell, root);
      } catch (const std::exception& e) {
        outcomes[i].cell = cell;
        outcomes[i].directory = root / cell_dir_name(cell);
        outcomes[i].status = CellStatus::kFailed;
        outcomes[i].message = e.what();
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      char elapsed[32];
      std::snprintf(elapsed, sizeof elapsed, "%.1fs", secs);
      switch (outcomes[i].status) {
        case CellStatus::kComplete:
          log(tag + " complete (" + elapsed + ")");
          break;
        case CellStatus::kCached:
          log(tag + " cached");
          break;
        case CellStatus::kFailed:
          log(tag + " FAILED (" + elapsed + "): " + outcomes[i].message);
          break;
      }
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, total));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return outcomes;
}

}  // namespace fbal::experiment
