#include "fbal/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

namespace fbal {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

Vector draw_momentum(std::size_t dim, Rng& rng) {
  Vector r(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = rng.normal();
  return r;
}

bool no_u_turn(const Vector& p_begin, const Vector& p_end, const Vector& rho) {
  return p_begin.dot(rho) > 0 && p_end.dot(rho) > 0;
}

double safe_energy(const PhasePoint& p) {
  const double h = p.hamiltonian();
  return std::isnan(h) ? std::numeric_limits<double>::infinity() : h;
}

// Recursive trajectory doubling. Momenta at the subtree ends and the summed
// momentum rho are tracked so the U-turn check can also be applied across the
// boundary between the two halves of every merged subtree.
class TreeBuilder {
 public:
  TreeBuilder(const LogDensityTarget& target, double step_size, double h0, Rng& rng)
      : target_(target), step_size_(step_size), h0_(h0), rng_(rng) {}

  bool build(int depth, PhasePoint& z, PhasePoint& proposal, Vector& p_begin, Vector& p_end, Vector& rho,
             double direction, double& log_sum_weight) {
    if (depth == 0) {
      const LeapfrogResult step = leapfrog(target_, z, direction * step_size_, h0_);
      z = step.point;
      ++n_leapfrog;
      const double h = safe_energy(z);
      if (step.divergent || h - h0_ > kDivergenceThreshold) divergent = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0_ - h);
      sum_metro_prob += (h0_ - h > 0) ? 1.0 : std::exp(h0_ - h);
      proposal = z;
      p_begin = z.momentum;
      p_end = z.momentum;
      rho += z.momentum;
      return !divergent;
    }

    double log_weight_init = kNegInf;
    Vector p_init_end;
    Vector rho_init = Vector::Zero(rho.size());
    if (!build(depth - 1, z, proposal, p_begin, p_init_end, rho_init, direction, log_weight_init)) return false;

    PhasePoint proposal_final = z;
    double log_weight_final = kNegInf;
    Vector p_final_begin;
    Vector rho_final = Vector::Zero(rho.size());
    if (!build(depth - 1, z, proposal_final, p_final_begin, p_end, rho_final, direction, log_weight_final))
      return false;

    const double log_weight_subtree = log_sum_exp(log_weight_init, log_weight_final);
    log_sum_weight = log_sum_exp(log_sum_weight, log_weight_subtree);
    if (log_weight_final > log_weight_subtree) {
      proposal = std::move(proposal_final);
    } else if (rng_.uniform() < std::exp(log_weight_final - log_weight_subtree)) {
      proposal = std::move(proposal_final);
    }

    const Vector rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = no_u_turn(p_begin, p_end, rho_subtree);
    persist = persist && no_u_turn(p_begin, p_final_begin, rho_init + p_final_begin);
    persist = persist && no_u_turn(p_init_end, p_end, rho_final + p_init_end);
    return persist;
  }

  std::size_t n_leapfrog = 0;
  double sum_metro_prob = 0.0;
  bool divergent = false;

 private:
  const LogDensityTarget& target_;
  double step_size_;
  double h0_;
  Rng& rng_;
};

double clamp_step(double eps) { return std::clamp(eps, DualAveraging::kMinStep, DualAveraging::kMaxStep); }

}  // namespace

double PhasePoint::hamiltonian() const { return -log_density + 0.5 * momentum.squaredNorm(); }

PhasePoint make_phase_point(const LogDensityTarget& target, const Vector& position, const Vector& momentum) {
  PhasePoint p;
  p.position = position;
  p.momentum = momentum;
  p.gradient.resize(position.size());
  p.log_density = target.evaluate(position, p.gradient);
  return p;
}

LeapfrogResult leapfrog(const LogDensityTarget& target, const PhasePoint& start, double step_size,
                        std::optional<double> reference_energy) {
  const double h_ref = reference_energy ? *reference_energy : start.hamiltonian();
  LeapfrogResult out;
  PhasePoint& p = out.point;
  p.momentum = start.momentum + 0.5 * step_size * start.gradient;
  p.position = start.position + step_size * p.momentum;
  p.gradient.resize(start.position.size());
  p.log_density = target.evaluate(p.position, p.gradient);
  if (!std::isfinite(p.log_density) || !p.gradient.allFinite()) {
    p.log_density = kNegInf;
    p.gradient.setZero();
    out.divergent = true;
    return out;
  }
  p.momentum += 0.5 * step_size * p.gradient;
  const double h = p.hamiltonian();
  out.divergent = std::isnan(h) || h - h_ref > kDivergenceThreshold;
  return out;
}

void NutsConfig::validate() const {
  if (warmup_steps < 10) throw std::invalid_argument("NUTS warmup_steps must be >= 10");
  if (kept_samples < 1) throw std::invalid_argument("NUTS kept_samples must be >= 1");
  if (chains < 1) throw std::invalid_argument("NUTS chains must be >= 1");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw std::invalid_argument("NUTS target_accept must be in (0, 1)");
  if (max_tree_depth < 1 || max_tree_depth > 15) throw std::invalid_argument("NUTS max_tree_depth must be in [1, 15]");
  if (initial_step_size && !(*initial_step_size > 0.0)) throw std::invalid_argument("NUTS initial_step_size must be > 0");
}

DualAveraging::DualAveraging(double initial_step_size, double target_accept, double gamma, double t0, double kappa)
    : target_(target_accept),
      gamma_(gamma),
      t0_(t0),
      kappa_(kappa),
      mu_(std::log(10.0 * initial_step_size)),
      step_size_(initial_step_size) {}

double DualAveraging::update(double accept_stat) {
  accept_stat = std::min(1.0, std::isfinite(accept_stat) ? accept_stat : 0.0);
  counter_ += 1.0;
  const double eta = 1.0 / (counter_ + t0_);
  s_bar_ = (1.0 - eta) * s_bar_ + eta * (target_ - accept_stat);
  const double x = mu_ - s_bar_ * std::sqrt(counter_) / gamma_;
  const double x_eta = std::pow(counter_, -kappa_);
  x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
  step_size_ = clamp_step(std::exp(x));
  return step_size_;
}

double DualAveraging::final_step_size() const {
  return counter_ == 0.0 ? step_size_ : clamp_step(std::exp(x_bar_));
}

std::vector<double> adapt_step_size(const std::vector<double>& accept_stats, double initial_step_size,
                                    const NutsConfig& cfg) {
  DualAveraging da(initial_step_size, cfg.target_accept);
  std::vector<double> schedule;
  schedule.reserve(accept_stats.size());
  for (double a : accept_stats) schedule.push_back(da.update(a));
  return schedule;
}

double find_reasonable_step_size(const LogDensityTarget& target, const Vector& position, Rng& rng, double initial) {
  const std::size_t dim = target.dimension;
  double eps = initial;
  const double log_threshold = std::log(0.8);
  PhasePoint z = make_phase_point(target, position, draw_momentum(dim, rng));
  double h0 = z.hamiltonian();
  LeapfrogResult step = leapfrog(target, z, eps);
  double delta = h0 - safe_energy(step.point);
  const int direction = delta > log_threshold ? 1 : -1;
  for (int iter = 0; iter < 100; ++iter) {
    z.momentum = draw_momentum(dim, rng);
    h0 = z.hamiltonian();
    step = leapfrog(target, z, eps);
    delta = h0 - safe_energy(step.point);
    if (direction == 1 && !(delta > log_threshold)) break;
    if (direction == -1 && !(delta < log_threshold)) break;
    eps = direction == 1 ? 2.0 * eps : 0.5 * eps;
    if (eps > 1e7 || eps < 1e-8) break;
  }
  return clamp_step(eps);
}

PhasePoint nuts_transition(const LogDensityTarget& target, const PhasePoint& current, double step_size,
                           int max_tree_depth, Rng& rng, TransitionInfo& info) {
  PhasePoint z = current;
  z.momentum = draw_momentum(target.dimension, rng);
  const double h0 = z.hamiltonian();

  PhasePoint z_forward = z;
  PhasePoint z_backward = z;
  PhasePoint z_sample = z;
  PhasePoint z_propose = z;

  // Momenta at the outer and inner ends of the forward / backward halves.
  Vector p_fwd_fwd = z.momentum, p_fwd_bck = z.momentum;
  Vector p_bck_fwd = z.momentum, p_bck_bck = z.momentum;
  Vector rho = z.momentum;
  double log_sum_weight = 0.0;

  TreeBuilder builder(target, step_size, h0, rng);
  int depth = 0;
  while (depth < max_tree_depth) {
    Vector rho_fwd = Vector::Zero(rho.size());
    Vector rho_bck = Vector::Zero(rho.size());
    double log_weight_subtree = kNegInf;
    bool valid = false;

    if (rng.uniform() > 0.5) {
      z = z_forward;
      rho_bck = rho;
      p_bck_fwd = p_fwd_bck;
      valid = builder.build(depth, z, z_propose, p_fwd_bck, p_fwd_fwd, rho_fwd, 1.0, log_weight_subtree);
      z_forward = z;
    } else {
      z = z_backward;
      rho_fwd = rho;
      p_fwd_bck = p_bck_fwd;
      valid = builder.build(depth, z, z_propose, p_bck_fwd, p_bck_bck, rho_bck, -1.0, log_weight_subtree);
      z_backward = z;
    }
    if (!valid) break;
    ++depth;

    if (log_weight_subtree > log_sum_weight) {
      z_sample = z_propose;
    } else if (rng.uniform() < std::exp(log_weight_subtree - log_sum_weight)) {
      z_sample = z_propose;
    }
    log_sum_weight = log_sum_exp(log_sum_weight, log_weight_subtree);

    rho = rho_bck + rho_fwd;
    bool persist = no_u_turn(p_bck_bck, p_fwd_fwd, rho);
    persist = persist && no_u_turn(p_bck_bck, p_fwd_bck, rho_bck + p_fwd_bck);
    persist = persist && no_u_turn(p_bck_fwd, p_fwd_fwd, rho_fwd + p_bck_fwd);
    if (!persist) break;
  }

  info.tree_depth = depth;
  info.leapfrog_steps = builder.n_leapfrog;
  info.divergent = builder.divergent;
  info.accept_stat = builder.n_leapfrog > 0 ? builder.sum_metro_prob / static_cast<double>(builder.n_leapfrog) : 0.0;
  return z_sample;
}

namespace {

SampleChain run_chain(const LogDensityTarget& target, const Vector& init, const NutsConfig& cfg, Rng rng) {
  Vector grad(init.size());
  if (!std::isfinite(target.evaluate(init, grad)))
    throw SamplerError("NUTS initial point has non-finite log density");

  PhasePoint z = make_phase_point(target, init, Vector::Zero(init.size()));
  double step = cfg.initial_step_size ? *cfg.initial_step_size : find_reasonable_step_size(target, init, rng);
  DualAveraging adapter(step, cfg.target_accept);

  SampleChain chain;
  const auto dim = static_cast<Eigen::Index>(target.dimension);
  chain.draws.resize(static_cast<Eigen::Index>(cfg.kept_samples), dim);
  chain.log_density.resize(static_cast<Eigen::Index>(cfg.kept_samples));

  double accept_sum = 0.0;
  double depth_sum = 0.0;
  const std::size_t total = cfg.warmup_steps + cfg.kept_samples;
  for (std::size_t it = 0; it < total; ++it) {
    const bool warmup = it < cfg.warmup_steps;
    TransitionInfo info;
    z = nuts_transition(target, z, step, cfg.max_tree_depth, rng, info);
    if (warmup) {
      if (info.divergent) ++chain.warmup_divergence_count;
      step = adapter.update(info.accept_stat);
      if (it + 1 == cfg.warmup_steps) step = adapter.final_step_size();
      continue;
    }
    const auto row = static_cast<Eigen::Index>(it - cfg.warmup_steps);
    chain.draws.row(row) = z.position.transpose();
    chain.log_density[row] = z.log_density;
    accept_sum += info.accept_stat;
    depth_sum += info.tree_depth;
    if (info.divergent) ++chain.divergence_count;
    chain.max_leapfrog_steps = std::max(chain.max_leapfrog_steps, info.leapfrog_steps);
  }
  chain.accept_stat_mean = accept_sum / static_cast<double>(cfg.kept_samples);
  chain.mean_tree_depth = depth_sum / static_cast<double>(cfg.kept_samples);
  chain.adapted_step_size = step;

  if (2 * chain.divergence_count > cfg.kept_samples)
    throw SamplerError("NUTS: " + std::to_string(chain.divergence_count) + " of " + std::to_string(cfg.kept_samples) +
                       " post-warmup transitions diverged");
  return chain;
}

}  // namespace

std::vector<SampleChain> nuts_sample(const LogDensityTarget& target, const Vector& init, const NutsConfig& cfg) {
  return nuts_sample(target, std::vector<Vector>(cfg.chains, init), cfg);
}

std::vector<SampleChain> nuts_sample(const LogDensityTarget& target, const std::vector<Vector>& inits,
                                     const NutsConfig& cfg) {
  cfg.validate();
  if (inits.size() != cfg.chains) throw std::invalid_argument("NUTS needs one initial point per chain");
  for (const auto& init : inits) {
    if (static_cast<std::size_t>(init.size()) != target.dimension)
      throw std::invalid_argument("NUTS initial point has wrong dimension");
    if (!init.allFinite()) throw std::invalid_argument("NUTS initial point must be finite");
  }

  const Rng root(cfg.seed, cfg.stream);
  std::vector<SampleChain> chains(cfg.chains);
  if (cfg.chains == 1) {
    chains[0] = run_chain(target, inits[0], cfg, root.split(std::uint64_t{0}));
    return chains;
  }

  std::vector<std::exception_ptr> errors(cfg.chains);
  std::vector<std::thread> workers;
  for (std::size_t c = 0; c < cfg.chains; ++c) {
    workers.emplace_back([&, c] {
      try {
        chains[c] = run_chain(target, inits[c], cfg, root.split(static_cast<std::uint64_t>(c)));
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return chains;
}

double split_rhat(const std::vector<Vector>& chains) {
  std::vector<Vector> halves;
  for (const auto& c : chains) {
    const Eigen::Index half = c.size() / 2;
    if (half < 2) continue;
    halves.push_back(c.head(half));
    halves.push_back(c.tail(half));
  }
  if (halves.size() < 2) return 1.0;
  const auto m = static_cast<double>(halves.size());
  const auto n = static_cast<double>(halves[0].size());
  double grand = 0.0;
  std::vector<double> means;
  double within = 0.0;
  for (const auto& h : halves) {
    const double mu = h.mean();
    means.push_back(mu);
    grand += mu;
    within += (h.array() - mu).square().sum() / (n - 1.0);
  }
  grand /= m;
  within /= m;
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= n / (m - 1.0);
  if (!(within > 0.0)) return between > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double var_plus = (n - 1.0) / n * within + between / n;
  return std::sqrt(var_plus / within);
}

ChainDiagnostics diagnostics(const std::vector<SampleChain>& chains) {
  if (chains.empty()) throw std::invalid_argument("diagnostics needs at least one chain");
  const Eigen::Index dim = chains[0].draws.cols();
  ChainDiagnostics out;
  for (const auto& c : chains) {
    if (c.draws.rows() < 4) throw std::invalid_argument("diagnostics needs at least 4 draws per chain");
    if (c.draws.cols() != dim) throw std::invalid_argument("diagnostics: chains differ in dimension");
    out.divergences += c.divergence_count;
  }
  for (Eigen::Index k = 0; k < dim; ++k) {
    std::vector<Vector> columns;
    double sum = 0.0, count = 0.0;
    for (const auto& c : chains) {
      columns.emplace_back(c.draws.col(k));
      sum += c.draws.col(k).sum();
      count += static_cast<double>(c.draws.rows());
    }
    const double mean = sum / count;
    double ss = 0.0;
    for (const auto& col : columns) ss += (col.array() - mean).square().sum();
    ParameterSummary p{mean, std::sqrt(ss / std::max(1.0, count - 1.0)), split_rhat(columns)};
    out.max_split_rhat = std::max(out.max_split_rhat, p.split_rhat);
    out.parameters.push_back(p);
  }
  return out;
}

}  // namespace fbal
