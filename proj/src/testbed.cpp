#include "fbal/testbed.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fbal::testbed {

namespace {

using std::numbers::pi;

double discontinuous_1(const Vector& x) {
  const double v = x[0];
  return v < 1.0 ? 2.0 * std::pow(v, 1.5) : 0.5 + v * v;
}

double discontinuous_2(const Vector& x) {
  const double v = x[0];
  return v < 5.0 ? std::sin(2.0 * v) : std::sin(2.0 * v) + 2.0;
}

double discontinuous_3(const Vector& x) {
  const double v = x[0];
  if (v < 1.0) return v * v * v;
  if (v < 2.0) return v - 0.5;
  return std::exp(v - 2.0);
}

double nonstationary_1(const Vector& x) {
  const double v = x[0];
  if (v < 10.0) return std::sin(pi * v / 5.0) + 0.2 * std::cos(4.0 * pi * v / 5.0);
  return v / 10.0 - 1.0;
}

double nonstationary_2(const Vector& x) {
  const double v = x[0];
  if (v < 4.0 || v > 6.0) return std::sin(2.0 * v);
  return std::sin(25.0 * v) * std::exp(-2.0 * (v - 4.0));
}

double nonstationary_3(const Vector& x) {
  constexpr std::array<double, 3> centers{2.2, 5.7, 8.3};
  constexpr std::array<double, 3> amplitudes{2.5, -2.0, 3.0};
  constexpr double width = 0.08;
  const double v = x[0];
  double f = std::sin(2.0 * v);
  for (std::size_t j = 0; j < centers.size(); ++j) {
    const double u = v - centers[j];
    f += amplitudes[j] * std::exp(-u * u / (2.0 * width * width));
  }
  return f;
}

double phases2d(const Vector& x) {
  const double boundary = 0.5 + 0.2 * std::sin(2.0 * pi * x[0]);
  return x[1] > boundary ? 1.0 + 0.3 * x[0] : -1.0 + 0.4 * x[1];
}

double rays2d(const Vector& x) {
  constexpr std::array<double, 4> angles_deg{15.0, 30.0, 50.0, 75.0};
  constexpr double width = 0.02;
  double f = 0.0;
  for (double a : angles_deg) {
    const double phi = a * pi / 180.0;
    const double d = -x[0] * std::sin(phi) + x[1] * std::cos(phi);
    f += std::exp(-d * d / (2.0 * width * width));
  }
  return f;
}

constexpr std::uint64_t kIsingReferenceSeed = 0x1f1e2d3c4b5a6978ULL;

std::function<double(const Vector&)> ising_truth(IsingConfig cfg) {
  return [cfg](const Vector& x) {
    // Keyed by the exact coordinates so repeated evaluation is bit-identical.
    const auto key = std::bit_cast<std::uint64_t>(x[0]) * 0x9e3779b97f4a7c15ULL ^ std::bit_cast<std::uint64_t>(x[1]);
    Rng rng(kIsingReferenceSeed, key);
    return ising_measure(cfg, x[0], x[1], rng);
  };
}

double range_over_grid(const TestFunctionSpec& spec) {
  const EvaluationGrid g = spec.grid();
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = spec.evaluator(g.point(i));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return hi - lo;
}

TestFunctionSpec synthetic(std::string name, Bounds bounds, std::vector<std::size_t> resolution,
                           double (*f)(const Vector&)) {
  TestFunctionSpec spec{std::move(name), std::move(bounds), std::move(resolution), f, 0.0, Latency::kInstant, {}};
  spec.noise_sigma = kNoiseFraction * range_over_grid(spec);
  return spec;
}

TestFunctionSpec ising(std::string name, IsingObservable observable) {
  IsingConfig cfg;
  cfg.observable = observable;
  return {std::move(name), {{1.5, 3.5}, {-1.0, 1.0}}, {30, 30}, ising_truth(cfg), 0.0, Latency::kSimulated, cfg};
}

}  // namespace

void IsingConfig::validate() const {
  if (lattice < 4) throw std::invalid_argument("Ising lattice must be at least 4");
  if (warmup_sweeps < 1 || measurement_sweeps < 1) throw std::invalid_argument("Ising sweep counts must be >= 1");
}

double ising_measure(const IsingConfig& cfg, double temperature, double field, Rng& rng) {
  cfg.validate();
  if (!(temperature > 0.0)) throw std::invalid_argument("Ising temperature must be positive");
  const std::size_t l = cfg.lattice;
  const std::size_t n = l * l;
  const double j = cfg.coupling;
  std::vector<int> spin(n, field < 0.0 ? -1 : 1);

  // Acceptance probability for flipping spin s with neighbour sum nb:
  // dE = 2 s (J nb + h), indexed by (s + 1) / 2 and (nb + 4) / 2.
  double accept[2][5];
  for (int s = -1; s <= 1; s += 2)
    for (int nb = -4; nb <= 4; nb += 2) {
      const double de = 2.0 * s * (j * nb + field);
      accept[(s + 1) / 2][(nb + 4) / 2] = de <= 0.0 ? 1.0 : std::exp(-de / temperature);
    }

  auto neighbour_sum = [&](std::size_t i) {
    const std::size_t r = i / l, c = i % l;
    return spin[((r + 1) % l) * l + c] + spin[((r + l - 1) % l) * l + c] + spin[r * l + (c + 1) % l] +
           spin[r * l + (c + l - 1) % l];
  };

  long magnet = static_cast<long>(field < 0.0 ? -1 : 1) * static_cast<long>(n);
  double energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = i / l, c = i % l;
    energy -= j * spin[i] * (spin[((r + 1) % l) * l + c] + spin[r * l + (c + 1) % l]);
    energy -= field * spin[i];
  }

  auto sweep = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      const int s = spin[i];
      const int nb = neighbour_sum(i);
      const double p = accept[(s + 1) / 2][(nb + 4) / 2];
      if (p >= 1.0 || rng.uniform() < p) {
        spin[i] = -s;
        magnet -= 2 * s;
        energy += 2.0 * s * (j * nb + field);
      }
    }
  };

  for (std::size_t t = 0; t < cfg.warmup_sweeps; ++t) sweep();
  double abs_m = 0.0, e_sum = 0.0, e2_sum = 0.0;
  for (std::size_t t = 0; t < cfg.measurement_sweeps; ++t) {
    sweep();
    abs_m += std::abs(static_cast<double>(magnet)) / static_cast<double>(n);
    e_sum += energy;
    e2_sum += energy * energy;
  }
  const double count = static_cast<double>(cfg.measurement_sweeps);
  if (cfg.observable == IsingObservable::kMagnetization) return abs_m / count;
  const double mean_e = e_sum / count;
  const double var_e = std::max(0.0, e2_sum / count - mean_e * mean_e);
  return var_e / (static_cast<double>(n) * temperature * temperature);
}

double evaluate(const TestFunctionSpec& spec, const Vector& x) {
  if (!inside(spec.bounds, x)) throw std::out_of_range("point lies outside the domain of " + spec.name);
  return spec.evaluator(x);
}

double observe(const TestFunctionSpec& spec, const Vector& x, Rng& rng) {
  if (!inside(spec.bounds, x)) throw std::out_of_range("point lies outside the domain of " + spec.name);
  if (spec.ising) return ising_measure(*spec.ising, x[0], x[1], rng);
  const double f = spec.evaluator(x);
  if (spec.noise_sigma == 0.0) return f;
  return f + spec.noise_sigma * rng.normal();
}

std::vector<TestFunctionSpec> catalog() {
  std::vector<TestFunctionSpec> out;
  out.push_back(synthetic("discontinuous-1", {{0.0, 2.0}}, {200}, discontinuous_1));
  out.push_back(synthetic("discontinuous-2", {{0.0, 10.0}}, {200}, discontinuous_2));
  out.push_back(synthetic("discontinuous-3", {{0.0, 3.0}}, {200}, discontinuous_3));
  out.push_back(synthetic("nonstationary-1", {{0.0, 20.0}}, {200}, nonstationary_1));
  out.push_back(synthetic("nonstationary-2", {{0.0, 10.0}}, {200}, nonstationary_2));
  out.push_back(synthetic("nonstationary-3", {{0.0, 10.0}}, {200}, nonstationary_3));
  out.push_back(synthetic("phases2d", {{0.0, 1.0}, {0.0, 1.0}}, {50, 50}, phases2d));
  out.push_back(synthetic("rays2d", {{0.0, 1.0}, {0.0, 1.0}}, {50, 50}, rays2d));
  out.push_back(ising("ising2d-magnetization", IsingObservable::kMagnetization));
  out.push_back(ising("ising2d-heatcapacity", IsingObservable::kHeatCapacity));
  return out;
}

TestFunctionSpec lookup(std::string_view name) {
  for (auto& spec : catalog())
    if (spec.name == name) return spec;
  throw std::invalid_argument("unknown test function: " + std::string(name));
}

TestFunctionSpec with_resolution(const TestFunctionSpec& spec, std::vector<std::size_t> resolution) {
  if (resolution.size() != spec.dim()) throw std::invalid_argument("resolution override has wrong dimension");
  TestFunctionSpec out = spec;
  out.resolution = std::move(resolution);
  (void)out.grid();  // validates
  if (!out.ising) out.noise_sigma = kNoiseFraction * range_over_grid(out);
  return out;
}

Vector evaluate_grid(const TestFunctionSpec& spec, const EvaluationGrid& grid) {
  Vector truth(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) truth[static_cast<Eigen::Index>(i)] = evaluate(spec, grid.point(i));
  return truth;
}

}  // namespace fbal::testbed
