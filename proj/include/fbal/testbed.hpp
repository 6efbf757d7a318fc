#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fbal/core.hpp"
#include "fbal/rng.hpp"

namespace fbal::testbed {

enum class IsingObservable { kMagnetization, kHeatCapacity };

struct IsingConfig {
  std::size_t lattice = 16;
  double coupling = 1.0;
  std::size_t warmup_sweeps = 500;
  std::size_t measurement_sweeps = 2000;
  IsingObservable observable = IsingObservable::kMagnetization;

  void validate() const;
};

/// Metropolis single-spin-flip simulation of the periodic L x L Ising model
/// with E = -J sum_<ij> s_i s_j - h sum_i s_i, started from the fully aligned
/// state (along the field; up when h = 0). Returns <|m|> per spin or the heat
/// capacity per spin (<E^2> - <E>^2) / (L^2 T^2), per `cfg.observable`.
double ising_measure(const IsingConfig& cfg, double temperature, double field, Rng& rng);

enum class Latency { kInstant, kSimulated };

struct TestFunctionSpec {
  std::string name;
  Bounds bounds;
  std::vector<std::size_t> resolution;
  std::function<double(const Vector&)> evaluator;
  /// Additive observation noise (raw units); 0 for Ising, whose Monte Carlo
  /// fluctuations are the noise.
  double noise_sigma = 0.0;
  Latency latency = Latency::kInstant;
  std::optional<IsingConfig> ising;

  std::size_t dim() const { return bounds.size(); }
  EvaluationGrid grid() const { return make_grid(bounds, resolution); }
};

/// Noiseless ground truth. For Ising benchmarks this is one simulation with a
/// fixed reference stream keyed by the coordinates.
double evaluate(const TestFunctionSpec& spec, const Vector& x);
double observe(const TestFunctionSpec& spec, const Vector& x, Rng& rng);

/// All ten benchmarks (both Ising observables) at their default resolution.
std::vector<TestFunctionSpec> catalog();
TestFunctionSpec lookup(std::string_view name);
/// Same benchmark on a different grid; additive noise is rescaled to 2% of
/// the function's range over the new grid.
TestFunctionSpec with_resolution(const TestFunctionSpec& spec, std::vector<std::size_t> resolution);

/// Ground truth over every grid point.
Vector evaluate_grid(const TestFunctionSpec& spec, const EvaluationGrid& grid);

inline constexpr double kNoiseFraction = 0.02;

}  // namespace fbal::testbed
