#pragma once

#include <string>
#include <string_view>

#include "fbal/rng.hpp"

namespace fbal {

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

/// Prior over a positive scale, sampled through its logarithm.
class ScalePrior {
 public:
  enum class Kind { kHalfNormal, kLogNormal };

  static ScalePrior half_normal(double scale);
  static ScalePrior log_normal(double location, double scale);
  /// Accepts "half-normal-<scale>" and "log-normal-<location>-<scale>".
  static ScalePrior parse(std::string_view name);

  Kind kind() const { return kind_; }
  std::string name() const;

  double log_density(double value) const;
  /// log p(exp(u)) + u, i.e. the density of u = log(value) including the
  /// Jacobian of the exp transform. Writes d/du when `d_du` is non-null.
  double log_density_of_log(double u, double* d_du = nullptr) const;
  double sample(Rng& rng) const;

  bool operator==(const ScalePrior&) const = default;

 private:
  ScalePrior(Kind kind, double a, double b, std::string label) : kind_(kind), a_(a), b_(b), label_(std::move(label)) {}

  Kind kind_;
  double a_;
  double b_;
  std::string label_;
};

}  // namespace fbal
