#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace fbal {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Interval {
  double low;
  double high;
};

using Bounds = std::vector<Interval>;

bool inside(const Bounds& bounds, const Eigen::Ref<const Vector>& x);

/// Dense rectangular grid. Points are stored one per row, row-major over
/// dimensions: the last coordinate varies fastest.
class EvaluationGrid {
 public:
  EvaluationGrid(Bounds bounds, std::vector<std::size_t> resolution);

  const Bounds& bounds() const { return bounds_; }
  const std::vector<std::size_t>& resolution() const { return resolution_; }
  const Matrix& points() const { return points_; }
  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
  std::size_t dim() const { return bounds_.size(); }
  Vector point(std::size_t index) const { return points_.row(static_cast<Eigen::Index>(index)).transpose(); }
  /// Coordinates along one axis.
  std::vector<double> axis(std::size_t dim) const;

 private:
  Bounds bounds_;
  std::vector<std::size_t> resolution_;
  Matrix points_;
};

inline EvaluationGrid make_grid(Bounds bounds, std::vector<std::size_t> resolution) {
  return EvaluationGrid(std::move(bounds), std::move(resolution));
}

/// Endpoint-inclusive evenly spaced values.
std::vector<double> linspace(double low, double high, std::size_t count);

/// Observed (input, target) pairs inside a declared domain.
class Dataset {
 public:
  Dataset(Bounds bounds, Matrix inputs, Vector targets);

  const Bounds& bounds() const { return bounds_; }
  const Matrix& inputs() const { return inputs_; }
  const Vector& targets() const { return targets_; }
  std::size_t size() const { return static_cast<std::size_t>(targets_.size()); }
  std::size_t dim() const { return bounds_.size(); }

  void append(const Eigen::Ref<const Vector>& x, double y);

 private:
  Bounds bounds_;
  Matrix inputs_;  // n x d
  Vector targets_;
};

/// Inputs map affinely from the domain bounds onto [-1, 1]; targets are
/// z-scored with population moments of the current training set.
class Standardizer {
 public:
  static constexpr double kStdFloor = 1e-12;

  Standardizer() = default;
  Standardizer(Vector input_mean, Vector input_std, double target_mean, double target_std);

  const Vector& input_mean() const { return input_mean_; }
  const Vector& input_std() const { return input_std_; }
  double target_mean() const { return target_mean_; }
  double target_std() const { return target_std_; }

  /// Rows are points.
  Matrix standardize_inputs(const Matrix& x) const;
  Vector unstandardize_inputs(const Eigen::Ref<const Vector>& z) const;
  Vector standardize_targets(const Vector& y) const;
  double standardize_target(double y) const { return (y - target_mean_) / target_std_; }
  double unstandardize_target(double z) const { return z * target_std_ + target_mean_; }
  Vector unstandardize_targets(const Vector& z) const;
  double unstandardize_variance(double v) const { return v * target_std_ * target_std_; }

 private:
  Vector input_mean_;
  Vector input_std_;
  double target_mean_ = 0.0;
  double target_std_ = 1.0;
};

Standardizer fit_standardizer(const Dataset& data);

/// Dataset mapped into model space by a standardizer.
struct StandardizedData {
  Matrix inputs;  // n x d
  Vector targets;
};

StandardizedData standardize(const Standardizer& s, const Dataset& data);

}  // namespace fbal
