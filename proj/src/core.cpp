#include "fbal/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fbal {

bool inside(const Bounds& bounds, const Eigen::Ref<const Vector>& x) {
  if (static_cast<std::size_t>(x.size()) != bounds.size()) return false;
  for (std::size_t k = 0; k < bounds.size(); ++k) {
    const double v = x[static_cast<Eigen::Index>(k)];
    if (!std::isfinite(v) || v < bounds[k].low || v > bounds[k].high) return false;
  }
  return true;
}

std::vector<double> linspace(double low, double high, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = low;
    return out;
  }
  const double step = (high - low) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = low + step * static_cast<double>(i);
  out.back() = high;
  return out;
}

EvaluationGrid::EvaluationGrid(Bounds bounds, std::vector<std::size_t> resolution)
    : bounds_(std::move(bounds)), resolution_(std::move(resolution)) {
  if (bounds_.empty()) throw std::invalid_argument("grid needs at least one dimension");
  if (bounds_.size() != resolution_.size())
    throw std::invalid_argument("grid bounds and resolution differ in dimension");
  std::size_t total = 1;
  for (std::size_t k = 0; k < bounds_.size(); ++k) {
    const auto [lo, hi] = bounds_[k];
    if (!std::isfinite(lo) || !std::isfinite(hi))
      throw std::invalid_argument("grid bounds must be finite (dimension " + std::to_string(k) + ")");
    if (!(lo < hi)) throw std::invalid_argument("grid bounds need low < high (dimension " + std::to_string(k) + ")");
    if (resolution_[k] < 2)
      throw std::invalid_argument("grid resolution must be >= 2 (dimension " + std::to_string(k) + ")");
    total *= resolution_[k];
  }

  std::vector<std::vector<double>> axes;
  for (std::size_t k = 0; k < bounds_.size(); ++k) axes.push_back(linspace(bounds_[k].low, bounds_[k].high, resolution_[k]));

  const auto d = static_cast<Eigen::Index>(bounds_.size());
  points_.resize(static_cast<Eigen::Index>(total), d);
  std::vector<std::size_t> idx(bounds_.size(), 0);
  for (std::size_t row = 0; row < total; ++row) {
    for (Eigen::Index k = 0; k < d; ++k) points_(static_cast<Eigen::Index>(row), k) = axes[k][idx[k]];
    for (std::size_t k = bounds_.size(); k-- > 0;) {
      if (++idx[k] < resolution_[k]) break;
      idx[k] = 0;
    }
  }
}

std::vector<double> EvaluationGrid::axis(std::size_t dim) const {
  return linspace(bounds_.at(dim).low, bounds_.at(dim).high, resolution_.at(dim));
}

Dataset::Dataset(Bounds bounds, Matrix inputs, Vector targets)
    : bounds_(std::move(bounds)), inputs_(std::move(inputs)), targets_(std::move(targets)) {
  if (targets_.size() == 0) throw std::invalid_argument("dataset must be non-empty");
  if (inputs_.rows() != targets_.size()) throw std::invalid_argument("dataset inputs and targets differ in length");
  if (static_cast<std::size_t>(inputs_.cols()) != bounds_.size())
    throw std::invalid_argument("dataset input dimension does not match bounds");
  for (Eigen::Index i = 0; i < inputs_.rows(); ++i) {
    if (!inside(bounds_, inputs_.row(i).transpose()))
      throw std::invalid_argument("dataset input " + std::to_string(i) + " lies outside the domain");
    if (!std::isfinite(targets_[i])) throw std::invalid_argument("dataset target " + std::to_string(i) + " is not finite");
  }
}

void Dataset::append(const Eigen::Ref<const Vector>& x, double y) {
  if (!inside(bounds_, x)) throw std::invalid_argument("appended input lies outside the domain");
  if (!std::isfinite(y)) throw std::invalid_argument("appended target is not finite");
  const Eigen::Index n = inputs_.rows();
  inputs_.conservativeResize(n + 1, Eigen::NoChange);
  inputs_.row(n) = x.transpose();
  targets_.conservativeResize(n + 1);
  targets_[n] = y;
}

Standardizer::Standardizer(Vector input_mean, Vector input_std, double target_mean, double target_std)
    : input_mean_(std::move(input_mean)),
      input_std_(std::move(input_std)),
      target_mean_(target_mean),
      target_std_(std::max(target_std, kStdFloor)) {
  if (input_mean_.size() != input_std_.size()) throw std::invalid_argument("standardizer dimension mismatch");
  input_std_ = input_std_.cwiseMax(kStdFloor);
}

Matrix Standardizer::standardize_inputs(const Matrix& x) const {
  Matrix z = x;
  for (Eigen::Index k = 0; k < z.cols(); ++k) z.col(k) = (z.col(k).array() - input_mean_[k]) / input_std_[k];
  return z;
}

Vector Standardizer::unstandardize_inputs(const Eigen::Ref<const Vector>& z) const {
  return (z.array() * input_std_.array() + input_mean_.array()).matrix();
}

Vector Standardizer::standardize_targets(const Vector& y) const {
  return ((y.array() - target_mean_) / target_std_).matrix();
}

Vector Standardizer::unstandardize_targets(const Vector& z) const {
  return (z.array() * target_std_ + target_mean_).matrix();
}

Standardizer fit_standardizer(const Dataset& data) {
  const auto d = static_cast<Eigen::Index>(data.dim());
  Vector center(d), half_width(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const auto [lo, hi] = data.bounds()[static_cast<std::size_t>(k)];
    center[k] = 0.5 * (lo + hi);
    half_width[k] = 0.5 * (hi - lo);
  }
  const Vector& y = data.targets();
  const double mean = y.mean();
  const double var = (y.array() - mean).square().mean();
  return Standardizer(center, half_width, mean, std::sqrt(var));
}

StandardizedData standardize(const Standardizer& s, const Dataset& data) {
  return {s.standardize_inputs(data.inputs()), s.standardize_targets(data.targets())};
}

}  // namespace fbal
