#pragma once

// Reference implementations and random problem generators shared by the unit
// tests and the acceptance run. Written with plain loops and dense solves,
// independent of the library code paths they check.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include <Eigen/LU>

#include "fbal/bnn.hpp"
#include "fbal/gp.hpp"
#include "fbal/rng.hpp"

namespace oracle {

using fbal::Matrix;
using fbal::Rng;
using fbal::StandardizedData;
using fbal::Vector;

inline constexpr double kLog2Pi = 1.8378770664093454836;

inline double matern52(const Vector& a, const Vector& b, const Vector& ell, double s2) {
  double r2 = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) r2 += std::pow((a[k] - b[k]) / ell[k], 2);
  const double r = std::sqrt(r2);
  return s2 * (1.0 + std::sqrt(5.0) * r + 5.0 * r2 / 3.0) * std::exp(-std::sqrt(5.0) * r);
}

/// K + sigma^2 I, entry by entry.
inline Matrix gp_cov(const Matrix& x, const fbal::gp::GpHyperparameters& hp) {
  Matrix k(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.rows(); ++j)
      k(i, j) = matern52(x.row(i).transpose(), x.row(j).transpose(), hp.lengthscales, hp.output_scale);
  k.diagonal().array() += hp.noise_scale * hp.noise_scale;
  return k;
}

/// Posterior latent mean and variance at `xs` through an explicit inverse.
inline void gp_direct_solve(const Matrix& x, const Vector& y, const fbal::gp::GpHyperparameters& hp,
                            const Matrix& xs, Vector& mean, Vector& variance) {
  const Matrix kinv = Eigen::FullPivLU<Matrix>(gp_cov(x, hp)).inverse();
  mean.resize(xs.rows());
  variance.resize(xs.rows());
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    Vector ks(x.rows());
    for (Eigen::Index j = 0; j < ks.size(); ++j)
      ks[j] = matern52(x.row(j).transpose(), xs.row(i).transpose(), hp.lengthscales, hp.output_scale);
    mean[i] = ks.dot(kinv * y);
    variance[i] = hp.output_scale - ks.dot(kinv * ks);
  }
}

inline Vector zscore(const Vector& y) {
  const double m = y.mean();
  const double sd = std::max(std::sqrt((y.array() - m).square().mean()), 1e-12);
  return ((y.array() - m) / sd).matrix();
}

/// Inputs uniform on [-1, 1]^d, standard normal targets.
inline StandardizedData random_data(std::size_t n, std::size_t d, Rng& rng) {
  StandardizedData data{Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d)),
                        Vector(static_cast<Eigen::Index>(n))};
  for (Eigen::Index i = 0; i < data.inputs.size(); ++i) data.inputs.data()[i] = 2.0 * rng.uniform() - 1.0;
  for (Eigen::Index i = 0; i < data.targets.size(); ++i) data.targets[i] = rng.normal();
  return data;
}

/// Raw dataset on [-1, 1]^d so the input map is the identity.
inline fbal::Dataset raw_dataset(const StandardizedData& d) {
  return fbal::Dataset(fbal::Bounds(static_cast<std::size_t>(d.inputs.cols()), fbal::Interval{-1.0, 1.0}), d.inputs,
                       d.targets);
}

inline fbal::gp::GpHyperparameters random_hp(std::size_t d, Rng& rng) {
  fbal::gp::GpHyperparameters hp;
  hp.lengthscales.resize(static_cast<Eigen::Index>(d));
  for (Eigen::Index k = 0; k < hp.lengthscales.size(); ++k) hp.lengthscales[k] = std::exp(0.7 * rng.normal());
  hp.output_scale = std::exp(0.5 * rng.normal());
  hp.noise_scale = std::exp(-1.0 + 0.5 * rng.normal());
  return hp;
}

inline fbal::bnn::MlpArchitecture random_arch(Rng& rng) {
  fbal::bnn::MlpArchitecture arch;
  arch.input_dim = 1 + rng.below(2);
  arch.hidden.clear();
  const auto layers = rng.below(4);
  for (std::uint64_t l = 0; l < layers; ++l) arch.hidden.push_back(1 + rng.below(6));
  return arch;
}

inline fbal::bnn::BnnParameters random_params(const fbal::bnn::MlpArchitecture& arch, Rng& rng) {
  fbal::bnn::BnnParameters p{Vector(static_cast<Eigen::Index>(arch.parameter_count())), std::exp(0.5 * rng.normal())};
  for (Eigen::Index i = 0; i < p.weights.size(); ++i) p.weights[i] = rng.normal();
  return p;
}

/// Ensemble evaluated in raw units: identity input and target maps.
inline fbal::bnn::BnnPosterior ensemble(const fbal::bnn::MlpArchitecture& arch,
                                        std::vector<fbal::bnn::BnnParameters> draws) {
  const auto d = static_cast<Eigen::Index>(arch.input_dim);
  return fbal::bnn::BnnPosterior{arch, fbal::Standardizer(Vector::Zero(d), Vector::Ones(d), 0.0, 1.0),
                                 std::move(draws), {}};
}

/// Largest per-coordinate |fd - g| / max(1, |fd|) with central differences.
template <class F>
double worst_fd_error(const F& f, const Vector& z, const Vector& g, double h = 1e-5) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    Vector zp = z, zm = z;
    zp[k] += h;
    zm[k] -= h;
    const double fd = (f(zp) - f(zm)) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - g[k]) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

/// Monte-Carlo estimate (and its standard error) of the resampling
/// definition: mean over draws of (g_i + sigma_i eps - mean g)^2.
inline void resampled_uncertainty(const std::vector<double>& g, const std::vector<double>& sigma, int reps, Rng& rng,
                                  double& estimate, double& standard_error) {
  const std::size_t n = g.size();
  double mu = 0.0;
  for (double v : g) mu += v;
  mu /= static_cast<double>(n);
  double sum = 0.0, sum2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    double u = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double y = g[i] + sigma[i] * rng.normal();
      u += (y - mu) * (y - mu);
    }
    u /= static_cast<double>(n);
    sum += u;
    sum2 += u * u;
  }
  estimate = sum / reps;
  standard_error = std::sqrt((sum2 / reps - estimate * estimate) / reps);
}

}  // namespace oracle
