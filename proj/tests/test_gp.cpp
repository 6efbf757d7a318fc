#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "fbal/gp.hpp"
#include "fbal/rng.hpp"
#include "oracles.hpp"

using namespace fbal;
using namespace fbal::gp;

namespace {

using oracle::kLog2Pi;

// Marginal likelihood through an explicit LU inverse and determinant.
double oracle_marginal(const StandardizedData& d, const GpHyperparameters& hp) {
  const Eigen::FullPivLU<Matrix> lu(oracle::gp_cov(d.inputs, hp));
  const double quad = d.targets.dot(lu.inverse() * d.targets);
  return -0.5 * quad - 0.5 * std::log(lu.determinant()) - 0.5 * static_cast<double>(d.targets.size()) * kLog2Pi;
}

double lognormal_of_log(double u) { return -0.5 * u * u - 0.5 * kLog2Pi; }

double oracle_log_prior(const GpHyperparameters& hp) {
  double t = 0.0;
  for (Eigen::Index k = 0; k < hp.lengthscales.size(); ++k) t += lognormal_of_log(std::log(hp.lengthscales[k]));
  t += lognormal_of_log(std::log(hp.output_scale));
  const double s = hp.noise_scale;
  t += std::log(2.0) - 0.5 * s * s - 0.5 * kLog2Pi + std::log(s);
  return t;
}

NutsConfig quick_nuts(std::uint64_t seed) {
  NutsConfig cfg;
  cfg.warmup_steps = 200;
  cfg.kept_samples = 200;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("matern52: zero distance, symmetry and r = 1") {
  Rng rng(1, 1);
  for (int t = 0; t < 20; ++t) {
    Vector a(2), b(2), ell(2);
    for (int k = 0; k < 2; ++k) {
      a[k] = rng.normal();
      b[k] = rng.normal();
      ell[k] = std::exp(rng.normal());
    }
    const double s2 = std::exp(rng.normal());
    CHECK(matern52(a, a, ell, s2) == s2);
    CHECK(matern52(a, b, ell, s2) == matern52(b, a, ell, s2));
    CHECK(matern52(a, b, ell, s2) == doctest::Approx(oracle::matern52(a, b, ell, s2)).epsilon(1e-13));
  }
  CHECK(matern52(Vector::Zero(1), Vector::Ones(1), Vector::Ones(1), 1.0) == doctest::Approx(0.52399).epsilon(1e-5));

  Matrix x(3, 2);
  x << 0, 0, 1, 0.5, -0.3, 0.2;
  const Matrix k = matern52_matrix(x, x, Vector::Constant(2, 0.8), 1.3);
  CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("log_joint: single observation at zero") {
  StandardizedData one{Matrix::Zero(1, 1), Vector::Zero(1)};
  GpHyperparameters hp{Vector::Ones(1), 1.0, 1.0};
  const LogJoint model(one);
  const Vector z = to_unconstrained(hp);
  CHECK(model(z) - model.log_prior(z) == doctest::Approx(-0.5 * std::log(2.0) - 0.5 * kLog2Pi).epsilon(1e-14));
}

TEST_CASE("log_joint: matches a direct-inverse oracle") {
  Rng rng(2, 0);
  for (int t = 0; t < 20; ++t) {
    const std::size_t d = 1 + rng.below(2);
    const StandardizedData data = oracle::random_data(5, d, rng);
    const GpHyperparameters hp = oracle::random_hp(d, rng);
    const double expected = oracle_marginal(data, hp) + oracle_log_prior(hp);
    CHECK(std::abs(log_joint(data, hp) - expected) <= 1e-10 * std::max(1.0, std::abs(expected)));
  }
}

TEST_CASE("log_joint: zero targets drop the quadratic form") {
  Rng rng(3, 0);
  StandardizedData data = oracle::random_data(6, 1, rng);
  data.targets.setZero();
  const GpHyperparameters hp = oracle::random_hp(1, rng);
  const Eigen::FullPivLU<Matrix> lu(oracle::gp_cov(data.inputs, hp));
  const double expected = -0.5 * std::log(lu.determinant()) - 3.0 * kLog2Pi;
  const LogJoint model(data);
  const Vector z = to_unconstrained(hp);
  CHECK(model(z) - model.log_prior(z) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("grad_log_joint: central finite differences") {
  Rng rng(4, 0);
  for (int t = 0; t < 20; ++t) {
    const std::size_t d = 1 + rng.below(2);
    const StandardizedData data = oracle::random_data(3 + rng.below(10), d, rng);
    const GpHyperparameters hp = oracle::random_hp(d, rng);
    const LogJoint model(data);
    const Vector z = to_unconstrained(hp);
    const Vector g = grad_log_joint(data, hp);
    REQUIRE(g.size() == static_cast<Eigen::Index>(d + 2));
    constexpr double h = 1e-5;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      Vector zp = z, zm = z;
      zp[k] += h;
      zm[k] -= h;
      const double fd = (model(zp) - model(zm)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - g[k]) / std::max(1.0, std::abs(fd)));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("grad_log_joint: vanishes at a stationary point located from values alone") {
  StandardizedData data{Matrix(8, 1), Vector(8)};
  for (int i = 0; i < 8; ++i) {
    data.inputs(i, 0) = -1.0 + 2.0 * i / 7.0;
    data.targets[i] = std::sin(2.5 * data.inputs(i, 0)) + 0.1 * std::cos(7.0 * i);
  }
  const LogJoint model(data);
  // Newton iterations on a finite-difference gradient and Hessian built only
  // from log_joint values.
  auto fd_grad = [&](const Vector& z) {
    constexpr double h = 1e-4;
    Vector g(z.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      Vector zp = z, zm = z;
      zp[k] += h;
      zm[k] -= h;
      g[k] = (model(zp) - model(zm)) / (2.0 * h);
    }
    return g;
  };
  Rng rng(5, 5);
  Vector z = to_unconstrained(find_map(model, 1, rng, 3));
  for (int it = 0; it < 20; ++it) {
    const Vector g = fd_grad(z);
    Matrix hess(3, 3);
    constexpr double h2 = 1e-3;
    for (Eigen::Index k = 0; k < 3; ++k) {
      Vector zp = z, zm = z;
      zp[k] += h2;
      zm[k] -= h2;
      hess.col(k) = (fd_grad(zp) - fd_grad(zm)) / (2.0 * h2);
    }
    hess = 0.5 * (hess + hess.transpose()).eval();
    z -= hess.ldlt().solve(g);
  }
  CHECK(fd_grad(z).norm() < 1e-6);
  Vector g;
  model(z, &g);
  CHECK(g.norm() < 1e-6);
}

TEST_CASE("log_prior: Log-Normal lengthscale score in log space") {
  // d/du [log LN(e^u | 0, 1) + u] = -(1 + u) + 1 = -u.
  const StandardizedData data{Matrix::Zero(1, 1), Vector::Zero(1)};
  const LogJoint model(data);
  for (double u : {0.0, 0.7, -1.3}) {
    Vector z(3);
    z << u, 0.2, -0.5;
    Vector g;
    model.log_prior(z, &g);
    CHECK(g[0] == doctest::Approx(-u).epsilon(1e-14));
  }
}

TEST_CASE("predict_single: noiseless interpolation and prior reversion") {
  StandardizedData data{Matrix(5, 1), Vector(5)};
  data.inputs << -1.0, -0.9, -0.8, -0.7, -0.6;
  data.targets << 0.3, -1.2, 0.5, 2.0, -0.7;
  const Dataset raw = oracle::raw_dataset(data);
  const Vector z = oracle::zscore(data.targets);

  const GpPosterior tight = condition(raw, {GpHyperparameters{Vector::Constant(1, 0.3), 1.0, 1e-6}});
  const auto at_train = predict_single(tight, 0, data.inputs);
  for (Eigen::Index i = 0; i < 5; ++i) {
    CHECK(std::abs(at_train.mean[i] - z[i]) < 1e-4);
    CHECK(at_train.variance[i] < 1e-6);
  }

  const GpPosterior short_ell = condition(raw, {GpHyperparameters{Vector::Constant(1, 0.01), 1.7, 0.3}});
  const auto far = predict_single(short_ell, 0, Matrix::Constant(1, 1, 1.0));
  CHECK(std::abs(far.mean[0]) < 1e-12);
  CHECK(far.variance[0] == doctest::Approx(1.7).epsilon(1e-12));
}

TEST_CASE("predict_single: matches a dense direct-solve oracle") {
  Rng rng(6, 0);
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = 1 + rng.below(2);
    const StandardizedData data = oracle::random_data(1 + rng.below(10), d, rng);
    const GpHyperparameters hp = oracle::random_hp(d, rng);
    const GpPosterior post = condition(oracle::raw_dataset(data), {hp});
    Matrix xs(4, static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < xs.size(); ++i) xs.data()[i] = 2.0 * rng.uniform() - 1.0;
    const auto got = predict_single(post, 0, xs);

    const Vector y = oracle::zscore(data.targets);
    const Matrix kinv = Eigen::FullPivLU<Matrix>(oracle::gp_cov(data.inputs, hp)).inverse();
    for (Eigen::Index i = 0; i < xs.rows(); ++i) {
      Vector ks(data.inputs.rows());
      for (Eigen::Index j = 0; j < ks.size(); ++j)
        ks[j] = oracle::matern52(data.inputs.row(j).transpose(), xs.row(i).transpose(), hp.lengthscales, hp.output_scale);
      const double mu = ks.dot(kinv * y);
      const double var = hp.output_scale - ks.dot(kinv * ks);
      CHECK(std::abs(got.mean[i] - mu) < 1e-8);
      CHECK(std::abs(got.raw_variance[i] - var) < 1e-8);
      CHECK(got.variance[i] >= 0.0);
    }
  }
}

TEST_CASE("predict: a single draw reduces exactly to that draw's posterior") {
  Rng rng(7, 0);
  for (int t = 0; t < 10; ++t) {
    const StandardizedData data = oracle::random_data(6, 2, rng);
    Dataset raw(Bounds(2, Interval{-2.0, 3.0}), data.inputs, (3.0 * data.targets.array() + 1.0).matrix());
    const GpPosterior post = condition(raw, {oracle::random_hp(2, rng)});
    Matrix xs(9, 2);
    for (Eigen::Index i = 0; i < xs.size(); ++i) xs.data()[i] = 2.0 * rng.uniform() - 1.0;
    const auto single = predict_single(post, 0, xs);
    const auto summary = predict(post, xs);
    for (Eigen::Index i = 0; i < 9; ++i) {
      CHECK(summary.mean[i] == post.standardizer.unstandardize_target(single.mean[i]));
      CHECK(summary.uncertainty[i] == post.standardizer.unstandardize_variance(single.variance[i]));
    }
  }
}

TEST_CASE("predict: ensemble moments match a two-pass computation") {
  Rng rng(8, 0);
  const StandardizedData data = oracle::random_data(7, 1, rng);
  const Dataset raw = oracle::raw_dataset(data);
  const GpHyperparameters fixed = oracle::random_hp(1, rng);
  const GpPosterior same = condition(raw, {fixed, fixed, fixed});
  Matrix xs(11, 1);
  for (Eigen::Index i = 0; i < 11; ++i) xs(i, 0) = -1.0 + 0.2 * static_cast<double>(i);
  const auto one = predict_single(same, 0, xs);
  const auto tri = predict(same, xs);
  const Standardizer& st = same.standardizer;
  for (Eigen::Index i = 0; i < 11; ++i)
    CHECK(tri.uncertainty[i] == doctest::Approx(st.unstandardize_variance(one.variance[i])).epsilon(1e-12));

  std::vector<GpHyperparameters> draws;
  for (int j = 0; j < 25; ++j) draws.push_back(oracle::random_hp(1, rng));
  const GpPosterior post = condition(raw, draws);
  const auto got = predict(post, xs);
  for (Eigen::Index i = 0; i < 11; ++i) {
    std::vector<double> mu, var;
    for (std::size_t j = 0; j < draws.size(); ++j) {
      const auto s = predict_single(post, j, xs.row(i));
      mu.push_back(s.mean[0]);
      var.push_back(s.variance[0]);
    }
    double m = 0.0;
    for (double v : mu) m += v;
    m /= static_cast<double>(mu.size());
    double spread = 0.0, within = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) {
      spread += (mu[j] - m) * (mu[j] - m);
      within += var[j];
    }
    const double u = (within + spread) / static_cast<double>(mu.size());
    CHECK(std::abs(got.mean[i] - st.unstandardize_target(m)) <= 1e-12 * std::max(1.0, std::abs(got.mean[i])));
    CHECK(std::abs(got.uncertainty[i] - st.unstandardize_variance(u)) <= 1e-12 * std::max(1.0, got.uncertainty[i]));
  }

  // Per-draw components add the observation noise.
  const auto pd = predictive_draws(post, xs);
  const auto s3 = predict_single(post, 3, xs);
  CHECK(pd.variance(4, 3) ==
        doctest::Approx(st.unstandardize_variance(s3.variance[4] + draws[3].noise_scale * draws[3].noise_scale)));
}

TEST_CASE("factorize: duplicate inputs fall back to jitter") {
  Matrix x(4, 1);
  x << 0.1, 0.1, 0.1, 0.5;
  Vector y(4);
  y << 1.0, 1.0, 1.0, -1.0;
  const auto f = factorize(x, y, GpHyperparameters{Vector::Ones(1), 1.0, 1e-9});
  REQUIRE(f.has_value());
  CHECK(f->jitter > 0.0);
  CHECK(f->jitter <= 1e-6);
  const auto clean = factorize(x, y, GpHyperparameters{Vector::Ones(1), 1.0, 0.5});
  REQUIRE(clean.has_value());
  CHECK(clean->jitter == 0.0);
  CHECK_FALSE(factorize(x, y, GpHyperparameters{Vector::Ones(1), std::nan(""), 0.5}).has_value());
}

TEST_CASE("predict_single: pre-clamp variance stays above -1e-8 on well-conditioned problems") {
  Rng rng(9, 0);
  for (int t = 0; t < 20; ++t) {
    const StandardizedData data = oracle::random_data(10, 1, rng);
    const GpPosterior post = condition(oracle::raw_dataset(data), {oracle::random_hp(1, rng)});
    const auto p = predict_single(post, 0, data.inputs);
    CHECK(p.raw_variance.minCoeff() >= -1e-8);
  }
}

TEST_CASE("fit: sine data gives a plausible lengthscale, bookkeeping and determinism") {
  Matrix x(15, 1);
  Vector y(15);
  for (int i = 0; i < 15; ++i) {
    x(i, 0) = i / 14.0;
    y[i] = std::sin(2.0 * M_PI * x(i, 0));
  }
  const Dataset data({{0.0, 1.0}}, x, y);
  NutsConfig cfg = quick_nuts(3);
  cfg.chains = 2;
  const GpPosterior post = fit(data, cfg);
  CHECK(post.draws.size() == cfg.chains * cfg.kept_samples);
  CHECK(post.factors.size() == post.draws.size());
  std::vector<double> ell;
  for (const auto& d : post.draws) ell.push_back(d.lengthscales[0]);
  std::nth_element(ell.begin(), ell.begin() + static_cast<std::ptrdiff_t>(ell.size() / 2), ell.end());
  const double median = ell[ell.size() / 2];
  CHECK(median >= 0.05);
  CHECK(median <= 5.0);

  const GpPosterior again = fit(data, cfg);
  for (std::size_t i = 0; i < post.draws.size(); ++i) {
    CHECK(again.draws[i].lengthscales == post.draws[i].lengthscales);
    CHECK(again.draws[i].output_scale == post.draws[i].output_scale);
    CHECK(again.draws[i].noise_scale == post.draws[i].noise_scale);
  }
}

TEST_CASE("fit_map: a single draw at a local mode above the prior draws") {
  Matrix x(12, 1);
  Vector y(12);
  for (int i = 0; i < 12; ++i) {
    x(i, 0) = i / 11.0;
    y[i] = std::cos(5.0 * x(i, 0));
  }
  const Dataset data({{0.0, 1.0}}, x, y);
  const GpPosterior post = fit_map(data, 11, 0);
  REQUIRE(post.draws.size() == 1);
  const auto st = standardize(fit_standardizer(data), data);
  const LogJoint model(st);
  const Vector z = to_unconstrained(post.draws[0]);
  Vector g;
  const double at_map = model(z, &g);
  CHECK(g.norm() < 1e-3);
  Rng rng(4, 4);
  for (int t = 0; t < 20; ++t) CHECK(model(to_unconstrained(sample_prior(1, {}, rng))) <= at_map);

  const GpPosterior again = fit_map(data, 11, 0);
  CHECK(again.draws[0].lengthscales == post.draws[0].lengthscales);
}

TEST_CASE("predict: requires a fitted posterior") {
  CHECK_THROWS(predict(GpPosterior{}, Matrix::Zero(1, 1)));
}
