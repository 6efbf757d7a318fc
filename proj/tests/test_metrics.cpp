#include "doctest.h"

#include <cmath>

#include "fbal/metrics.hpp"
#include "fbal/rng.hpp"

using namespace fbal;

namespace {

constexpr double kHalfLog2PiValue = 0.91893853320467274178;

PredictiveDraws single_draw(const Vector& mean, const Vector& variance) {
  return {mean, variance};
}

// Mixture density summed directly, no log-sum-exp.
double naive_nlpd(const PredictiveDraws& d, const Vector& f) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < d.mean.rows(); ++i) {
    double p = 0.0;
    for (Eigen::Index j = 0; j < d.mean.cols(); ++j) {
      const double v = d.variance(i, j);
      const double r = f[i] - d.mean(i, j);
      p += std::exp(-0.5 * r * r / v) / std::sqrt(2.0 * M_PI * v);
    }
    total += -std::log(p / static_cast<double>(d.mean.cols()));
  }
  return total / static_cast<double>(d.mean.rows());
}

}  // namespace

TEST_CASE("mse: examples") {
  Vector f(3);
  f << 1.0, -2.0, 0.5;
  CHECK(metrics::mse(f, f) == 0.0);
  CHECK(metrics::mse((f.array() + 1.0).matrix(), f) == doctest::Approx(1.0));
  Vector m(2), t(2);
  m << 0.0, 0.0;
  t << 1.0, 3.0;
  CHECK(metrics::mse(m, t) == 5.0);
}

TEST_CASE("mse: rejects mismatched or empty vectors") {
  CHECK_THROWS_AS(metrics::mse(Vector::Zero(2), Vector::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS(metrics::mse(Vector(0), Vector(0)), std::invalid_argument);
}

TEST_CASE("nlpd: standard normal and shifted log-variance") {
  Vector f(4);
  f << 0.3, -1.0, 2.0, 0.0;
  CHECK(metrics::nlpd(single_draw(f, Vector::Ones(4)), f) == doctest::Approx(kHalfLog2PiValue).epsilon(1e-14));
  CHECK(metrics::nlpd(single_draw(f, Vector::Constant(4, std::exp(2.0))), f) ==
        doctest::Approx(kHalfLog2PiValue + 1.0).epsilon(1e-14));
}

TEST_CASE("nlpd: matches naive summation and is order invariant") {
  Rng rng(10, 0);
  for (int t = 0; t < 20; ++t) {
    PredictiveDraws d{Matrix(4, 3), Matrix(4, 3)};
    Vector f(4);
    for (Eigen::Index i = 0; i < 4; ++i) {
      f[i] = rng.normal();
      for (Eigen::Index j = 0; j < 3; ++j) {
        d.mean(i, j) = rng.normal();
        d.variance(i, j) = std::exp(rng.normal());
      }
    }
    const double got = metrics::nlpd(d, f);
    CHECK(std::abs(got - naive_nlpd(d, f)) < 1e-10);
    PredictiveDraws p{d.mean.rowwise().reverse(), d.variance.rowwise().reverse()};
    CHECK(metrics::nlpd(p, f) == got);
  }
}

TEST_CASE("nlpd: stays finite where the naive density underflows") {
  Vector f = Vector::Zero(2);
  PredictiveDraws d{Matrix::Constant(2, 2, 100.0), Matrix::Constant(2, 2, 1e-4)};
  const double got = metrics::nlpd(d, f);
  CHECK(std::isfinite(got));
  CHECK(got == doctest::Approx(0.5 * 1e4 / 1e-4 + 0.5 * std::log(2.0 * M_PI * 1e-4)).epsilon(1e-12));
}

TEST_CASE("nlpd: monotone in mean error and favours calibrated variance") {
  Vector f(5);
  f << 0.0, 1.0, -1.0, 2.0, 0.5;
  double previous = std::numeric_limits<double>::infinity();
  for (double offset : {2.0, 1.0, 0.5, 0.1, 0.0}) {
    const double v = metrics::nlpd(single_draw((f.array() + offset).matrix(), Vector::Constant(5, 0.3)), f);
    CHECK(v < previous);
    previous = v;
  }
  const double calibrated = metrics::nlpd(single_draw(f, Vector::Constant(5, 0.3)), f);
  const double inflated = metrics::nlpd(single_draw(f, Vector::Constant(5, 3.0)), f);
  CHECK(calibrated < inflated);
}

TEST_CASE("nlpd: rejects non-positive variance and mismatched shapes") {
  Vector f = Vector::Zero(2);
  CHECK_THROWS_AS(metrics::nlpd(single_draw(f, Vector::Zero(2)), f), std::domain_error);
  CHECK_THROWS_AS(metrics::nlpd(single_draw(f, Vector::Constant(2, -1.0)), f), std::domain_error);
  CHECK_THROWS_AS(metrics::nlpd(single_draw(f, Vector::Ones(2)), Vector::Zero(3)), std::invalid_argument);
}
