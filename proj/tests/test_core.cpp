#include "doctest.h"

#include <cmath>
#include <limits>

#include "fbal/core.hpp"
#include "fbal/rng.hpp"

using namespace fbal;

TEST_CASE("make_grid: endpoint linspace and row-major cartesian product") {
  const auto g1 = make_grid({{0.0, 1.0}}, {3});
  REQUIRE(g1.size() == 3);
  CHECK(g1.points()(0, 0) == 0.0);
  CHECK(g1.points()(1, 0) == 0.5);
  CHECK(g1.points()(2, 0) == 1.0);

  const auto g2 = make_grid({{0.0, 1.0}, {0.0, 1.0}}, {2, 2});
  REQUIRE(g2.size() == 4);
  const double expected[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 2; ++k) CHECK(g2.points()(i, k) == expected[i][k]);

  const auto g3 = make_grid({{0.0, 2.0}}, {200});
  REQUIRE(g3.size() == 200);
  CHECK(g3.points()(1, 0) - g3.points()(0, 0) == doctest::Approx(2.0 / 199.0).epsilon(1e-12));
  CHECK(g3.points()(1, 0) == doctest::Approx(0.01005).epsilon(1e-3));
  CHECK(g3.points()(199, 0) == 2.0);
}

TEST_CASE("make_grid: point count, uniqueness and row-major order") {
  const auto g = make_grid({{-1.0, 1.0}, {0.0, 3.0}, {2.0, 5.0}}, {3, 4, 2});
  REQUIRE(g.size() == 24);
  for (std::size_t i = 1; i < g.size(); ++i) {
    // strictly increasing in lexicographic order
    const Vector a = g.point(i - 1), b = g.point(i);
    bool less = false;
    for (int k = 0; k < 3; ++k) {
      if (a[k] < b[k]) {
        less = true;
        break;
      }
      if (a[k] > b[k]) break;
    }
    CHECK(less);
  }
}

TEST_CASE("make_grid: pure function, bit-identical on repeat") {
  const auto a = make_grid({{0.0, 1.0}, {-3.0, 7.5}}, {50, 37});
  const auto b = make_grid({{0.0, 1.0}, {-3.0, 7.5}}, {50, 37});
  CHECK(a.points() == b.points());
}

TEST_CASE("make_grid: rejects invalid input") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(make_grid({{0.0, inf}}, {10}), std::invalid_argument);
  CHECK_THROWS_AS(make_grid({{std::nan(""), 1.0}}, {10}), std::invalid_argument);
  CHECK_THROWS_AS(make_grid({{0.0, 1.0}}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(make_grid({{1.0, 1.0}}, {5}), std::invalid_argument);
  CHECK_THROWS_AS(make_grid({{0.0, 1.0}}, {5, 5}), std::invalid_argument);
}

TEST_CASE("fit_standardizer: target moments use the population convention") {
  {
    Dataset d({{0.0, 1.0}}, Matrix::Constant(3, 1, 0.5), Vector::Constant(3, 1.0));
    const auto s = fit_standardizer(d);
    CHECK(s.target_mean() == 1.0);
    CHECK(s.target_std() == Standardizer::kStdFloor);
  }
  {
    Matrix x(2, 1);
    x << 0.2, 0.4;
    Vector y(2);
    y << 0.0, 2.0;
    const auto s = fit_standardizer(Dataset({{0.0, 1.0}}, x, y));
    CHECK(s.target_mean() == 1.0);
    CHECK(s.target_std() == 1.0);
  }
}

TEST_CASE("fit_standardizer: inputs map from the domain bounds to [-1, 1]") {
  Matrix x(2, 1);
  x << 0.0, 10.0;
  const auto s = fit_standardizer(Dataset({{0.0, 10.0}}, x, Vector::Zero(2)));
  CHECK(s.input_mean()[0] == 5.0);
  CHECK(s.input_std()[0] == 5.0);
  const Matrix z = s.standardize_inputs(x);
  CHECK(z(0, 0) == -1.0);
  CHECK(z(1, 0) == 1.0);
}

TEST_CASE("Standardizer round trip is the identity to 1e-12 relative") {
  Rng rng(11, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const double mean = 100.0 * rng.normal();
    const double sd = std::exp(4.0 * rng.normal());
    Standardizer s(Vector::Constant(2, rng.normal()), Vector::Constant(2, std::exp(rng.normal())), mean, sd);
    Vector v(16);
    for (int i = 0; i < v.size(); ++i) v[i] = 1e3 * rng.normal();
    const Vector back = s.unstandardize_targets(s.standardize_targets(v));
    for (int i = 0; i < v.size(); ++i) CHECK(std::abs(back[i] - v[i]) <= 1e-12 * std::max(1.0, std::abs(v[i])));
    const Vector x = Vector::Constant(2, 3.7 * rng.normal());
    const Matrix row = x.transpose();
    const Vector xb = s.unstandardize_inputs(s.standardize_inputs(row).row(0).transpose());
    for (int k = 0; k < 2; ++k) CHECK(std::abs(xb[k] - x[k]) <= 1e-12 * std::max(1.0, std::abs(x[k])));
  }
}

TEST_CASE("Dataset append grows by one and keeps prior entries") {
  Matrix x(4, 1);
  x << 0.0, 0.3, 0.6, 1.0;
  Dataset d({{0.0, 1.0}}, x, Vector::LinSpaced(4, 1.0, 4.0));
  const Dataset before = d;
  Vector xn(1);
  xn << 0.45;
  d.append(xn, 7.5);
  REQUIRE(d.size() == 5);
  CHECK(d.inputs().topRows(4) == before.inputs());
  CHECK(d.targets().head(4) == before.targets());
  CHECK(d.inputs()(4, 0) == 0.45);
  CHECK(d.targets()[4] == 7.5);
}

TEST_CASE("Dataset rejects invalid entries") {
  Dataset d({{0.0, 1.0}}, Matrix::Constant(1, 1, 0.5), Vector::Constant(1, 0.0));
  Vector x(1);
  x << 0.5;
  CHECK_THROWS_AS(d.append(x, std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(d.append(x, std::numeric_limits<double>::infinity()), std::invalid_argument);
  x << 1.5;
  CHECK_THROWS_AS(d.append(x, 0.0), std::invalid_argument);
  CHECK(d.size() == 1);
  CHECK_THROWS_AS(Dataset({{0.0, 1.0}}, Matrix(0, 1), Vector(0)), std::invalid_argument);
  CHECK_THROWS_AS(Dataset({{0.0, 1.0}}, Matrix::Constant(2, 1, 0.5), Vector::Zero(1)), std::invalid_argument);
}

TEST_CASE("Rng: equal (seed, stream) reproduce, distinct streams decorrelate") {
  Rng a(42, 7), b(42, 7), c(42, 8);
  constexpr int n = 10000;
  std::vector<double> xa(n), xc(n);
  for (int i = 0; i < n; ++i) {
    xa[i] = a.uniform();
    CHECK(b.uniform() == xa[i]);
    xc[i] = c.uniform();
  }
  double ma = 0, mc = 0;
  for (int i = 0; i < n; ++i) {
    ma += xa[i];
    mc += xc[i];
  }
  ma /= n;
  mc /= n;
  double sab = 0, saa = 0, scc = 0;
  for (int i = 0; i < n; ++i) {
    sab += (xa[i] - ma) * (xc[i] - mc);
    saa += (xa[i] - ma) * (xa[i] - ma);
    scc += (xc[i] - mc) * (xc[i] - mc);
  }
  CHECK(std::abs(sab / std::sqrt(saa * scc)) < 0.05);

  const Rng s1 = Rng(42, 7).split("chain"), s2 = Rng(42, 7).split("noise");
  CHECK(s1.stream() != s2.stream());
}

TEST_CASE("Rng: draw ranges and normal moments") {
  Rng r(1, 2);
  double sum = 0, sum2 = 0;
  constexpr int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK_UNARY(u >= 0.0);
    CHECK_UNARY(u < 1.0);
    const double z = r.normal();
    sum += z;
    sum2 += z * z;
    CHECK(r.below(7) < 7);
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sum2 / n - 1.0) < 0.02);
}
