#include <doctest.h>

#include <cmath>
#include <cstring>

#include "idrm/quadrature.hpp"

using namespace idrm;

TEST_CASE("same seed reproduces the batch bit-for-bit") {
  const Domain dom = Domain::unit_cube(1);
  const SampleBatch a = sample_batch(dom, 4, 2, 99);
  const SampleBatch b = sample_batch(dom, 4, 2, 99);
  CHECK(std::memcmp(a.interior.data(), b.interior.data(), 4 * sizeof(double)) == 0);
  CHECK(std::memcmp(a.t.data(), b.t.data(), 4 * sizeof(double)) == 0);
  CHECK(std::memcmp(a.boundary.data(), b.boundary.data(), 2 * sizeof(double)) == 0);
  const SampleBatch c = sample_batch(dom, 4, 2, 100);
  CHECK(a.interior(0, 0) != c.interior(0, 0));
}

TEST_CASE("interior points are strictly inside, t in (0,1)") {
  const Domain dom = Domain::unit_cube(3);
  const SampleBatch b = sample_batch(dom, 2000, 100, 5);
  CHECK(b.interior.minCoeff() > 0.0);
  CHECK(b.interior.maxCoeff() < 1.0);
  CHECK(b.t.minCoeff() > 0.0);
  CHECK(b.t.maxCoeff() < 1.0);
  CHECK(b.volume == 1.0);
  CHECK(b.surface == 6.0);
}

TEST_CASE("boundary sampling covers faces area-proportionally") {
  const Domain dom = Domain::unit_cube(2);
  const long n = 100000;
  const SampleBatch b = sample_batch(dom, 1, n, 17);
  long counts[4] = {0, 0, 0, 0};
  for (long i = 0; i < n; ++i) {
    const double x = b.boundary(i, 0), y = b.boundary(i, 1);
    if (x == 0.0) counts[0]++;
    else if (x == 1.0) counts[1]++;
    else if (y == 0.0) counts[2]++;
    else if (y == 1.0) counts[3]++;
    else FAIL("boundary point not on a face");
  }
  // Multinomial with q = 1/4: 3 sigma band around n/4.
  const double sigma = std::sqrt(n * 0.25 * 0.75);
  for (long c : counts) CHECK(std::abs(static_cast<double>(c) - n / 4.0) <= 3.0 * sigma);
}

TEST_CASE("interior mean of x1 on the 10-cube sits in the CLT band") {
  const Domain dom = Domain::unit_cube(10);
  const long n = 100000;
  const SampleBatch b = sample_batch(dom, n, 1, 23);
  const double mean = b.interior.col(0).mean();
  const double se = std::sqrt(1.0 / 12.0 / static_cast<double>(n));
  CHECK(std::abs(mean - 0.5) <= 3.0 * se);
}

TEST_CASE("trapezoid grid integrates constants exactly") {
  const GridQuad q = grid_quad(Domain::unit_cube(1), 0.25);
  double sum = 0;
  Eigen::VectorXd x;
  double w;
  for (long i = 0; i < q.size(); ++i) {
    q.node(i, x, w);
    sum += w;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("trapezoid bias on x^2 matches the h^2/6 error formula") {
  const GridQuad q = grid_quad(Domain::unit_cube(1), 0.01);
  double sum = 0;
  Eigen::VectorXd x;
  double w;
  for (long i = 0; i < q.size(); ++i) {
    q.node(i, x, w);
    sum += w * x[0] * x[0];
  }
  // Composite trapezoid is exact on quadratics up to h^2/6 * (f'' = 2)/2.
  CHECK(sum == doctest::Approx(1.0 / 3.0 + 0.01 * 0.01 / 6.0).epsilon(1e-12));
}

TEST_CASE("3-d cube weights sum to the volume") {
  for (bool midpoint : {false, true}) {
    const Domain dom = Domain::unit_cube(3);
    const GridQuad q = midpoint ? grid_quad_midpoint(dom, 0.05) : grid_quad(dom, 0.05);
    CHECK(std::abs(q.weight_sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("midpoint nodes avoid the faces") {
  const GridQuad q = grid_quad_midpoint(Domain::unit_cube(3), 0.25);
  Eigen::VectorXd x;
  double w;
  for (long i = 0; i < q.size(); ++i) {
    q.node(i, x, w);
    CHECK(x.minCoeff() >= 0.125);
    CHECK(x.maxCoeff() <= 0.875);
  }
}

TEST_CASE("non-divisible h suggests the nearest valid spacing") {
  CHECK_THROWS_WITH_AS(grid_quad(Domain::unit_cube(1), 0.3),
                       doctest::Contains("nearest valid h"), ConfigError);
}

TEST_CASE("grid exactness on per-axis linear polynomials") {
  const Domain dom = Domain::unit_cube(2);
  const GridQuad q = grid_quad(dom, 0.125);
  double sum = 0;
  Eigen::VectorXd x;
  double w;
  for (long i = 0; i < q.size(); ++i) {
    q.node(i, x, w);
    sum += w * (2.0 * x[0] - 3.0 * x[1] + 0.5 * x[0] * x[1]);
  }
  // exact: 2*(1/2) - 3*(1/2) + 0.5*(1/4) = -0.375
  CHECK(std::abs(sum - (-0.375)) <= 1e-12);
}

TEST_CASE("mc_integrate of a constant has zero standard error") {
  const SampleBatch b = sample_batch(Domain::unit_cube(4), 500, 1, 3);
  const McResult r = mc_integrate(b, [](const Eigen::VectorXd&) { return 2.5; });
  CHECK(r.estimate == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(r.std_error == 0.0);
}

TEST_CASE("mc_integrate recovers known integrals within 3 sigma") {
  const SampleBatch b = sample_batch(Domain::unit_cube(10), 100000, 1, 29);
  const McResult lin = mc_integrate(b, [](const Eigen::VectorXd& x) { return x[0]; });
  CHECK(std::abs(lin.estimate - 0.5) <= 3.0 * lin.std_error);
  const McResult ind =
      mc_integrate(b, [](const Eigen::VectorXd& x) { return x[0] < 0.5 ? 1.0 : 0.0; });
  CHECK(std::abs(ind.estimate - 0.5) <= 3.0 * ind.std_error);
}

TEST_CASE("mc_integrate is linear in the density on a shared batch") {
  const SampleBatch b = sample_batch(Domain::unit_cube(5), 4096, 1, 31);
  auto f = [](const Eigen::VectorXd& x) { return std::sin(x[0]) + x[1] * x[2]; };
  auto g = [](const Eigen::VectorXd& x) { return std::exp(-x[3]) * x[4]; };
  const double a = 1.7, c = -0.4;
  const McResult rf = mc_integrate(b, f);
  const McResult rg = mc_integrate(b, g);
  const McResult rc = mc_integrate(
      b, [&](const Eigen::VectorXd& x) { return a * f(x) + c * g(x); });
  CHECK(std::abs(rc.estimate - (a * rf.estimate + c * rg.estimate)) <= 1e-12);
}

TEST_CASE("domain and count validation") {
  Domain bad;
  bad.lower = Eigen::VectorXd::Ones(2);
  bad.upper = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(sample_batch(Domain::unit_cube(2), 0, 5, 1), ConfigError);
  CHECK_THROWS_AS(sample_batch(Domain::unit_cube(2), 5, 0, 1), ConfigError);
}

TEST_CASE("non-finite density reports the point index") {
  const SampleBatch b = sample_batch(Domain::unit_cube(2), 8, 1, 37);
  try {
    mc_integrate(b, [](const Eigen::VectorXd& x) {
      return x(0) > 0 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
    });
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.point_index == 0);
  }
}
