#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "sim/dynamics.hpp"
#include "sim/rng.hpp"
#include "sim/spectra.hpp"

using namespace sim;

namespace {

IteratedMap affine_contraction() {
  IteratedMap m;
  m.state_dim = 1;
  m.input_dim = 1;
  m.step = [](const Vec& z, const Vec& x) { return Vec{0.5 * z[0] + x[0]}; };
  return m;
}

}  // namespace

TEST_CASE("deq_forward examples") {
  {
    const auto r = deq_forward(affine_contraction(), {1.0}, {}, 1e-12, 1000);
    CHECK(r.converged);
    CHECK(r.z_star[0] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(r.residual <= 1e-12);
  }
  {
    IteratedMap constant;
    constant.state_dim = 1;
    constant.input_dim = 1;
    constant.step = [](const Vec&, const Vec& x) { return Vec{x[0]}; };
    const auto r = deq_forward(constant, {3.0}, {7.0}, 1e-12, 100);
    CHECK(r.converged);
    CHECK(r.z_star[0] == 3.0);
    CHECK(r.iterations <= 2);
  }
  {
    // z = tanh(0.5 z + 1): bisection oracle on g(z) = tanh(0.5 z + 1) - z
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (std::tanh(0.5 * mid + 1.0) - mid > 0 ? lo : hi) = mid;
    }
    IteratedMap m;
    m.state_dim = 1;
    m.input_dim = 1;
    m.step = [](const Vec& z, const Vec& x) {
      return Vec{std::tanh(0.5 * z[0] + x[0])};
    };
    const auto r = deq_forward(m, {1.0}, {}, 1e-13, 10000);
    CHECK(r.converged);
    CHECK(r.z_star[0] == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-10));
  }
}

TEST_CASE("deq_forward divergence guard") {
  IteratedMap m;
  m.state_dim = 1;
  m.input_dim = 1;
  m.step = [](const Vec& z, const Vec& x) { return Vec{2.0 * z[0] + x[0]}; };
  const auto r = deq_forward(m, {1.0}, {}, 1e-10, 10000);
  CHECK(!r.converged);
  CHECK_THROWS_AS(deq_forward(m, {1.0, 2.0}, {}, 1e-10, 10), DimensionError);
}

TEST_CASE("deq_forward initialization independence for contractions") {
  Rng rng(3);
  const auto m = affine_contraction();
  for (int t = 0; t < 20; ++t) {
    const Vec x{rng.uniform(-2, 2)};
    const double tol = 1e-10;
    const auto a = deq_forward(m, x, {}, tol, 100000);
    const auto b = deq_forward(m, x, {rng.uniform(-5, 5)}, tol, 100000);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK(std::abs(a.z_star[0] - b.z_star[0]) <= 10 * tol);
  }
}

TEST_CASE("deq_forward residual monotone after burn-in for affine maps") {
  IteratedMap m = affine_contraction();
  Vec z{9.0};
  double prev = 1e300;
  for (int it = 0; it < 40; ++it) {
    Vec next = m.step(z, {1.0});
    const double delta = std::abs(next[0] - z[0]);
    if (it >= 5) CHECK(delta <= prev + 1e-15);
    prev = delta;
    z = next;
  }
}

TEST_CASE("toy_koopman_system structure and exactness") {
  CHECK_THROWS_AS(toy_koopman_system(1.0, 0.5, 1.0), UnstableParametersError);
  CHECK_THROWS_AS(toy_koopman_system(0.5, -1.2, 1.0),
                  UnstableParametersError);

  {
    const auto sys = toy_koopman_system(0.0, 0.0, 0.0);
    // lift maps (z1,z2,z1^2,xz1,x^2,x,1) to (x,0,x^2,x^2,x^2,x,1)
    const Vec phi = sys.basis({0.3, -0.2}, {0.7});
    const Vec next = matvec(sys.lift_matrix, phi);
    CHECK(next[0] == doctest::Approx(0.7));
    CHECK(next[1] == doctest::Approx(0.0));
    CHECK(next[2] == doctest::Approx(0.49));
    CHECK(next[3] == doctest::Approx(0.49));
    const auto r = deq_forward(sys.map, {0.7}, {}, 1e-12, 100);
    CHECK(r.z_star[0] == doctest::Approx(0.7));
    CHECK(r.z_star[1] == doctest::Approx(0.0));
  }

  // exact-lift invariant: basis(step(z,x), x) = A basis(z,x)
  const auto sys = toy_koopman_system(0.5, 0.7, -0.8);
  CHECK(sys.exact);
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const Vec z{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Vec x{rng.uniform(-1, 1)};
    const Vec lhs = sys.basis(sys.map.step(z, x), x);
    const Vec rhs = matvec(sys.lift_matrix, sys.basis(z, x));
    for (std::size_t i = 0; i < lhs.size(); ++i)
      CHECK(std::abs(lhs[i] - rhs[i]) <= 1e-12);
  }
}

TEST_CASE("toy koopman analytic fixed point via deq and via projector") {
  const auto sys = toy_koopman_system(0.5, 0.5, 1.0);
  const auto r = deq_forward(sys.map, {1.0}, {}, 1e-13, 100000);
  REQUIRE(r.converged);
  CHECK(r.z_star[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(r.z_star[1] == doctest::Approx(8.0).epsilon(1e-9));

  // lift/limit consistency: the projector applied to phi(0, x) reads off z*
  const auto report = classify(sys.lift_matrix);
  REQUIRE(report.cls == ConvergenceClass::ConvergesToFixedPoint);
  const Matrix p = fixed_point_projector(sys.lift_matrix);
  const Vec phi0 = sys.basis({0.0, 0.0}, {1.0});
  const Vec limit = matvec(p, phi0);
  CHECK(std::abs(limit[0] - 2.0) <= 1e-8);
  CHECK(std::abs(limit[1] - 8.0) <= 1e-8);
}

TEST_CASE("generate_fixed_point_dataset") {
  {
    const auto d = generate_fixed_point_dataset(
        affine_contraction(), {{0.0}, {1.0}, {2.0}}, 1e-12);
    REQUIRE(d.inputs.size() == 3);
    CHECK(d.targets[0][0] == doctest::Approx(0.0));
    CHECK(d.targets[1][0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(d.targets[2][0] == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(d.dropped == 0);
  }
  {
    const auto sys = toy_koopman_system(0.5, 0.5, 1.0);
    const auto d = generate_fixed_point_dataset(sys.map, {{1.0}}, 1e-12);
    REQUIRE(d.inputs.size() == 1);
    CHECK(d.targets[0][0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(d.targets[0][1] == doctest::Approx(8.0).epsilon(1e-9));
  }
  {
    const auto d = generate_fixed_point_dataset(affine_contraction(), {},
                                                1e-12);
    CHECK(d.inputs.empty());
  }
  {
    IteratedMap bad;
    bad.state_dim = 1;
    bad.input_dim = 1;
    bad.step = [](const Vec& z, const Vec& x) {
      return Vec{3.0 * z[0] + x[0] + 1.0};
    };
    CHECK_THROWS_AS(generate_fixed_point_dataset(bad, {{1.0}}, 1e-10),
                    AllDivergedError);
  }
}

TEST_CASE("dataset csv round trip") {
  const auto sys = toy_koopman_system(0.5, 0.5, 1.0);
  const auto d = generate_fixed_point_dataset(
      sys.map, {{0.25}, {-0.5}, {1.0}}, 1e-12);
  std::ostringstream out;
  write_dataset_csv(d, out);
  const std::string text = out.str();
  CHECK(text.rfind("x0,z0,z1\n", 0) == 0);
  std::istringstream in(text);
  const Dataset back = read_dataset_csv(in);
  CHECK(back.input_dim == 1);
  CHECK(back.target_dim == 2);
  REQUIRE(back.inputs.size() == 3);
  CHECK(back.inputs == d.inputs);
  CHECK(back.targets == d.targets);

  std::istringstream bad("a,b\n1,2\n");
  CHECK_THROWS_AS(read_dataset_csv(bad), CsvError);
  std::istringstream header_only("x0,z0\n");
  const Dataset empty = read_dataset_csv(header_only);
  CHECK(empty.inputs.empty());
  CHECK(empty.input_dim == 1);
}
