#include "roughsim/noise_models.hpp"
#include "roughsim/recursion_engine.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <cstring>
#include <sstream>

using namespace roughsim;
using namespace roughsim::testing;

namespace {

RoughStepFunction scalar_steps(std::vector<double> xi, std::vector<double> Xi) {
  IncrementStream s(1, xi.size());
  for (std::size_t j = 0; j < xi.size(); ++j) {
    s.xi(j)(0) = xi[j];
    s.Xi(j)(0, 0) = Xi[j];
  }
  return RoughStepFunction::build(Partition::uniform(1.0, xi.size()), std::move(s));
}

IncrementStream brownian(std::size_t d, std::size_t n, std::uint64_t seed) {
  NoiseSpec spec;
  spec.kind = NoiseKind::Brownian;
  spec.d = d;
  validate(spec);
  return generate(spec, Partition::uniform(1.0, n), seed);
}

}  // namespace

TEST_CASE("single Euler step") {
  const auto t = run(linear_field({1.0}), scalar_steps({0.1}, {0.0}), Vector::Constant(1, 1.0));
  CHECK(t.size() == 2);
  CHECK(t.value(0)(0) == 1.0);
  CHECK(t.value(1)(0) == doctest::Approx(1.1).epsilon(1e-15));
}

TEST_CASE("single midpoint step") {
  const auto t = run(linear_field({1.0}), scalar_steps({0.1}, {0.005}), Vector::Constant(1, 1.0));
  CHECK(t.terminal()(0) == doctest::Approx(1.105).epsilon(1e-15));
}

TEST_CASE("pure drift integrates a constant exactly") {
  Matrix c(1, 1);
  c << 0.0;
  auto b = constant_field(c);
  set_affine_drift(b, Vector::Constant(1, 1.0), Matrix::Zero(1, 1));
  const std::size_t n = 64;
  const auto r = RoughStepFunction::build(Partition::uniform(1.0, n), IncrementStream(1, n));
  const auto t = run(b, r, Vector::Constant(1, 0.25));
  CHECK(t.terminal()(0) == doctest::Approx(1.25).epsilon(1e-14));
}

TEST_CASE("theta scheme special cases") {
  const auto part = Partition::uniform(1.0, 1);
  IncrementStream s(1, 1);
  s.xi(0)(0) = 0.1;
  const auto f = linear_field({1.0});
  const Vector y0 = Vector::Constant(1, 1.0);
  CHECK(run_theta_scheme(f, part, s, 0.5, y0).terminal()(0) == doctest::Approx(1.105).epsilon(1e-15));
  CHECK(run_theta_scheme(f, part, s, 0.0, y0).terminal()(0) == doctest::Approx(1.11).epsilon(1e-15));
  CHECK_THROWS_AS(run_theta_scheme(f, part, s, 1.5, y0), InvalidArgument);

  auto streams = brownian(1, 50, 3);
  const auto euler = run_theta_scheme(f, Partition::uniform(1.0, 50), streams, 1.0, y0);
  for (std::size_t j = 0; j < 50; ++j) streams.Xi(j).setZero();
  const auto direct = run_stream(f, Partition::uniform(1.0, 50), streams, y0);
  CHECK(std::memcmp(euler.values.data(), direct.values.data(), sizeof(double) * direct.values.size()) == 0);
}

TEST_CASE("constant field telescopes") {
  SeedLineage rng(51, 0);
  Matrix c(2, 3);
  c << 1.0, -0.5, 2.0, 0.0, 0.3, 1.0;
  const std::size_t n = 100;
  auto s = random_stream(rng, 3, n);
  for (std::size_t j = 0; j < n; ++j) s.Xi(j).setZero();
  const auto r = RoughStepFunction::build(Partition::uniform(1.0, n), s);
  const Vector y0 = Vector::Constant(2, 0.7);
  const auto t = run(constant_field(c), r, y0);
  CHECK((t.terminal() - y0 - c * Vector(r.X(n))).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("scalar linear field gives a product formula") {
  SeedLineage rng(52, 0);
  for (int k = 0; k < 10; ++k) {
    const std::size_t n = 200;
    auto s = random_stream(rng, 1, n, 0.05);
    const auto t = run(linear_field({1.0}), RoughStepFunction::build(Partition::uniform(1.0, n), s),
                       Vector::Constant(1, 1.3));
    double prod = 1.3;
    for (std::size_t j = 0; j < n; ++j) {
      prod *= 1.0 + s.xi(j)(0) + s.Xi(j)(0, 0);
      CHECK(t.value(j + 1)(0) == doctest::Approx(prod).epsilon(1e-12));
    }
  }
}

TEST_CASE("runs are deterministic") {
  const auto s = brownian(2, 256, 11);
  const auto part = Partition::uniform(1.0, 256);
  const auto f = FieldRegistry::instance().make("trig2", {{"sigma", 1.0}});
  const Vector y0 = Vector::Constant(2, 0.1);
  const auto a = run_stream(f, part, s, y0);
  const auto b = run_stream(f, part, brownian(2, 256, 11), y0);
  CHECK(std::memcmp(a.values.data(), b.values.data(), sizeof(double) * a.values.size()) == 0);
  DavieStepper stepper(f);
  const Vector term = run_terminal(stepper, part, s, y0);
  CHECK(std::memcmp(term.data(), a.terminal().data(), sizeof(double) * 2) == 0);
}

TEST_CASE("trajectory evaluation is piecewise constant") {
  const auto t = run(linear_field({1.0}), scalar_steps({0.1, 0.2, -0.1, 0.05}, {0, 0, 0, 0}), Vector::Constant(1, 1.0));
  CHECK(t.value(0)(0) == 1.0);
  CHECK(t.at(0.3)(0) == t.value(1)(0));
  CHECK(t.at(0.5)(0) == t.value(2)(0));
  CHECK(t.at(1.0)(0) == t.value(4)(0));
  std::stringstream ss;
  write_trajectory_csv(ss, t);
  std::string header;
  std::getline(ss, header);
  CHECK(header == "t,y_1");
}

TEST_CASE("dimension mismatches are rejected") {
  const auto s = brownian(2, 8, 1);
  CHECK_THROWS_AS(run_stream(linear_field({1.0}), Partition::uniform(1.0, 8), s, Vector::Constant(1, 1.0)),
                  InvalidArgument);
  CHECK_THROWS_AS(run_stream(linear_field({1.0, 1.0}), Partition::uniform(1.0, 8), s, Vector::Constant(2, 1.0)),
                  InvalidArgument);
}

TEST_CASE("non-finite iterates abort with the step index") {
  const auto r = scalar_steps({0.1, 1e200, 1e200, 0.1}, {0, 0, 0, 0});
  try {
    run(linear_field({1.0}), r, Vector::Constant(1, 1e200));
    FAIL("expected IterateExplosion");
  } catch (const IterateExplosion& e) {
    CHECK(e.step() >= 1);
    CHECK(e.step() <= 3);
  }
}

TEST_CASE("remainder rule bound is enforced") {
  CHECK_THROWS_AS(RemainderRule([](std::size_t, const ConstVectorRef&, double, VectorRef) {}, 1.0, 1.0),
                  InvalidArgument);
  const std::size_t n = 16;
  const auto r = RoughStepFunction::build(Partition::uniform(1.0, n), brownian(1, n, 2));
  const double mesh = 1.0 / n;
  const RemainderRule ok([](std::size_t, const ConstVectorRef&, double dt, VectorRef out) { out(0) = 0.5 * std::pow(dt, 1.5); },
                         1.0, 1.5);
  CHECK(ok.bound(mesh) == doctest::Approx(std::pow(mesh, 1.5)));
  const auto with = run(linear_field({1.0}), r, Vector::Constant(1, 1.0), &ok);
  const auto without = run(linear_field({1.0}), r, Vector::Constant(1, 1.0));
  CHECK(with.terminal()(0) != without.terminal()(0));
  const RemainderRule bad([](std::size_t, const ConstVectorRef&, double dt, VectorRef out) { out(0) = 2.0 * std::pow(dt, 1.5); },
                          1.0, 1.5);
  CHECK_THROWS_AS(run(linear_field({1.0}), r, Vector::Constant(1, 1.0), &bad), RemainderBoundViolation);
}

TEST_CASE("remainders at the bound shift the path by O(mesh^(3 gamma - 1))") {
  const double gamma = 0.45, c = 0.01;
  const double frozen_C = 0.05;
  const auto f = linear_field({1.0});
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    for (std::size_t n : {64u, 256u, 1024u, 4096u}) {
      const auto part = Partition::uniform(1.0, n);
      const auto r = RoughStepFunction::build(part, brownian(1, n, seed));
      const RemainderRule rule(
          [c, gamma](std::size_t, const ConstVectorRef&, double dt, VectorRef out) { out(0) = c * std::pow(dt, 3 * gamma); },
          c, 3 * gamma);
      const auto a = run(f, r, Vector::Constant(1, 1.0));
      const auto b = run(f, r, Vector::Constant(1, 1.0), &rule);
      double sup = 0.0;
      for (std::size_t j = 0; j <= n; ++j) sup = std::max(sup, std::abs(a.value(j)(0) - b.value(j)(0)));
      CHECK(sup <= frozen_C * std::pow(part.mesh(), 3 * gamma - 1));
    }
  }
}

TEST_CASE("apply_theta_rule") {
  auto s = brownian(2, 4, 9);
  apply_theta_rule(s, 0.25);
  for (std::size_t j = 0; j < 4; ++j) {
    const Vector x = s.xi(j);
    CHECK((Matrix(s.Xi(j)) - 0.75 * x * x.transpose()).cwiseAbs().maxCoeff() <= 1e-16);
  }
}
