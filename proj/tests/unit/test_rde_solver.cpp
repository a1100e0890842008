#include "roughsim/diagnostics.hpp"
#include "roughsim/noise_models.hpp"
#include "roughsim/rde_solver.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <cstring>

using namespace roughsim;
using namespace roughsim::testing;

namespace {

RoughStepFunction brownian_steps(std::size_t d, std::size_t n, std::uint64_t seed, Xi2Rule rule = Xi2Rule::zero()) {
  NoiseSpec spec;
  spec.kind = NoiseKind::Brownian;
  spec.d = d;
  spec.xi2 = rule;
  validate(spec);
  const auto p = Partition::uniform(1.0, n);
  return RoughStepFunction::build(p, generate(spec, p, seed));
}

// Smooth planar curve sampled on n cells with geometric (midpoint) level 2.
RoughStepFunction smooth_steps(std::size_t n) {
  IncrementStream s(2, n);
  auto curve = [](double t) {
    Vector x(2);
    x << 0.6 * std::sin(2.0 * M_PI * t), 0.5 * std::cos(3.0 * M_PI * t);
    return x;
  };
  for (std::size_t j = 0; j < n; ++j) {
    const Vector v = curve(double(j + 1) / n) - curve(double(j) / n);
    s.xi(j) = v;
    s.Xi(j) = 0.5 * v * v.transpose();
  }
  return RoughStepFunction::build(Partition::uniform(1.0, n), std::move(s));
}

bool bit_equal(const Trajectory& a, const Trajectory& b) {
  return a.values.size() == b.values.size() &&
         std::memcmp(a.values.data(), b.values.data(), sizeof(double) * a.values.size()) == 0;
}

}  // namespace

TEST_CASE("one substep reproduces the recursion bit for bit") {
  const auto trig = FieldRegistry::instance().make("trig2", {{"sigma", 1.0}});
  const auto lin = linear_field({0.8, -0.4});
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (const auto& rule : {Xi2Rule::zero(), Xi2Rule::theta_rule(0.5), Xi2Rule::refined(4)}) {
      const auto r = brownian_steps(2, 128, seed, rule);
      const auto lrp = lift(r);
      CHECK(bit_equal(solve_rde(trig, lrp, Vector::Constant(2, 0.2)), run(trig, r, Vector::Constant(2, 0.2))));
      CHECK(bit_equal(solve_rde(lin, lrp, Vector::Constant(1, 1.0)), run(lin, r, Vector::Constant(1, 1.0))));
    }
  }
}

TEST_CASE("substeps converge to the Stratonovich solution for a scalar linear field") {
  IncrementStream s(1, 32);
  for (std::size_t j = 0; j < 32; ++j) {
    const double v = 0.8 * (std::sin(2.0 * M_PI * (j + 1) / 40.0) - std::sin(2.0 * M_PI * j / 40.0));
    s.xi(j)(0) = v;
    s.Xi(j)(0, 0) = 0.5 * v * v;
  }
  const auto r = RoughStepFunction::build(Partition::uniform(1.0, 32), std::move(s));
  const auto lrp = lift(r);
  const double exact = std::exp(r.X(32)(0));
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k : {1u, 4u, 16u, 64u}) {
    RdeConfig cfg;
    cfg.substeps_per_cell = k;
    const double err = std::abs(solve_rde(linear_field({1.0}), lrp, Vector::Constant(1, 1.0), cfg).terminal()(0) - exact);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 1e-6);
}

TEST_CASE("zero path leaves the solution constant") {
  const auto lrp = lift(RoughStepFunction::build(Partition::uniform(1.0, 16), IncrementStream(2, 16)));
  const auto f = FieldRegistry::instance().make("trig2", {});
  const Vector y0 = Vector::Constant(2, 0.4);
  RdeConfig cfg;
  cfg.substeps_per_cell = 8;
  const auto a = solve_rde(f, lrp, y0, cfg);
  const auto b = solve_modified_equation(f, lrp, y0, 4);
  for (std::size_t j = 0; j <= 16; ++j) {
    CHECK((Vector(a.value(j)) - y0).cwiseAbs().maxCoeff() == 0.0);
    CHECK((Vector(b.value(j)) - y0).cwiseAbs().maxCoeff() == 0.0);
  }
  RdeConfig bad;
  bad.substeps_per_cell = 0;
  CHECK_THROWS_AS(solve_rde(f, lrp, y0, bad), InvalidArgument);
}

TEST_CASE("modified equation on a single scalar cell") {
  const double h = 0.3, c = 0.02;
  IncrementStream s(1, 1);
  s.xi(0)(0) = h;
  s.Xi(0)(0, 0) = c;
  const auto lrp = lift(RoughStepFunction::build(Partition({0.0, 0.5}), s));
  const auto t = solve_modified_equation(linear_field({1.0}), lrp, Vector::Constant(1, 1.0), 64);
  CHECK(std::abs(t.terminal()(0) - std::exp(h + c - 0.5 * h * h)) <= 1e-8);
}

TEST_CASE("modified equation dense samples include piece boundaries") {
  Matrix M = Matrix::Zero(2, 2);
  M(0, 1) = 0.04;
  IncrementStream s(2, 2);
  s.xi(0) << 0.1, 0.2;
  s.Xi(0) = M;
  s.xi(1) << -0.1, 0.0;
  const auto lrp = lift(RoughStepFunction::build(Partition::uniform(1.0, 2), s));
  DenseSamples dense;
  const auto t = solve_modified_equation(FieldRegistry::instance().make("trig2", {}), lrp, Vector::Constant(2, 0.0), 8, &dense);
  CHECK(t.size() == 3);
  CHECK(dense.times.size() > 3);
  CHECK(std::is_sorted(dense.times.begin(), dense.times.end()));
  CHECK(dense.values.size() == 2 * dense.times.size());
  CHECK(dense.times.front() == 0.0);
  CHECK(dense.times.back() == doctest::Approx(1.0));
}

TEST_CASE("certify identical trajectories") {
  const auto r = brownian_steps(1, 64, 1);
  const auto t = run(linear_field({1.0}), r, Vector::Constant(1, 1.0));
  const auto rep = certify_approximation(t, t, 0.45, 3.0);
  CHECK(rep.sup_error == 0.0);
  CHECK(rep.pass);
  CHECK(rep.K_bound == doctest::Approx(std::pow(1.0 / 64, 0.35)));
  CHECK(rep.K_bound_c3 == doctest::Approx(rep.K_bound));
  const auto small = certify_approximation(t, t, 0.45, 0.5);
  CHECK(small.K_bound == doctest::Approx(std::pow(0.5, 4) * std::pow(1.0 / 64, 0.35)));
  CHECK(small.K_bound_c3 == doctest::Approx(std::pow(0.5, 3) * std::pow(1.0 / 64, 0.35)));
  const auto j = rep.to_json();
  for (const char* key : {"sup_error", "K_bound", "gamma", "delta", "C_n", "pass"}) CHECK(j.contains(key));
  const auto other = run(linear_field({1.0}), brownian_steps(1, 32, 1), Vector::Constant(1, 1.0));
  CHECK_THROWS_AS(certify_approximation(t, other, 0.45, 1.0), InvalidArgument);
}

TEST_CASE("constant field: recursion and modified equation agree on the mesh") {
  Matrix c(2, 2);
  c << 1.0, 0.5, -0.3, 2.0;
  const auto r = brownian_steps(2, 128, 4);
  const auto lrp = lift(r);
  const auto a = run(constant_field(c), r, Vector::Zero(2));
  const auto b = solve_modified_equation(constant_field(c), lrp, Vector::Zero(2), 4);
  CHECK(certify_approximation(a, b, 0.45, 1.0).sup_error <= 1e-8);
}

TEST_CASE("modified equation shadows the recursion with a rate") {
  const auto f = FieldRegistry::instance().make("trig2", {});
  std::vector<double> deltas, errs;
  for (std::size_t n : {64u, 256u, 1024u, 4096u}) {
    const auto r = brownian_steps(2, n, 21);
    const auto rec = run(f, r, Vector::Constant(2, 0.1));
    const auto mod = solve_modified_equation(f, lift(r), Vector::Constant(2, 0.1), 4);
    deltas.push_back(1.0 / n);
    errs.push_back(certify_approximation(rec, mod, 0.45, 1.0).sup_error);
  }
  CHECK(rate_fit(deltas, errs).slope >= 0.25);
}

TEST_CASE("Davie defect scales at least like span^(3 gamma)") {
  const double gamma = 0.45;
  const std::size_t n = 1024;
  const auto r = smooth_steps(n);
  const auto lrp = lift(r);
  const auto f = FieldRegistry::instance().make("trig2", {});
  RdeConfig cfg;
  cfg.substeps_per_cell = 64;
  const Vector y0 = Vector::Constant(2, 0.3);
  const auto ref = solve_rde(f, lrp, y0, cfg);
  const Matrix V = f.eval_V(y0);
  const auto vv = derived_field(f)(y0);
  std::vector<double> spans, defects;
  for (std::size_t k = 1; k <= 6; ++k) {
    const std::size_t cells = n >> k;
    const double t = r.partition().tau(cells);
    const auto inc = lrp.eval(0.0, t);
    Vector step = y0 + V * inc.a;
    for (std::size_t kap = 0; kap < 2; ++kap) step(kap) += contract(vv[kap], inc.M);
    spans.push_back(t);
    defects.push_back((Vector(ref.value(cells)) - step).norm());
  }
  CHECK(rate_fit(spans, defects).slope >= 3 * gamma - 0.1);
}

TEST_CASE("terminal values are locally Lipschitz in the initial condition") {
  const double frozen_L = 10.0;
  const auto f = FieldRegistry::instance().make("trig2", {});
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto lrp = lift(brownian_steps(2, 256, seed));
    RdeConfig cfg;
    cfg.substeps_per_cell = 4;
    const Vector y0 = Vector::Constant(2, 0.1);
    const Vector base = solve_rde(f, lrp, y0, cfg).terminal();
    for (double delta : {1e-3, 1e-4}) {
      Vector y1 = y0;
      y1(0) += delta;
      const Vector moved = solve_rde(f, lrp, y1, cfg).terminal();
      CHECK((moved - base).norm() <= frozen_L * delta);
    }
  }
}
