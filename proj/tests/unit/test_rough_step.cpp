#include "test_helpers.hpp"

#include <doctest.h>

#include <sstream>

using namespace roughsim;
using namespace roughsim::testing;

namespace {

RoughStepFunction two_unit_steps() {
  IncrementStream s(2, 2);
  s.xi(0) << 1.0, 0.0;
  s.xi(1) << 0.0, 1.0;
  s.Xi(0).setZero();
  s.Xi(1).setZero();
  return RoughStepFunction::build(Partition::uniform(1.0, 2), std::move(s));
}

}  // namespace

TEST_CASE("partition validation") {
  CHECK_NOTHROW(Partition({0.0, 0.5, 1.0}));
  CHECK_THROWS_AS(Partition({0.1, 0.5, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(Partition({0.0, 0.5, 0.5, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(Partition({0.0, 0.7, 0.6}), InvalidArgument);
  CHECK_THROWS_AS(Partition({0.0}), InvalidArgument);
  // N * mesh = 3 * 0.98 exceeds a bound of 2 T.
  CHECK_THROWS_AS(Partition({0.0, 0.01, 0.02, 1.0}, 2.0), InvalidArgument);

  const auto p = Partition::uniform(2.0, 8);
  CHECK(p.count() == 8);
  CHECK(p.horizon() == 2.0);
  CHECK(p.mesh() == doctest::Approx(0.25));
  CHECK(p.index_at(0.0) == 0);
  CHECK(p.index_at(0.26) == 1);
  CHECK(p.index_at(0.25) == 1);
  CHECK(p.index_at(2.0) == 8);
  std::size_t k = 0;
  CHECK(p.is_mesh_point(0.5, k));
  CHECK(k == 2);
  CHECK_FALSE(p.is_mesh_point(0.6, k));
}

TEST_CASE("build two unit increments") {
  const auto r = two_unit_steps();
  CHECK(r.X(2)(0) == 1.0);
  CHECK(r.X(2)(1) == 1.0);
  CHECK(r.XX(2)(0, 1) == 1.0);
  CHECK(r.XX(2)(1, 0) == 0.0);
  CHECK(r.XX(2)(0, 0) == 0.0);
  CHECK(r.XX(2)(1, 1) == 0.0);
  CHECK(r.X(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.XX(0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("later_earlier convention is the transpose") {
  SeedLineage rng(11, 0);
  auto s = random_stream(rng, 3, 20);
  for (std::size_t j = 0; j < s.count(); ++j) s.Xi(j).setZero();
  const auto p = Partition::uniform(1.0, 20);
  const auto el = RoughStepFunction::build(p, s);
  const auto le = RoughStepFunction::build(p, s, Convention::LaterEarlier);
  CHECK((Matrix(el.XX(20)) - Matrix(le.XX(20)).transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(parse_convention("later_earlier") == Convention::LaterEarlier);
  CHECK(to_string(Convention::EarlierLater) == "earlier_later");
  CHECK_THROWS_AS(parse_convention("sideways"), InvalidArgument);
}

TEST_CASE("all-zero increments give a zero path") {
  const auto r = RoughStepFunction::build(Partition::uniform(1.0, 10), IncrementStream(2, 10));
  for (std::size_t k = 0; k <= 10; ++k) {
    CHECK(r.X(k).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.XX(k).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(discrete_holder_norm(r, 0.4) == 0.0);
}

TEST_CASE("single midpoint increment") {
  IncrementStream s(1, 1);
  s.xi(0)(0) = 0.3;
  s.Xi(0)(0, 0) = 0.5 * 0.3 * 0.3;
  const auto r = RoughStepFunction::build(Partition::uniform(1.0, 1), std::move(s));
  CHECK(r.XX(1)(0, 0) == doctest::Approx(0.045).epsilon(1e-14));
}

TEST_CASE("build rejects inconsistent lengths") {
  CHECK_THROWS_AS(RoughStepFunction::build(Partition::uniform(1.0, 4), IncrementStream(1, 3)), InvalidArgument);
}

TEST_CASE("prefix recurrences hold") {
  SeedLineage rng(12, 0);
  const auto s = random_stream(rng, 2, 30);
  const auto r = RoughStepFunction::build(Partition::uniform(1.0, 30), s);
  for (std::size_t k = 0; k < 30; ++k) {
    CHECK((Vector(r.X(k + 1)) - Vector(r.X(k)) - Vector(s.xi(k))).cwiseAbs().maxCoeff() <= 1e-14);
    const Matrix expect = Matrix(r.XX(k)) + Vector(r.X(k)) * Vector(s.xi(k)).transpose() + Matrix(s.Xi(k));
    CHECK((Matrix(r.XX(k + 1)) - expect).cwiseAbs().maxCoeff() <= 1e-13);
  }
}

TEST_CASE("increment basics") {
  const auto r = two_unit_steps();
  const auto z = r.increment(0.3, 0.3);
  CHECK(z.a.cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.M.cwiseAbs().maxCoeff() == 0.0);
  const auto full = r.increment(0.0, 1.0);
  CHECK(full.a(0) == 1.0);
  CHECK(full.a(1) == 1.0);
  CHECK(full.M(0, 1) == 1.0);
  CHECK(full.M(1, 0) == 0.0);
  CHECK_THROWS_AS(r.increment(0.7, 0.2), InvalidArgument);
}

TEST_CASE("increment matches brute-force double sum") {
  SeedLineage rng(13, 0);
  const std::size_t n = 40;
  const auto s = random_stream(rng, 3, n);
  const auto p = Partition::uniform(1.0, n);
  const auto r = RoughStepFunction::build(p, s);
  for (int k = 0; k < 100; ++k) {
    double a = rng.uniform(), b = rng.uniform();
    if (a > b) std::swap(a, b);
    const auto got = r.increment(a, b);
    const auto want = brute_increment(s, p.index_at(a), p.index_at(b));
    CHECK(max_abs_diff(got, want) <= 1e-12);
  }
}

TEST_CASE("single cell increment is returned verbatim") {
  SeedLineage rng(14, 0);
  const auto s = random_stream(rng, 2, 5);
  const auto r = RoughStepFunction::build(Partition::uniform(1.0, 5), s);
  const auto c = r.increment_index(2, 3);
  CHECK((c.a - Vector(s.xi(2))).cwiseAbs().maxCoeff() == 0.0);
  CHECK((c.M - Matrix(s.Xi(2))).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Chen consistency over mesh triples") {
  SeedLineage rng(15, 0);
  const std::size_t n = 64;
  const auto r = RoughStepFunction::build(Partition::uniform(1.0, n), random_stream(rng, 2, n));
  for (int k = 0; k < 300; ++k) {
    std::size_t i[3] = {rng.below(n + 1), rng.below(n + 1), rng.below(n + 1)};
    std::sort(i, i + 3);
    const auto whole = r.increment_index(i[0], i[2]);
    const auto split = chen_mul(r.increment_index(i[0], i[1]), r.increment_index(i[1], i[2]));
    CHECK(max_abs_diff(whole, split) <= 1e-12);
  }
}

TEST_CASE("increment is invariant under moving s, t within their cells") {
  SeedLineage rng(16, 0);
  const std::size_t n = 16;
  const auto r = RoughStepFunction::build(Partition::uniform(1.0, n), random_stream(rng, 2, n));
  const double h = 1.0 / n;
  for (int k = 0; k < 50; ++k) {
    const std::size_t l = rng.below(n), m = l + rng.below(n - l);
    const auto base = r.increment(l * h, m * h);
    const auto moved = r.increment((l + 0.45 * rng.uniform()) * h, (m + 0.5 + 0.45 * rng.uniform()) * h);
    CHECK(max_abs_diff(base, moved) == 0.0);
  }
  const auto v = r.value(0.5 * h);
  CHECK(v.a.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("discrete Hoelder norm of single cells") {
  const double width = 0.25, c = 0.7, gamma = 0.4;
  {
    IncrementStream s(1, 1);
    s.xi(0)(0) = c;
    s.Xi(0)(0, 0) = 0.0;
    const auto r = RoughStepFunction::build(Partition({0.0, width}), std::move(s));
    CHECK(discrete_holder_norm(r, gamma) == doctest::Approx(c * std::pow(width, -gamma)).epsilon(1e-13));
  }
  {
    const double m = 0.09;
    IncrementStream s(1, 1);
    s.xi(0)(0) = 0.0;
    s.Xi(0)(0, 0) = m;
    const auto r = RoughStepFunction::build(Partition({0.0, width}), std::move(s));
    CHECK(discrete_holder_norm(r, gamma) == doctest::Approx(std::sqrt(m) * std::pow(width, -gamma)).epsilon(1e-13));
  }
}

TEST_CASE("discrete Hoelder norm validation and stride") {
  SeedLineage rng(17, 0);
  const auto r = RoughStepFunction::build(Partition::uniform(1.0, 64), random_stream(rng, 2, 64, 0.1));
  CHECK_THROWS_AS(discrete_holder_norm(r, 0.0), InvalidArgument);
  CHECK_THROWS_AS(discrete_holder_norm(r, 1.5), InvalidArgument);
  const auto full = discrete_holder_parts(r, 0.4);
  const auto sub = discrete_holder_parts(r, 0.4, 4);
  CHECK_FALSE(full.lower_bound);
  CHECK(sub.lower_bound);
  CHECK(sub.value <= full.value + 1e-15);
  CHECK(full.value == doctest::Approx(full.level1 + full.level2));
}

TEST_CASE("discrete Hoelder norm is non-decreasing in gamma on T <= 1") {
  SeedLineage rng(18, 0);
  for (int k = 0; k < 10; ++k) {
    const auto r = RoughStepFunction::build(Partition::uniform(1.0, 50), random_stream(rng, 2, 50, 0.2));
    double prev = 0.0;
    for (double g = 0.1; g <= 1.0 + 1e-12; g += 0.1) {
      const double v = discrete_holder_norm(r, g);
      CHECK(v >= prev * (1.0 - 1e-14));
      prev = v;
    }
  }
}

TEST_CASE("level one prefix is linear in xi") {
  SeedLineage rng(19, 0);
  auto s = random_stream(rng, 3, 25);
  const auto p = Partition::uniform(1.0, 25);
  const auto r1 = RoughStepFunction::build(p, s);
  const double lambda = -2.5;
  for (std::size_t j = 0; j < s.count(); ++j) s.xi(j) *= lambda;
  const auto r2 = RoughStepFunction::build(p, s);
  for (std::size_t k = 0; k <= 25; ++k)
    CHECK((Vector(r2.X(k)) - lambda * Vector(r1.X(k))).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("stream CSV round trip") {
  SeedLineage rng(20, 0);
  const auto p = Partition({0.0, 0.1, 0.35, 0.5, 1.0});
  const auto s = random_stream(rng, 2, 4);
  std::stringstream ss;
  write_stream_csv(ss, p, s);
  const std::string text = ss.str();
  CHECK(text.rfind("t_start,t_end,xi_1,xi_2,Xi_11,Xi_12,Xi_21,Xi_22", 0) == 0);
  const auto back = read_stream_csv(ss);
  CHECK(back.partition == p);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK((Vector(back.stream.xi(j)) - Vector(s.xi(j))).cwiseAbs().maxCoeff() == 0.0);
    CHECK((Matrix(back.stream.Xi(j)) - Matrix(s.Xi(j))).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("stream CSV rejects malformed input") {
  std::stringstream no_header("0,1,0.5,0\n");
  CHECK_THROWS(read_stream_csv(no_header));
  std::stringstream gap("t_start,t_end,xi_1,Xi_11\n0,0.5,1,0\n0.6,1,1,0\n");
  CHECK_THROWS(read_stream_csv(gap));
}
