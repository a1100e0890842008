#include "roughsim/parallel.hpp"
#include "roughsim/rng.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

using namespace roughsim;

TEST_CASE("philox4x64_10 known answers") {
  const auto a = philox4x64_10({1, 0, 0, 0}, {0, 0});
  CHECK(a[0] == 0x02f4ba6408e4d89bULL);
  CHECK(a[1] == 0x3dd62b0b9ca8c5b2ULL);
  CHECK(a[2] == 0x1c8667a55d902e79ULL);
  CHECK(a[3] == 0x907d7a052fd5b4dcULL);
  const auto b = philox4x64_10({4, 4, 5, 6}, {1, 2});
  CHECK(b[0] == 0x8070e5788d05927eULL);
  CHECK(b[1] == 0x1c5aef1cb5451508ULL);
  CHECK(b[2] == 0xd04b22ec4863e2a0ULL);
  CHECK(b[3] == 0xd67cc7da10e919ceULL);
}

TEST_CASE("seed lineage layout") {
  SeedLineage s(7, 3, 2);
  CHECK(s.master_seed() == 7);
  CHECK(s.path_id() == 3);
  CHECK(s.stream_id() == 2);
  for (std::uint64_t blk = 0; blk < 3; ++blk) {
    const auto w = philox4x64_10({blk, 2, 0, 0}, {7, 3});
    for (int i = 0; i < 4; ++i) CHECK(s.next_u64() == w[i]);
  }
  CHECK(s.words_used() == 12);
}

TEST_CASE("lineages are deterministic and distinct") {
  SeedLineage a(1, 0), b(1, 0), c(1, 1), e(2, 0), f(1, 0, 1);
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    CHECK(x != c.normal());
    CHECK(x != e.normal());
    CHECK(x != f.normal());
  }
}

TEST_CASE("draw ranges and moments") {
  SeedLineage s(11, 0);
  const std::size_t n = 200000;
  std::vector<double> u(n), z(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = s.uniform();
    CHECK(u[i] >= 0.0);
    CHECK(u[i] < 1.0);
  }
  for (auto& v : z) v = s.normal();
  const auto mu = mean_se(u), mz = mean_se(z);
  CHECK(std::abs(mu.mean - 0.5) <= 4 * mu.se);
  CHECK(std::abs(mz.mean) <= 4 * mz.se);
  CHECK(mz.sd == doctest::Approx(1.0).epsilon(0.01));
  for (int i = 0; i < 1000; ++i) {
    const double o = s.uniform_open();
    CHECK(o > 0.0);
    CHECK(o < 1.0);
    CHECK(std::abs(s.rademacher()) == 1.0);
  }
}

TEST_CASE("below is uniform on its range") {
  SeedLineage s(12, 0);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto k = s.below(7);
    REQUIRE(k < 7);
    ++counts[k];
  }
  for (int c : counts) CHECK(std::abs(c - n / 7) <= 5 * std::sqrt(n / 7.0));
  CHECK(s.below(1) == 0);
}

TEST_CASE("parallel_for visits every index once") {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(1000, [&](std::size_t i, std::size_t) { hits[i].fetch_add(1); }, 4);
  for (const auto& h : hits) CHECK(h.load() == 1);
  parallel_for(0, [](std::size_t, std::size_t) { FAIL("no calls expected"); }, 2);
}

TEST_CASE("parallel_for rethrows worker exceptions") {
  CHECK_THROWS_AS(parallel_for(
                      100,
                      [](std::size_t i, std::size_t) {
                        if (i == 37) throw std::runtime_error("boom");
                      },
                      3),
                  std::runtime_error);
}

TEST_CASE("parallel and serial reductions agree bit for bit") {
  std::vector<double> out1(500), out4(500);
  auto fill = [](std::vector<double>& out) {
    return [&out](std::size_t i, std::size_t) {
      SeedLineage s(5, i);
      out[i] = s.normal();
    };
  };
  parallel_for(500, fill(out1), 1);
  parallel_for(500, fill(out4), 4);
  CHECK(out1 == out4);
  CHECK(pairwise_sum(out1) == pairwise_sum(out4));
}

TEST_CASE("pairwise_sum and mean_se") {
  CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
  std::vector<double> v(1000);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(pairwise_sum(v) == 500500.0);
  std::vector<double> tiny(1 << 20, 0.1);
  CHECK(std::abs(pairwise_sum(tiny) - 0.1 * (1 << 20)) <= 1e-8);
  const auto m = mean_se(std::vector<double>{1.0, 2.0, 3.0, 4.0});
  CHECK(m.mean == 2.5);
  CHECK(m.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(m.n == 4);
}
