#pragma once

#include "roughsim/rng.hpp"
#include "roughsim/rough_step.hpp"
#include "roughsim/tensor_algebra.hpp"

#include <algorithm>
#include <cmath>

namespace roughsim::testing {

inline Vector random_vector(SeedLineage& rng, std::size_t d, double scale = 1.0) {
  Vector v(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) v(static_cast<Eigen::Index>(i)) = scale * rng.normal();
  return v;
}

inline Matrix random_matrix(SeedLineage& rng, std::size_t d, double scale = 1.0) {
  const auto n = static_cast<Eigen::Index>(d);
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = scale * rng.normal();
  return m;
}

inline TensorPair random_pair(SeedLineage& rng, std::size_t d) {
  return TensorPair(random_vector(rng, d), random_matrix(rng, d));
}

inline double max_abs_diff(const TensorPair& p, const TensorPair& q) {
  return std::max((p.a - q.a).cwiseAbs().maxCoeff(), (p.M - q.M).cwiseAbs().maxCoeff());
}

inline IncrementStream random_stream(SeedLineage& rng, std::size_t d, std::size_t n, double scale = 1.0) {
  IncrementStream s(d, n);
  for (std::size_t j = 0; j < n; ++j) {
    s.xi(j) = random_vector(rng, d, scale);
    s.Xi(j) = random_matrix(rng, d, scale * scale);
  }
  return s;
}

/// Brute-force (sum xi, sum_{l<=j<i<k} xi_j (x) xi_i + sum Xi_j) over cells [l, k).
inline TensorPair brute_increment(const IncrementStream& s, std::size_t l, std::size_t k) {
  const std::size_t d = s.dim();
  TensorPair r = TensorPair::zero(d);
  for (std::size_t i = l; i < k; ++i) {
    r.a += s.xi(i);
    r.M += s.Xi(i);
    for (std::size_t j = l; j < i; ++j) r.M += Vector(s.xi(j)) * Vector(s.xi(i)).transpose();
  }
  return r;
}

}  // namespace roughsim::testing
