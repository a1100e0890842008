#pragma once

// Level-2 truncated tensor algebra T^2(R^d): increments (a, M), Chen
// multiplication, and the split of an increment into a group part
// (log coordinates a, A with A antisymmetric) plus a symmetric defect z.

#include "roughsim/types.hpp"

#include <vector>

namespace roughsim {

/// A level-2 increment: vector part `a` and matrix part `M`.
struct TensorPair {
  Vector a;
  Matrix M;

  TensorPair() = default;
  TensorPair(Vector a_, Matrix M_);

  static TensorPair zero(std::size_t d);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(a.size()); }
};

/// Log coordinates of an element of the step-2 free nilpotent group.
/// Only the strict upper triangle of the area matrix is stored, so the
/// antisymmetry A + A^T = 0 holds exactly.
class GroupLogElement {
 public:
  GroupLogElement() = default;
  explicit GroupLogElement(std::size_t d);
  GroupLogElement(Vector a, const Matrix& antisymmetric_part);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(a_.size()); }

  const Vector& a() const noexcept { return a_; }
  Vector& a() noexcept { return a_; }

  /// Signed area coordinate A^{alpha beta}; A(beta, alpha) = -A(alpha, beta).
  double area(std::size_t alpha, std::size_t beta) const;
  void set_area(std::size_t alpha, std::size_t beta, double value);

  Matrix area_matrix() const;

 private:
  std::size_t upper_index(std::size_t alpha, std::size_t beta) const;

  Vector a_;
  std::vector<double> upper_;
};

/// Symmetric d x d matrix stored as its upper triangle (diagonal included).
class SymmetricDefect {
 public:
  SymmetricDefect() = default;
  explicit SymmetricDefect(std::size_t d);
  explicit SymmetricDefect(const Matrix& symmetric);

  std::size_t dim() const noexcept { return d_; }
  double operator()(std::size_t alpha, std::size_t beta) const;
  Matrix matrix() const;

 private:
  std::size_t index(std::size_t alpha, std::size_t beta) const;

  std::size_t d_ = 0;
  std::vector<double> upper_;
};

struct Decomposition {
  GroupLogElement g;
  SymmetricDefect z;
};

/// (p.a + q.a, p.M + q.M + p.a (x) q.a).
TensorPair chen_mul(const TensorPair& p, const TensorPair& q);

/// Inverse under chen_mul: (-a, -M + a (x) a).
TensorPair chen_inverse(const TensorPair& p);

/// A = (M - M^T)/2 and z = (M + M^T)/2 - a (x) a / 2.
Decomposition decompose(const TensorPair& p);

/// (a, a (x) a / 2 + A + z).
TensorPair recompose(const GroupLogElement& g, const SymmetricDefect& z);

/// Length of the line-plus-square-loops realization of g:
/// |a| + sum_{alpha<beta} 4 sqrt(|A^{alpha beta}|). It bounds the
/// Carnot-Caratheodory norm from above.
double cc_norm_upper(const GroupLogElement& g);

/// Dilation (a, A) -> (lambda a, lambda^2 A).
GroupLogElement dilate(const GroupLogElement& g, double lambda);

/// Signature of a straight segment with displacement v: (v, v (x) v / 2).
TensorPair segment_signature(const ConstVectorRef& v);

}  // namespace roughsim
