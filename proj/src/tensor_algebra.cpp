#include "roughsim/tensor_algebra.hpp"

#include <cmath>
#include <string>

namespace roughsim {

namespace {

void require_same_dim(const TensorPair& p, const TensorPair& q) {
  if (p.dim() != q.dim()) {
    throw InvalidArgument("chen_mul: dimension mismatch (" + std::to_string(p.dim()) +
                          " vs " + std::to_string(q.dim()) + ")");
  }
}

void require_consistent(const TensorPair& p) {
  const auto d = static_cast<Eigen::Index>(p.dim());
  if (p.M.rows() != d || p.M.cols() != d) {
    throw InvalidArgument("TensorPair: matrix part must be d x d");
  }
}

}  // namespace

TensorPair::TensorPair(Vector a_, Matrix M_) : a(std::move(a_)), M(std::move(M_)) {
  require_consistent(*this);
}

TensorPair TensorPair::zero(std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  return TensorPair(Vector::Zero(n), Matrix::Zero(n, n));
}

GroupLogElement::GroupLogElement(std::size_t d)
    : a_(Vector::Zero(static_cast<Eigen::Index>(d))), upper_(d * (d - 1) / 2, 0.0) {}

GroupLogElement::GroupLogElement(Vector a, const Matrix& antisymmetric_part)
    : a_(std::move(a)) {
  const auto d = dim();
  if (antisymmetric_part.rows() != static_cast<Eigen::Index>(d) ||
      antisymmetric_part.cols() != static_cast<Eigen::Index>(d)) {
    throw InvalidArgument("GroupLogElement: area matrix must be d x d");
  }
  upper_.assign(d * (d - 1) / 2, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      upper_[upper_index(i, j)] = antisymmetric_part(i, j);
    }
  }
}

std::size_t GroupLogElement::upper_index(std::size_t alpha, std::size_t beta) const {
  // Row-major enumeration of the strict upper triangle.
  const auto d = dim();
  return alpha * d - alpha * (alpha + 1) / 2 + (beta - alpha - 1);
}

double GroupLogElement::area(std::size_t alpha, std::size_t beta) const {
  if (alpha >= dim() || beta >= dim()) throw InvalidArgument("GroupLogElement: index out of range");
  if (alpha == beta) return 0.0;
  if (alpha < beta) return upper_[upper_index(alpha, beta)];
  return -upper_[upper_index(beta, alpha)];
}

void GroupLogElement::set_area(std::size_t alpha, std::size_t beta, double value) {
  if (alpha >= dim() || beta >= dim() || alpha == beta) {
    throw InvalidArgument("GroupLogElement: invalid area index");
  }
  if (alpha < beta) {
    upper_[upper_index(alpha, beta)] = value;
  } else {
    upper_[upper_index(beta, alpha)] = -value;
  }
}

Matrix GroupLogElement::area_matrix() const {
  const auto d = dim();
  Matrix A = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const double v = upper_[upper_index(i, j)];
      A(i, j) = v;
      A(j, i) = -v;
    }
  }
  return A;
}

SymmetricDefect::SymmetricDefect(std::size_t d) : d_(d), upper_(d * (d + 1) / 2, 0.0) {}

SymmetricDefect::SymmetricDefect(const Matrix& symmetric)
    : d_(static_cast<std::size_t>(symmetric.rows())) {
  if (symmetric.rows() != symmetric.cols()) {
    throw InvalidArgument("SymmetricDefect: matrix must be square");
  }
  upper_.assign(d_ * (d_ + 1) / 2, 0.0);
  for (std::size_t i = 0; i < d_; ++i) {
    for (std::size_t j = i; j < d_; ++j) {
      upper_[index(i, j)] = symmetric(i, j);
    }
  }
}

std::size_t SymmetricDefect::index(std::size_t alpha, std::size_t beta) const {
  if (alpha > beta) std::swap(alpha, beta);
  // Row-major enumeration of the upper triangle, diagonal included.
  return alpha * d_ - (alpha * (alpha + 1)) / 2 + alpha + (beta - alpha);
}

double SymmetricDefect::operator()(std::size_t alpha, std::size_t beta) const {
  if (alpha >= d_ || beta >= d_) throw InvalidArgument("SymmetricDefect: index out of range");
  return upper_[index(alpha, beta)];
}

Matrix SymmetricDefect::matrix() const {
  const auto n = static_cast<Eigen::Index>(d_);
  Matrix z(n, n);
  for (std::size_t i = 0; i < d_; ++i) {
    for (std::size_t j = i; j < d_; ++j) {
      const double v = upper_[index(i, j)];
      z(i, j) = v;
      z(j, i) = v;
    }
  }
  return z;
}

TensorPair chen_mul(const TensorPair& p, const TensorPair& q) {
  require_same_dim(p, q);
  TensorPair out;
  out.a = p.a + q.a;
  out.M = p.M + q.M;
  out.M.noalias() += p.a * q.a.transpose();
  return out;
}

TensorPair chen_inverse(const TensorPair& p) {
  TensorPair out;
  out.a = -p.a;
  out.M = -p.M;
  out.M.noalias() += p.a * p.a.transpose();
  return out;
}

Decomposition decompose(const TensorPair& p) {
  require_consistent(p);
  const Matrix anti = 0.5 * (p.M - p.M.transpose());
  const Matrix sym = 0.5 * (p.M + p.M.transpose()) - 0.5 * (p.a * p.a.transpose());
  return Decomposition{GroupLogElement(p.a, anti), SymmetricDefect(sym)};
}

TensorPair recompose(const GroupLogElement& g, const SymmetricDefect& z) {
  if (g.dim() != z.dim()) throw InvalidArgument("recompose: dimension mismatch");
  Matrix M = 0.5 * (g.a() * g.a().transpose());
  M += g.area_matrix();
  M += z.matrix();
  return TensorPair(g.a(), std::move(M));
}

double cc_norm_upper(const GroupLogElement& g) {
  double length = g.a().norm();
  const auto d = g.dim();
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      length += 4.0 * std::sqrt(std::abs(g.area(i, j)));
    }
  }
  return length;
}

GroupLogElement dilate(const GroupLogElement& g, double lambda) {
  return GroupLogElement(lambda * g.a(), (lambda * lambda) * g.area_matrix());
}

TensorPair segment_signature(const ConstVectorRef& v) {
  return TensorPair(Vector(v), 0.5 * (v * v.transpose()));
}

}  // namespace roughsim
