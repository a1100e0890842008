#pragma once

// Partitions, increment streams and the rough step function built from them
// by prefix summation.

#include "roughsim/tensor_algebra.hpp"
#include "roughsim/types.hpp"

#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace roughsim {

/// Strictly increasing mesh 0 = tau_0 < ... < tau_N = T.
class Partition {
 public:
  /// Default bound on N * mesh, in units of T.
  static constexpr double kDefaultMeshRatioBound = 8.0;

  Partition() = default;

  /// Validates monotonicity, tau_0 = 0, and N * mesh <= max_mesh_ratio * T.
  explicit Partition(std::vector<double> taus,
                     double max_mesh_ratio = kDefaultMeshRatioBound);

  static Partition uniform(double T, std::size_t N);

  std::size_t count() const noexcept { return taus_.empty() ? 0 : taus_.size() - 1; }
  double horizon() const noexcept { return taus_.empty() ? 0.0 : taus_.back(); }
  double mesh() const noexcept { return mesh_; }
  double tau(std::size_t k) const { return taus_.at(k); }
  double width(std::size_t j) const { return taus_[j + 1] - taus_[j]; }
  const std::vector<double>& taus() const noexcept { return taus_; }

  /// Index of the largest mesh point <= t (t is clamped to [0, T]).
  std::size_t index_at(double t) const;

  /// True when t coincides with a mesh point; stores its index.
  bool is_mesh_point(double t, std::size_t& index) const;

  bool operator==(const Partition& other) const noexcept { return taus_ == other.taus_; }

 private:
  std::vector<double> taus_;
  double mesh_ = 0.0;
};

/// N increments xi_j in R^d and Xi_j in R^{d x d}, stored contiguously.
class IncrementStream {
 public:
  IncrementStream() = default;
  IncrementStream(std::size_t d, std::size_t count);

  std::size_t dim() const noexcept { return d_; }
  std::size_t count() const noexcept { return count_; }

  ConstVectorMap xi(std::size_t j) const {
    return ConstVectorMap(xi_.data() + j * d_, static_cast<Eigen::Index>(d_));
  }
  VectorMap xi(std::size_t j) {
    return VectorMap(xi_.data() + j * d_, static_cast<Eigen::Index>(d_));
  }
  ConstMatrixMap Xi(std::size_t j) const {
    const auto n = static_cast<Eigen::Index>(d_);
    return ConstMatrixMap(Xi_.data() + j * d_ * d_, n, n);
  }
  MatrixMap Xi(std::size_t j) {
    const auto n = static_cast<Eigen::Index>(d_);
    return MatrixMap(Xi_.data() + j * d_ * d_, n, n);
  }

  std::span<const double> xi_data() const noexcept { return xi_; }
  std::span<const double> Xi_data() const noexcept { return Xi_; }
  std::span<double> xi_data() noexcept { return xi_; }
  std::span<double> Xi_data() noexcept { return Xi_; }

  /// True when every Xi_j is exactly zero.
  bool level2_zero() const noexcept;

  /// Resizes without preserving contents.
  void reset(std::size_t d, std::size_t count);

 private:
  std::size_t d_ = 0;
  std::size_t count_ = 0;
  std::vector<double> xi_;
  std::vector<double> Xi_;
};

/// Ordering of the discrete iterated sum.
///   EarlierLater:  sum_{j<i} xi_j (x) xi_i  (left-point integral convention, default)
///   LaterEarlier:  sum_{j<i} xi_i (x) xi_j  (the transpose)
enum class Convention { EarlierLater, LaterEarlier };

Convention parse_convention(const std::string& name);
std::string to_string(Convention c);

/// Piecewise-constant level-2 path over a partition with prefix-summed values.
class RoughStepFunction {
 public:
  RoughStepFunction() = default;

  static RoughStepFunction build(Partition partition, IncrementStream increments,
                                 Convention convention = Convention::EarlierLater);

  const Partition& partition() const noexcept { return partition_; }
  const IncrementStream& increments() const noexcept { return increments_; }
  Convention convention() const noexcept { return convention_; }
  std::size_t dim() const noexcept { return increments_.dim(); }
  std::size_t count() const noexcept { return increments_.count(); }

  ConstVectorMap X(std::size_t k) const {
    return ConstVectorMap(prefixX_.data() + k * dim(), static_cast<Eigen::Index>(dim()));
  }
  ConstMatrixMap XX(std::size_t k) const {
    const auto n = static_cast<Eigen::Index>(dim());
    return ConstMatrixMap(prefixXX_.data() + k * dim() * dim(), n, n);
  }

  /// (X^n(t), XX^n(t)) with the cadlag piecewise-constant convention.
  TensorPair value(double t) const;

  /// Increment between mesh indices l <= k. A single cell returns (xi_l, Xi_l) verbatim.
  TensorPair increment_index(std::size_t l, std::size_t k) const;

  /// Increment over [s, t] evaluated at tau(s), tau(t).
  TensorPair increment(double s, double t) const;

  /// Writes the level-1 and level-2 increments between mesh indices into caller storage.
  void increment_into(std::size_t l, std::size_t k, std::span<double> a, std::span<double> M) const;

 private:
  Partition partition_;
  IncrementStream increments_;
  Convention convention_ = Convention::EarlierLater;
  std::vector<double> prefixX_;
  std::vector<double> prefixXX_;
};

/// Two-part discrete Hoelder quantity: max |X_jk| / |tau_k - tau_j|^gamma plus
/// max |XX_jk|^{1/2} / |tau_k - tau_j|^gamma over mesh pairs. Norms are
/// Euclidean for vectors and Frobenius for matrices.
struct HolderNorm {
  double level1 = 0.0;
  double level2 = 0.0;
  double value = 0.0;
  /// Set when a stride > 1 was used; the value is then a lower bound.
  bool lower_bound = false;
};

HolderNorm discrete_holder_parts(const RoughStepFunction& rsf, double gamma,
                                 std::size_t stride = 1);

/// Scalar form of discrete_holder_parts.
double discrete_holder_norm(const RoughStepFunction& rsf, double gamma, std::size_t stride = 1);

/// Increment-stream CSV: t_start, t_end, xi_1..xi_d, Xi_11..Xi_dd (header required).
void write_stream_csv(std::ostream& os, const Partition& partition, const IncrementStream& stream);
void write_stream_csv(const std::string& path, const Partition& partition,
                      const IncrementStream& stream);

struct StreamCsv {
  Partition partition;
  IncrementStream stream;
};

StreamCsv read_stream_csv(std::istream& is);
StreamCsv read_stream_csv(const std::string& path);

}  // namespace roughsim
