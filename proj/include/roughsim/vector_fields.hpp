#pragma once

#include "roughsim/types.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace roughsim {

/// V : R^e -> R^{e x d} with its Jacobian and an optional drift W : R^e -> R^e.
///
/// Evaluation callbacks write into caller-provided storage and must be
/// pure and re-entrant: ensembles call them from several workers at once.
struct VectorFieldBundle {
  /// Writes V(y) into `out` (e x d).
  using FieldFn = std::function<void(const ConstVectorRef& y, MatrixRef out)>;
  /// Writes dV_kappa^beta / dy_gamma into out[(kappa * d + beta) * e + gamma].
  using JacobianFn = std::function<void(const ConstVectorRef& y, std::span<double> out)>;
  /// Writes W(y) into `out` (length e).
  using DriftFn = std::function<void(const ConstVectorRef& y, VectorRef out)>;

  std::string name;
  std::size_t e = 0;
  std::size_t d = 0;
  FieldFn V;
  JacobianFn jacV;
  DriftFn W;
  /// Radius of the ball in which the field is treated as C^3_b.
  double trust_radius = 1e6;

  bool has_drift() const noexcept { return static_cast<bool>(W); }

  Matrix eval_V(const ConstVectorRef& y) const;
  std::vector<double> eval_jacobian(const ConstVectorRef& y) const;
};

/// The second-order field VV_kappa^{alpha beta}(y) = sum_gamma dV_kappa^beta/dy_gamma V_gamma^alpha.
class DerivedField {
 public:
  explicit DerivedField(const VectorFieldBundle& bundle);

  std::size_t e() const noexcept { return e_; }
  std::size_t d() const noexcept { return d_; }

  /// Writes VV into out[(kappa * d + alpha) * d + beta]; `scratch` needs e*d*e + e*d entries.
  void evaluate(const ConstVectorRef& y, std::span<double> out, std::span<double> scratch) const;

  /// One d x d matrix per output coordinate kappa.
  std::vector<Matrix> operator()(const ConstVectorRef& y) const;

  std::size_t scratch_size() const noexcept { return e_ * d_ * e_ + e_ * d_; }

 private:
  VectorFieldBundle bundle_;
  std::size_t e_;
  std::size_t d_;
};

DerivedField derived_field(const VectorFieldBundle& bundle);

/// A : B = trace(A B^T).
double contract(const ConstMatrixRef& A, const ConstMatrixRef& B);

struct JacobianCheck {
  std::vector<double> errors;  // per point max relative error
  double max_error = 0.0;
  bool pass = true;
  double tolerance = 1e-5;
};

/// Compares jacV against central differences (step 1e-5 scaled by |y|).
JacobianCheck validate_jacobian(const VectorFieldBundle& bundle,
                                const std::vector<Vector>& points, double tolerance = 1e-5);

/// Field factories keyed by name; parameters come from the experiment config.
class FieldRegistry {
 public:
  using Factory = std::function<VectorFieldBundle(const nlohmann::json& params)>;

  static FieldRegistry& instance();

  void add(const std::string& name, std::string description, Factory factory);
  VectorFieldBundle make(const std::string& name, const nlohmann::json& params = {}) const;
  bool contains(const std::string& name) const;
  std::vector<std::pair<std::string, std::string>> list() const;

 private:
  FieldRegistry();
  struct Entry {
    std::string description;
    Factory factory;
  };
  std::map<std::string, Entry> entries_;
};

/// Scalar state driven by d noises: V(y) = y * sigma^T (e = 1).
VectorFieldBundle linear_field(std::vector<double> sigma);

/// Column-wise affine field: V^beta(y) = B_beta y + c_beta.
VectorFieldBundle affine_field(std::vector<Matrix> B, Matrix c);

/// Constant (additive noise) field.
VectorFieldBundle constant_field(Matrix c);

/// e = 1, d = 2: V(y) = sigma (sin y, cos y).
VectorFieldBundle sincos_field(double sigma);

/// e = d = 2 bounded smooth field
///   V(y) = sigma [[sin y2, cos y1], [cos y2, -sin y1]].
VectorFieldBundle trig2_field(double sigma);

/// Adds W(y) = c + L y to a bundle.
void set_affine_drift(VectorFieldBundle& bundle, Vector c, Matrix L);

}  // namespace roughsim
