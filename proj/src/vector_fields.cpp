#include "roughsim/vector_fields.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace roughsim {

using nlohmann::json;

Matrix VectorFieldBundle::eval_V(const ConstVectorRef& y) const {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(d));
  V(y, out);
  return out;
}

std::vector<double> VectorFieldBundle::eval_jacobian(const ConstVectorRef& y) const {
  std::vector<double> out(e * d * e, 0.0);
  jacV(y, out);
  return out;
}

DerivedField::DerivedField(const VectorFieldBundle& bundle)
    : bundle_(bundle), e_(bundle.e), d_(bundle.d) {
  if (!bundle_.V || !bundle_.jacV) throw InvalidArgument("derived_field: V and jacV are required");
  if (e_ == 0 || d_ == 0) throw InvalidArgument("derived_field: dimensions must be positive");
}

void DerivedField::evaluate(const ConstVectorRef& y, std::span<double> out,
                            std::span<double> scratch) const {
  if (static_cast<std::size_t>(y.size()) != e_) throw InvalidArgument("derived_field: state dimension mismatch");
  if (out.size() < e_ * d_ * d_ || scratch.size() < scratch_size()) {
    throw InvalidArgument("derived_field: output storage too small");
  }
  const std::span<double> jac = scratch.subspan(0, e_ * d_ * e_);
  double* vdata = scratch.data() + e_ * d_ * e_;
  MatrixMap v(vdata, static_cast<Eigen::Index>(e_), static_cast<Eigen::Index>(d_));
  bundle_.V(y, v);
  bundle_.jacV(y, jac);
  for (std::size_t k = 0; k < e_; ++k) {
    for (std::size_t a = 0; a < d_; ++a) {
      for (std::size_t b = 0; b < d_; ++b) {
        double acc = 0.0;
        const double* grad = jac.data() + (k * d_ + b) * e_;
        for (std::size_t g = 0; g < e_; ++g) acc += grad[g] * vdata[g * d_ + a];
        out[(k * d_ + a) * d_ + b] = acc;
      }
    }
  }
}

std::vector<Matrix> DerivedField::operator()(const ConstVectorRef& y) const {
  std::vector<double> flat(e_ * d_ * d_), scratch(scratch_size());
  evaluate(y, flat, scratch);
  std::vector<Matrix> out;
  out.reserve(e_);
  const auto n = static_cast<Eigen::Index>(d_);
  for (std::size_t k = 0; k < e_; ++k) out.emplace_back(ConstMatrixMap(flat.data() + k * d_ * d_, n, n));
  return out;
}

DerivedField derived_field(const VectorFieldBundle& bundle) { return DerivedField(bundle); }

double contract(const ConstMatrixRef& A, const ConstMatrixRef& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw InvalidArgument("contract: shape mismatch");
  return A.cwiseProduct(B).sum();
}

JacobianCheck validate_jacobian(const VectorFieldBundle& bundle, const std::vector<Vector>& points,
                                double tolerance) {
  JacobianCheck report;
  report.tolerance = tolerance;
  const std::size_t e = bundle.e;
  const std::size_t d = bundle.d;
  Matrix plus(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(d));
  Matrix minus(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(d));
  for (const auto& y : points) {
    if (static_cast<std::size_t>(y.size()) != e) throw InvalidArgument("validate_jacobian: point dimension mismatch");
    const auto jac = bundle.eval_jacobian(y);
    double scale = 1.0;
    for (double v : jac) scale = std::max(scale, std::abs(v));
    double worst = 0.0;
    for (std::size_t g = 0; g < e; ++g) {
      const double h = 1e-5 * std::max(1.0, std::abs(y(g)));
      Vector yp = y;
      Vector ym = y;
      yp(g) += h;
      ym(g) -= h;
      bundle.V(yp, plus);
      bundle.V(ym, minus);
      for (std::size_t k = 0; k < e; ++k) {
        for (std::size_t b = 0; b < d; ++b) {
          const double fd = (plus(k, b) - minus(k, b)) / (yp(g) - ym(g));
          worst = std::max(worst, std::abs(fd - jac[(k * d + b) * e + g]) / scale);
        }
      }
    }
    report.errors.push_back(worst);
    report.max_error = std::max(report.max_error, worst);
    if (!(worst <= tolerance)) report.pass = false;
  }
  return report;
}

VectorFieldBundle linear_field(std::vector<double> sigma) {
  if (sigma.empty()) throw InvalidArgument("linear field: sigma must be non-empty");
  VectorFieldBundle b;
  b.name = "linear";
  b.e = 1;
  b.d = sigma.size();
  b.V = [sigma](const ConstVectorRef& y, MatrixRef out) {
    for (std::size_t j = 0; j < sigma.size(); ++j) out(0, j) = sigma[j] * y(0);
  };
  b.jacV = [sigma](const ConstVectorRef&, std::span<double> out) {
    for (std::size_t j = 0; j < sigma.size(); ++j) out[j] = sigma[j];
  };
  return b;
}

VectorFieldBundle affine_field(std::vector<Matrix> B, Matrix c) {
  const std::size_t d = B.size();
  if (d == 0) throw InvalidArgument("affine field: need one matrix per noise coordinate");
  const std::size_t e = static_cast<std::size_t>(B.front().rows());
  for (const auto& m : B) {
    if (static_cast<std::size_t>(m.rows()) != e || static_cast<std::size_t>(m.cols()) != e) {
      throw InvalidArgument("affine field: every B_beta must be e x e");
    }
  }
  if (c.size() == 0) c = Matrix::Zero(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(d));
  if (static_cast<std::size_t>(c.rows()) != e || static_cast<std::size_t>(c.cols()) != d) {
    throw InvalidArgument("affine field: c must be e x d");
  }
  VectorFieldBundle b;
  b.name = "affine";
  b.e = e;
  b.d = d;
  b.V = [B, c](const ConstVectorRef& y, MatrixRef out) {
    for (std::size_t beta = 0; beta < B.size(); ++beta) {
      out.col(static_cast<Eigen::Index>(beta)) = B[beta] * y + c.col(static_cast<Eigen::Index>(beta));
    }
  };
  b.jacV = [B, e, d](const ConstVectorRef&, std::span<double> out) {
    for (std::size_t k = 0; k < e; ++k) {
      for (std::size_t beta = 0; beta < d; ++beta) {
        for (std::size_t g = 0; g < e; ++g) out[(k * d + beta) * e + g] = B[beta](k, g);
      }
    }
  };
  return b;
}

VectorFieldBundle constant_field(Matrix c) {
  if (c.size() == 0) throw InvalidArgument("constant field: c must be non-empty");
  VectorFieldBundle b;
  b.name = "constant";
  b.e = static_cast<std::size_t>(c.rows());
  b.d = static_cast<std::size_t>(c.cols());
  b.V = [c](const ConstVectorRef&, MatrixRef out) { out = c; };
  b.jacV = [](const ConstVectorRef&, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
  return b;
}

VectorFieldBundle sincos_field(double sigma) {
  VectorFieldBundle b;
  b.name = "sincos";
  b.e = 1;
  b.d = 2;
  b.V = [sigma](const ConstVectorRef& y, MatrixRef out) {
    out(0, 0) = sigma * std::sin(y(0));
    out(0, 1) = sigma * std::cos(y(0));
  };
  b.jacV = [sigma](const ConstVectorRef& y, std::span<double> out) {
    out[0] = sigma * std::cos(y(0));
    out[1] = -sigma * std::sin(y(0));
  };
  return b;
}

VectorFieldBundle trig2_field(double sigma) {
  VectorFieldBundle b;
  b.name = "trig2";
  b.e = 2;
  b.d = 2;
  b.V = [sigma](const ConstVectorRef& y, MatrixRef out) {
    out(0, 0) = sigma * std::sin(y(1));
    out(0, 1) = sigma * std::cos(y(0));
    out(1, 0) = sigma * std::cos(y(1));
    out(1, 1) = -sigma * std::sin(y(0));
  };
  // Layout: (kappa * d + beta) * e + gamma.
  b.jacV = [sigma](const ConstVectorRef& y, std::span<double> out) {
    out[0] = 0.0;
    out[1] = sigma * std::cos(y(1));
    out[2] = -sigma * std::sin(y(0));
    out[3] = 0.0;
    out[4] = 0.0;
    out[5] = -sigma * std::sin(y(1));
    out[6] = -sigma * std::cos(y(0));
    out[7] = 0.0;
  };
  return b;
}

void set_affine_drift(VectorFieldBundle& bundle, Vector c, Matrix L) {
  const auto e = static_cast<Eigen::Index>(bundle.e);
  if (c.size() == 0) c = Vector::Zero(e);
  if (L.size() == 0) L = Matrix::Zero(e, e);
  if (c.size() != e || L.rows() != e || L.cols() != e) {
    throw InvalidArgument("drift: constant must have length e and linear part must be e x e");
  }
  bundle.W = [c, L](const ConstVectorRef& y, VectorRef out) { out = c + L * y; };
}

namespace {

void reject_unknown(const json& params, const std::set<std::string>& allowed, const std::string& where) {
  if (params.is_null()) return;
  if (!params.is_object()) throw InvalidArgument(where + ": parameters must be an object");
  for (const auto& [key, value] : params.items()) {
    if (!allowed.count(key)) throw InvalidArgument(where + "." + key + ": unknown parameter");
  }
}

Matrix matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw InvalidArgument(where + ": expected a nested array");
  }
  const auto rows = j.size();
  const auto cols = j.front().size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw InvalidArgument(where + ": ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

double number_or(const json& params, const char* key, double fallback) {
  if (params.is_object() && params.contains(key)) return params.at(key).get<double>();
  return fallback;
}

void apply_common(VectorFieldBundle& b, const json& params, const std::string& where) {
  if (!params.is_object()) return;
  if (params.contains("trust_radius")) b.trust_radius = params.at("trust_radius").get<double>();
  if (params.contains("drift")) {
    const auto& dj = params.at("drift");
    reject_unknown(dj, {"constant", "linear"}, where + ".drift");
    Vector c;
    Matrix L;
    if (dj.contains("constant")) {
      const auto v = dj.at("constant").get<std::vector<double>>();
      c = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    if (dj.contains("linear")) L = matrix_from_json(dj.at("linear"), where + ".drift.linear");
    set_affine_drift(b, c, L);
  }
}

}  // namespace

FieldRegistry& FieldRegistry::instance() {
  static FieldRegistry registry;
  return registry;
}

FieldRegistry::FieldRegistry() {
  add("linear", "scalar linear field V(y) = y sigma^T (sigma scalar or per noise coordinate)",
      [](const json& p) {
        reject_unknown(p, {"sigma", "drift", "trust_radius"}, "field.params");
        std::vector<double> sigma{1.0};
        if (p.is_object() && p.contains("sigma")) {
          const auto& s = p.at("sigma");
          sigma = s.is_array() ? s.get<std::vector<double>>() : std::vector<double>{s.get<double>()};
        }
        auto b = linear_field(sigma);
        apply_common(b, p, "field.params");
        return b;
      });
  add("affine", "column-wise affine field V^beta(y) = B_beta y + c_beta", [](const json& p) {
    reject_unknown(p, {"B", "c", "drift", "trust_radius"}, "field.params");
    if (!p.is_object() || !p.contains("B")) throw InvalidArgument("field.params.B: required");
    std::vector<Matrix> B;
    for (std::size_t i = 0; i < p.at("B").size(); ++i) {
      B.push_back(matrix_from_json(p.at("B")[i], "field.params.B[" + std::to_string(i) + "]"));
    }
    Matrix c;
    if (p.contains("c")) c = matrix_from_json(p.at("c"), "field.params.c");
    auto b = affine_field(std::move(B), std::move(c));
    apply_common(b, p, "field.params");
    return b;
  });
  add("constant", "additive noise V(y) = c", [](const json& p) {
    reject_unknown(p, {"c", "drift", "trust_radius"}, "field.params");
    if (!p.is_object() || !p.contains("c")) throw InvalidArgument("field.params.c: required");
    auto b = constant_field(matrix_from_json(p.at("c"), "field.params.c"));
    apply_common(b, p, "field.params");
    return b;
  });
  add("sincos", "bounded field V(y) = sigma (sin y, cos y), e = 1, d = 2", [](const json& p) {
    reject_unknown(p, {"sigma", "drift", "trust_radius"}, "field.params");
    auto b = sincos_field(number_or(p, "sigma", 1.0));
    apply_common(b, p, "field.params");
    return b;
  });
  add("trig2", "bounded non-commuting field on R^2 driven by 2 noises", [](const json& p) {
    reject_unknown(p, {"sigma", "drift", "trust_radius"}, "field.params");
    auto b = trig2_field(number_or(p, "sigma", 1.0));
    apply_common(b, p, "field.params");
    return b;
  });
}

void FieldRegistry::add(const std::string& name, std::string description, Factory factory) {
  entries_[name] = Entry{std::move(description), std::move(factory)};
}

VectorFieldBundle FieldRegistry::make(const std::string& name, const json& params) const {
  const auto it = entries_.find(name);
  if (it == entries_.end()) throw InvalidArgument("field.name: unknown field '" + name + "'");
  return it->second.factory(params);
}

bool FieldRegistry::contains(const std::string& name) const { return entries_.count(name) > 0; }

std::vector<std::pair<std::string, std::string>> FieldRegistry::list() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, entry] : entries_) out.emplace_back(name, entry.description);
  return out;
}

}  // namespace roughsim
