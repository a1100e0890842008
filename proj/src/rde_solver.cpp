#include "roughsim/rde_solver.hpp"

#include <algorithm>
#include <cmath>

namespace roughsim {

namespace {

bool all_zero(const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (m.data()[i] != 0.0) return false;
  }
  return true;
}

void check_inputs(const VectorFieldBundle& bundle, const LiftedRoughPath& lrp, const Vector& y0) {
  if (lrp.dim() != bundle.d) throw InvalidArgument("solver: path dimension does not match field d");
  if (static_cast<std::size_t>(y0.size()) != bundle.e) {
    throw InvalidArgument("solver: initial condition must have length e");
  }
}

}  // namespace

Trajectory solve_rde(const VectorFieldBundle& bundle, const LiftedRoughPath& lrp, const Vector& y0,
                     const RdeConfig& cfg) {
  if (cfg.substeps_per_cell < 1) throw InvalidArgument("solve_rde: substeps_per_cell must be >= 1");
  check_inputs(bundle, lrp, y0);
  const auto& part = lrp.base().partition();
  const std::size_t N = part.count();
  const std::size_t e = bundle.e;
  const std::size_t k = cfg.substeps_per_cell;

  Trajectory traj;
  traj.partition = part;
  traj.e = e;
  traj.values.resize((N + 1) * e);
  traj.meta.scheme = "davie/" + std::to_string(k);

  DavieStepper stepper(bundle);
  Vector y = y0;
  std::copy(y.data(), y.data() + e, traj.values.begin());
  traj.meta.left_trust_region = y.norm() > bundle.trust_radius;

  for (std::size_t j = 0; j < N; ++j) {
    if (k == 1) {
      const auto& inc = lrp.cell(j).increment;
      stepper.apply(y, inc.a.data(), all_zero(inc.M) ? nullptr : inc.M.data(), part.width(j), nullptr);
    } else {
      const double t0 = part.tau(j);
      const double w = part.width(j);
      const double dt = w / static_cast<double>(k);
      double s = t0;
      for (std::size_t i = 0; i < k; ++i) {
        const double t = i + 1 == k ? part.tau(j + 1) : t0 + w * static_cast<double>(i + 1) / static_cast<double>(k);
        const TensorPair inc = lrp.eval_in_cell(j, s, t);
        stepper.apply(y, inc.a.data(), all_zero(inc.M) ? nullptr : inc.M.data(), dt, nullptr);
        s = t;
      }
    }
    if (!y.allFinite()) throw IterateExplosion("solve_rde: non-finite iterate at cell " + std::to_string(j), j);
    if (y.norm() > bundle.trust_radius) traj.meta.left_trust_region = true;
    std::copy(y.data(), y.data() + e, traj.values.begin() + (j + 1) * e);
  }
  return traj;
}

namespace {

// Right-hand side V(y) u + VV(y) : Zdot + W(y) with preallocated buffers.
class ModifiedRhs {
 public:
  explicit ModifiedRhs(const VectorFieldBundle& bundle)
      : bundle_(bundle),
        derived_(bundle),
        V_(static_cast<Eigen::Index>(bundle.e), static_cast<Eigen::Index>(bundle.d)),
        vv_(bundle.e * bundle.d * bundle.d),
        scratch_(derived_.scratch_size()),
        drift_(static_cast<Eigen::Index>(bundle.e)) {}

  void operator()(const Vector& y, const Vector& velocity, const Matrix* zdot, Vector& out) {
    const std::size_t e = bundle_.e;
    const std::size_t d = bundle_.d;
    bundle_.V(y, V_);
    out.noalias() = V_ * velocity;
    if (zdot != nullptr) {
      derived_.evaluate(y, vv_, scratch_);
      const double* z = zdot->data();
      for (std::size_t k = 0; k < e; ++k) {
        double acc = 0.0;
        const double* vk = vv_.data() + k * d * d;
        for (std::size_t ab = 0; ab < d * d; ++ab) acc += vk[ab] * z[ab];
        out(k) += acc;
      }
    }
    if (bundle_.W) {
      bundle_.W(y, drift_);
      out += drift_;
    }
  }

 private:
  const VectorFieldBundle& bundle_;
  DerivedField derived_;
  Matrix V_;
  std::vector<double> vv_;
  std::vector<double> scratch_;
  Vector drift_;
};

}  // namespace

Trajectory solve_modified_equation(const VectorFieldBundle& bundle, const LiftedRoughPath& lrp,
                                   const Vector& y0, std::size_t odesteps_per_piece, DenseSamples* dense) {
  if (odesteps_per_piece < 1) throw InvalidArgument("solve_modified_equation: odesteps_per_piece must be >= 1");
  check_inputs(bundle, lrp, y0);
  const auto& part = lrp.base().partition();
  const std::size_t N = part.count();
  const std::size_t e = bundle.e;
  const std::size_t d = bundle.d;
  const auto ee = static_cast<Eigen::Index>(e);

  Trajectory traj;
  traj.partition = part;
  traj.e = e;
  traj.values.resize((N + 1) * e);
  traj.meta.scheme = "modified/rk4/" + std::to_string(odesteps_per_piece);

  ModifiedRhs rhs(bundle);
  Vector y = y0;
  Vector k1(ee), k2(ee), k3(ee), k4(ee), tmp(ee);
  Vector velocity(static_cast<Eigen::Index>(d));
  Matrix zdot;
  auto record = [&](double t) {
    if (!dense) return;
    dense->times.push_back(t);
    dense->values.insert(dense->values.end(), y.data(), y.data() + e);
  };

  std::copy(y.data(), y.data() + e, traj.values.begin());
  traj.meta.left_trust_region = y.norm() > bundle.trust_radius;
  record(0.0);

  auto integrate = [&](double duration, const Vector& vel, const Matrix* zd) {
    const double h = duration / static_cast<double>(odesteps_per_piece);
    for (std::size_t s = 0; s < odesteps_per_piece; ++s) {
      rhs(y, vel, zd, k1);
      tmp = y + 0.5 * h * k1;
      rhs(tmp, vel, zd, k2);
      tmp = y + 0.5 * h * k2;
      rhs(tmp, vel, zd, k3);
      tmp = y + h * k3;
      rhs(tmp, vel, zd, k4);
      y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  };

  for (std::size_t j = 0; j < N; ++j) {
    const auto& cell = lrp.cell(j);
    const double w = cell.width();
    zdot = cell.defect.matrix() / w;
    const Matrix* zd = all_zero(zdot) ? nullptr : &zdot;
    if (cell.segments.empty()) {
      velocity.setZero();
      if (zd != nullptr || bundle.W) integrate(w, velocity, zd);
    } else {
      double t_prev = cell.t0;
      for (std::size_t i = 0; i < cell.segments.size(); ++i) {
        const double t_end = i + 1 == cell.segments.size() ? cell.t1 : cell.segment_end_time(i);
        const double duration = t_end - t_prev;
        if (duration > 0.0) {
          velocity = cell.segments[i] / duration;
          integrate(duration, velocity, zd);
        }
        t_prev = t_end;
        if (i + 1 < cell.segments.size()) record(t_end);
      }
    }
    if (!y.allFinite()) {
      throw IterateExplosion("solve_modified_equation: non-finite iterate at cell " + std::to_string(j), j);
    }
    if (y.norm() > bundle.trust_radius) traj.meta.left_trust_region = true;
    std::copy(y.data(), y.data() + e, traj.values.begin() + (j + 1) * e);
    record(cell.t1);
  }
  return traj;
}

nlohmann::json ApproxReport::to_json() const {
  return {{"sup_error", sup_error}, {"K_bound", K_bound}, {"K_bound_c3", K_bound_c3},
          {"gamma", gamma},         {"delta", delta},     {"C_n", C_n},
          {"c_cal", c_cal},         {"pass", pass}};
}

ApproxReport certify_approximation(const Trajectory& recursion, const Trajectory& modified, double gamma,
                                   double C_n, double c_cal) {
  if (!(recursion.partition == modified.partition) || recursion.e != modified.e) {
    throw InvalidArgument("certify_approximation: trajectories are on different partitions");
  }
  ApproxReport r;
  r.gamma = gamma;
  r.C_n = C_n;
  r.c_cal = c_cal;
  r.delta = recursion.partition.mesh();
  for (std::size_t j = 0; j < recursion.size(); ++j) {
    r.sup_error = std::max(r.sup_error, (recursion.value(j) - modified.value(j)).norm());
  }
  const double rate = std::pow(r.delta, 3.0 * gamma - 1.0);
  r.K_bound = std::min(1.0, std::pow(C_n, 4)) * rate;
  r.K_bound_c3 = std::min(1.0, std::pow(C_n, 3)) * rate;
  r.pass = r.sup_error <= c_cal * r.K_bound;
  return r;
}

}  // namespace roughsim
