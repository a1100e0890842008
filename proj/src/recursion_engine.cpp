#include "roughsim/recursion_engine.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace roughsim {

RemainderRule::RemainderRule(Fn fn, double c, double lambda) : fn_(std::move(fn)), c_(c), lambda_(lambda) {
  if (!fn_) throw InvalidArgument("RemainderRule: callback required");
  if (!(lambda_ > 1.0)) throw InvalidArgument("RemainderRule: lambda must exceed 1");
  if (!(c_ >= 0.0)) throw InvalidArgument("RemainderRule: c must be non-negative");
}

double RemainderRule::bound(double mesh) const { return c_ * std::pow(mesh, lambda_); }

DavieStepper::DavieStepper(const VectorFieldBundle& bundle)
    : bundle_(bundle),
      derived_(bundle),
      V_(static_cast<Eigen::Index>(bundle.e), static_cast<Eigen::Index>(bundle.d)),
      vv_(bundle.e * bundle.d * bundle.d),
      scratch_(derived_.scratch_size()),
      drift_(static_cast<Eigen::Index>(bundle.e)),
      delta_(static_cast<Eigen::Index>(bundle.e)) {}

void DavieStepper::apply(VectorRef y, const double* xi, const double* Xi, double dt,
                         const double* remainder) {
  const std::size_t e = bundle_.e;
  const std::size_t d = bundle_.d;
  bundle_.V(y, V_);
  for (std::size_t k = 0; k < e; ++k) {
    double acc = 0.0;
    for (std::size_t b = 0; b < d; ++b) acc += V_(k, b) * xi[b];
    delta_(k) = acc;
  }
  if (Xi != nullptr) {
    derived_.evaluate(y, vv_, scratch_);
    for (std::size_t k = 0; k < e; ++k) {
      double acc = 0.0;
      const double* vk = vv_.data() + k * d * d;
      for (std::size_t ab = 0; ab < d * d; ++ab) acc += vk[ab] * Xi[ab];
      delta_(k) += acc;
    }
  }
  if (bundle_.W) {
    bundle_.W(y, drift_);
    for (std::size_t k = 0; k < e; ++k) delta_(k) += drift_(k) * dt;
  }
  if (remainder != nullptr) {
    for (std::size_t k = 0; k < e; ++k) delta_(k) += remainder[k];
  }
  for (std::size_t k = 0; k < e; ++k) y(k) += delta_(k);
}

namespace {

bool block_is_zero(const double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] != 0.0) return false;
  }
  return true;
}

void check_dims(const VectorFieldBundle& bundle, const IncrementStream& stream, const Vector& y0) {
  if (stream.dim() != bundle.d) {
    throw InvalidArgument("run: noise dimension " + std::to_string(stream.dim()) +
                          " does not match field dimension d = " + std::to_string(bundle.d));
  }
  if (static_cast<std::size_t>(y0.size()) != bundle.e) {
    throw InvalidArgument("run: initial condition must have length e = " + std::to_string(bundle.e));
  }
}

void check_finite(const ConstVectorRef& y, std::size_t step) {
  if (!y.allFinite()) {
    throw IterateExplosion("iterate became non-finite at step " + std::to_string(step), step);
  }
}

}  // namespace

Trajectory run_stream(const VectorFieldBundle& bundle, const Partition& partition,
                      const IncrementStream& stream, const Vector& y0, const RemainderRule* remainder) {
  check_dims(bundle, stream, y0);
  if (partition.count() != stream.count()) throw InvalidArgument("run: partition/stream length mismatch");
  const std::size_t e = bundle.e;
  const std::size_t d = bundle.d;
  const std::size_t N = stream.count();

  Trajectory traj;
  traj.partition = partition;
  traj.e = e;
  traj.values.resize((N + 1) * e);
  traj.meta.scheme = "recursion";

  DavieStepper stepper(bundle);
  Vector y = y0;
  Vector r = Vector::Zero(static_cast<Eigen::Index>(e));
  const double r_bound = remainder ? remainder->bound(partition.mesh()) : 0.0;
  std::copy(y.data(), y.data() + e, traj.values.begin());
  traj.meta.left_trust_region = y.norm() > bundle.trust_radius;

  const double* xi = stream.xi_data().data();
  const double* Xi = stream.Xi_data().data();
  for (std::size_t j = 0; j < N; ++j) {
    const double* Xj = Xi + j * d * d;
    const double* rj = nullptr;
    if (remainder) {
      (*remainder)(j, y, partition.width(j), r);
      if (!r.allFinite() || r.norm() > r_bound * (1.0 + 1e-12)) {
        throw RemainderBoundViolation("remainder exceeds its declared bound at step " + std::to_string(j), j);
      }
      rj = r.data();
    }
    stepper.apply(y, xi + j * d, block_is_zero(Xj, d * d) ? nullptr : Xj, partition.width(j), rj);
    check_finite(y, j);
    if (y.norm() > bundle.trust_radius) traj.meta.left_trust_region = true;
    std::copy(y.data(), y.data() + e, traj.values.begin() + (j + 1) * e);
  }
  return traj;
}

Trajectory run(const VectorFieldBundle& bundle, const RoughStepFunction& rsf, const Vector& y0,
               const RemainderRule* remainder) {
  return run_stream(bundle, rsf.partition(), rsf.increments(), y0, remainder);
}

Vector run_terminal(DavieStepper& stepper, const Partition& partition, const IncrementStream& stream,
                    const Vector& y0) {
  const auto& bundle = stepper.bundle();
  check_dims(bundle, stream, y0);
  const std::size_t d = bundle.d;
  Vector y = y0;
  const double* xi = stream.xi_data().data();
  const double* Xi = stream.Xi_data().data();
  const bool skip_level2 = stream.level2_zero();
  for (std::size_t j = 0; j < stream.count(); ++j) {
    const double* Xj = Xi + j * d * d;
    stepper.apply(y, xi + j * d, (skip_level2 || block_is_zero(Xj, d * d)) ? nullptr : Xj,
                  partition.width(j), nullptr);
  }
  check_finite(y, stream.count());
  return y;
}

void apply_theta_rule(IncrementStream& stream, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw InvalidArgument("theta must lie in [0, 1]");
  const auto w = 1.0 - theta;
  for (std::size_t j = 0; j < stream.count(); ++j) {
    const Vector x = stream.xi(j);
    stream.Xi(j) = w * (x * x.transpose());
  }
}

Trajectory run_theta_scheme(const VectorFieldBundle& bundle, const Partition& partition,
                            const IncrementStream& xis, double theta, const Vector& y0) {
  IncrementStream stream = xis;
  apply_theta_rule(stream, theta);
  auto traj = run_stream(bundle, partition, stream, y0);
  traj.meta.scheme = "theta=" + std::to_string(theta);
  return traj;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t";
  for (std::size_t i = 0; i < traj.e; ++i) os << ",y_" << (i + 1);
  os << '\n' << std::setprecision(17);
  for (std::size_t j = 0; j < traj.size(); ++j) {
    os << traj.partition.tau(j);
    const auto y = traj.value(j);
    for (std::size_t i = 0; i < traj.e; ++i) os << ',' << y(i);
    os << '\n';
  }
}

}  // namespace roughsim
