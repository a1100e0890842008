#pragma once

// The discrete rough path recursion
//   Y_{j+1} = Y_j + V(Y_j) xi_j + sum_kappa e_kappa (VV_kappa(Y_j) : Xi_j)
//             [+ W(Y_j)(tau_{j+1} - tau_j)] [+ r_j].

#include "roughsim/rough_step.hpp"
#include "roughsim/vector_fields.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace roughsim {

struct TrajectoryMeta {
  std::uint64_t master_seed = 0;
  std::uint64_t path_id = 0;
  std::string scheme;
  /// Set when some iterate left the bundle's trust region.
  bool left_trust_region = false;
};

/// Values Y_0..Y_N on a partition, read piecewise constant in time.
struct Trajectory {
  Partition partition;
  std::size_t e = 0;
  std::vector<double> values;
  TrajectoryMeta meta;

  std::size_t size() const noexcept { return e == 0 ? 0 : values.size() / e; }
  ConstVectorMap value(std::size_t j) const {
    return ConstVectorMap(values.data() + j * e, static_cast<Eigen::Index>(e));
  }
  /// Y(t) = Y_j with tau_j the largest mesh point <= t.
  Vector at(double t) const { return value(partition.index_at(t)); }
  Vector terminal() const { return value(size() - 1); }
};

/// Injected remainder r_j with declared bound |r_j| <= c * mesh^lambda, lambda > 1.
class RemainderRule {
 public:
  using Fn = std::function<void(std::size_t step, const ConstVectorRef& y, double dt, VectorRef out)>;

  RemainderRule(Fn fn, double c, double lambda);

  void operator()(std::size_t step, const ConstVectorRef& y, double dt, VectorRef out) const {
    fn_(step, y, dt, out);
  }
  double bound(double mesh) const;
  double c() const noexcept { return c_; }
  double lambda() const noexcept { return lambda_; }

 private:
  Fn fn_;
  double c_;
  double lambda_;
};

/// One update Y <- Y + V(Y) xi + VV(Y) : Xi + W(Y) dt + r, with preallocated
/// workspace. Shared by the recursion and the Davie RDE solver so that both
/// perform identical floating-point operations.
class DavieStepper {
 public:
  explicit DavieStepper(const VectorFieldBundle& bundle);

  /// `Xi` may be null (treated as zero); `remainder` may be null.
  void apply(VectorRef y, const double* xi, const double* Xi, double dt, const double* remainder);

  const VectorFieldBundle& bundle() const noexcept { return bundle_; }

 private:
  VectorFieldBundle bundle_;
  DerivedField derived_;
  Matrix V_;
  std::vector<double> vv_;
  std::vector<double> scratch_;
  Vector drift_;
  Vector delta_;
};

/// Runs the recursion driven by the increments of `rsf`.
Trajectory run(const VectorFieldBundle& bundle, const RoughStepFunction& rsf, const Vector& y0,
               const RemainderRule* remainder = nullptr);

/// Same as run() but reads the increments directly.
Trajectory run_stream(const VectorFieldBundle& bundle, const Partition& partition,
                      const IncrementStream& stream, const Vector& y0,
                      const RemainderRule* remainder = nullptr);

/// Terminal-only variant for large ensembles; `stepper` is reused across paths.
Vector run_terminal(DavieStepper& stepper, const Partition& partition,
                    const IncrementStream& stream, const Vector& y0);

/// Semi-implicit theta scheme in explicit Taylor form: Xi_k = (1 - theta) xi_k (x) xi_k.
/// The level-2 part of `xis` is ignored.
Trajectory run_theta_scheme(const VectorFieldBundle& bundle, const Partition& partition,
                            const IncrementStream& xis, double theta, const Vector& y0);

/// Rewrites every Xi_k as (1 - theta) xi_k (x) xi_k.
void apply_theta_rule(IncrementStream& stream, double theta);

/// CSV "t,y_1..y_e".
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace roughsim
