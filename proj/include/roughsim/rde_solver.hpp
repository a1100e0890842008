#pragma once

// Davie-step RDE solver on lifted paths, the modified equation, and the
// recursion-vs-modified-equation certificate.

#include "roughsim/lift.hpp"
#include "roughsim/recursion_engine.hpp"

#include <json.hpp>

namespace roughsim {

struct RdeConfig {
  std::size_t substeps_per_cell = 1;
  double gamma = 0.45;
};

/// Davie steps Y <- Y + V(Y) X(s,t) + VV(Y) : XX(s,t) over `substeps_per_cell`
/// equal pieces of every cell; values are reported at mesh points.
Trajectory solve_rde(const VectorFieldBundle& bundle, const LiftedRoughPath& lrp, const Vector& y0,
                     const RdeConfig& cfg = {});

/// Samples of a continuous solution at mesh points and piece boundaries.
struct DenseSamples {
  std::vector<double> times;
  std::vector<double> values;  // row-major, e per sample
};

/// Integrates y' = V(y) dX/dt + VV(y) : dZ/dt (+ W(y)) with classical RK4,
/// `odesteps_per_piece` steps on every straight piece of the lift.
Trajectory solve_modified_equation(const VectorFieldBundle& bundle, const LiftedRoughPath& lrp,
                                   const Vector& y0, std::size_t odesteps_per_piece,
                                   DenseSamples* dense = nullptr);

struct ApproxReport {
  double sup_error = 0.0;
  /// (1 ^ C_n^4) * mesh^(3 gamma - 1).
  double K_bound = 0.0;
  /// (1 ^ C_n^3) * mesh^(3 gamma - 1), reported alongside.
  double K_bound_c3 = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
  double C_n = 0.0;
  double c_cal = 1.0;
  bool pass = false;

  nlohmann::json to_json() const;
};

ApproxReport certify_approximation(const Trajectory& recursion, const Trajectory& modified, double gamma,
                                   double C_n, double c_cal = 1.0);

}  // namespace roughsim
