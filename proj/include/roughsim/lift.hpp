#pragma once

// Continuous rough path agreeing with a rough step function on the mesh.
//
// Each cell increment (xi_j, Xi_j) is split into a group part g_j and a
// symmetric defect z_j. The group part is realized by a constant-speed
// polyline (the segment a_j followed by one square loop per coordinate
// plane carrying area), and z_j is spread linearly in time across the cell.

#include "roughsim/rough_step.hpp"
#include "roughsim/tensor_algebra.hpp"

#include <iosfwd>
#include <memory>
#include <vector>

namespace roughsim {

struct CellRealization {
  std::size_t index = 0;
  double t0 = 0.0;
  double t1 = 0.0;
  /// Segment displacements, traversed in order at constant speed.
  std::vector<Vector> segments;
  /// Cumulative arc length at the end of each segment.
  std::vector<double> arc_end;
  double length = 0.0;
  SymmetricDefect defect;
  /// The cell's original increment (xi_j, Xi_j), kept verbatim.
  TensorPair increment;

  double width() const noexcept { return t1 - t0; }

  /// Time at which segment `i` ends.
  double segment_end_time(std::size_t i) const;
};

class LiftedRoughPath {
 public:
  LiftedRoughPath() = default;

  /// Requires the EarlierLater convention.
  explicit LiftedRoughPath(std::shared_ptr<const RoughStepFunction> base);

  const RoughStepFunction& base() const noexcept { return *base_; }
  const std::vector<CellRealization>& cells() const noexcept { return cells_; }
  const CellRealization& cell(std::size_t j) const { return cells_.at(j); }
  std::size_t dim() const noexcept { return base_->dim(); }

  /// Signature of the realization from the start of cell j up to time t in that cell.
  TensorPair eval_in_cell_from_start(std::size_t j, double t) const;

  /// Increment over [s, t] with s, t inside cell j (t0 <= s <= t <= t1).
  TensorPair eval_in_cell(std::size_t j, double s, double t) const;

  /// Level-2 increment over arbitrary [s, t] in [0, T].
  TensorPair eval(double s, double t) const;

  /// X~(0, t), for plotting.
  Vector path_value(double t) const;

 private:
  std::shared_ptr<const RoughStepFunction> base_;
  std::vector<CellRealization> cells_;
};

/// Builds the lift of `rsf` (the step function is copied into shared storage).
LiftedRoughPath lift(const RoughStepFunction& rsf);
LiftedRoughPath lift(std::shared_ptr<const RoughStepFunction> rsf);

/// Realization of a single cell increment over [t0, t1].
CellRealization realize_cell(std::size_t index, double t0, double t1, const TensorPair& increment);

/// Lower estimate of the gamma-Hoelder rough path norm of the lift. The
/// supremum runs over every pair of mesh points and over every pair of
/// points on the level-`levels` dyadic refinement of each window of two
/// adjacent cells. The pair set grows with `levels`.
HolderNorm holder_norm_estimate(const LiftedRoughPath& lrp, double gamma, int levels);

/// CSV samples "t,x_1..x_d" of X~(0, t), `samples_per_cell` points per cell.
void write_polyline_csv(std::ostream& os, const LiftedRoughPath& lrp, std::size_t samples_per_cell);

}  // namespace roughsim
