#include "roughsim/lift.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace roughsim {

double CellRealization::segment_end_time(std::size_t i) const {
  if (length == 0.0) return t1;
  return t0 + width() * (arc_end.at(i) / length);
}

CellRealization realize_cell(std::size_t index, double t0, double t1, const TensorPair& increment) {
  if (!(t1 > t0)) throw InvalidArgument("realize_cell: empty cell");
  const std::size_t d = increment.dim();
  const auto parts = decompose(increment);

  CellRealization cell;
  cell.index = index;
  cell.t0 = t0;
  cell.t1 = t1;
  cell.defect = parts.z;
  cell.increment = increment;

  auto push = [&cell](Vector v) {
    const double len = v.norm();
    if (len == 0.0) return;
    cell.length += len;
    cell.segments.push_back(std::move(v));
    cell.arc_end.push_back(cell.length);
  };

  push(parts.g.a());
  // One square loop per plane; e_alpha then e_beta encloses positive area.
  for (std::size_t alpha = 0; alpha < d; ++alpha) {
    for (std::size_t beta = alpha + 1; beta < d; ++beta) {
      const double area = parts.g.area(alpha, beta);
      if (area == 0.0) continue;
      const double side = std::sqrt(std::abs(area));
      const std::size_t first = area > 0.0 ? alpha : beta;
      const std::size_t second = area > 0.0 ? beta : alpha;
      Vector e1 = Vector::Zero(static_cast<Eigen::Index>(d));
      Vector e2 = Vector::Zero(static_cast<Eigen::Index>(d));
      e1(first) = side;
      e2(second) = side;
      push(e1);
      push(e2);
      push(-e1);
      push(-e2);
    }
  }
  return cell;
}

LiftedRoughPath::LiftedRoughPath(std::shared_ptr<const RoughStepFunction> base)
    : base_(std::move(base)) {
  if (!base_) throw InvalidArgument("lift: null step function");
  if (base_->convention() != Convention::EarlierLater) {
    throw InvalidArgument("lift: only the earlier_later convention has a rough path lift");
  }
  const auto& part = base_->partition();
  const auto& inc = base_->increments();
  cells_.reserve(base_->count());
  for (std::size_t j = 0; j < base_->count(); ++j) {
    TensorPair p(Vector(inc.xi(j)), Matrix(inc.Xi(j)));
    cells_.push_back(realize_cell(j, part.tau(j), part.tau(j + 1), p));
  }
}

TensorPair LiftedRoughPath::eval_in_cell_from_start(std::size_t j, double t) const {
  const auto& cell = cells_.at(j);
  if (t >= cell.t1) return cell.increment;
  const std::size_t d = dim();
  TensorPair out = TensorPair::zero(d);
  if (t <= cell.t0) return out;
  const double frac = (t - cell.t0) / cell.width();
  const double arc = frac * cell.length;
  Vector w(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < cell.segments.size(); ++i) {
    const double seg_len = i == 0 ? cell.arc_end[0] : cell.arc_end[i] - cell.arc_end[i - 1];
    const double seg_start = cell.arc_end[i] - seg_len;
    if (arc <= seg_start) break;
    if (arc >= cell.arc_end[i]) {
      w = cell.segments[i];
    } else {
      w = cell.segments[i] * ((arc - seg_start) / seg_len);
    }
    out.M.noalias() += out.a * w.transpose();
    out.M.noalias() += 0.5 * (w * w.transpose());
    out.a += w;
  }
  out.M += frac * cell.defect.matrix();
  return out;
}

TensorPair LiftedRoughPath::eval_in_cell(std::size_t j, double s, double t) const {
  const auto& cell = cells_.at(j);
  if (s > t) throw InvalidArgument("eval: require s <= t");
  if (s <= cell.t0 && t >= cell.t1) return cell.increment;
  if (s <= cell.t0) return eval_in_cell_from_start(j, t);
  const TensorPair ps = eval_in_cell_from_start(j, s);
  const TensorPair pt = eval_in_cell_from_start(j, t);
  TensorPair out;
  out.a = pt.a - ps.a;
  out.M = pt.M - ps.M;
  out.M.noalias() -= ps.a * out.a.transpose();
  return out;
}

TensorPair LiftedRoughPath::eval(double s, double t) const {
  const auto& part = base_->partition();
  if (s > t) throw InvalidArgument("eval: require s <= t");
  if (s < 0.0 || t > part.horizon()) throw InvalidArgument("eval: times outside [0, T]");
  const std::size_t ls = part.index_at(s);
  const std::size_t kt = part.index_at(t);
  const bool s_mesh = part.tau(ls) == s;
  const bool t_mesh = part.tau(kt) == t;

  if (s_mesh && t_mesh) return base_->increment_index(ls, kt);
  if (!s_mesh && !t_mesh && ls == kt) return eval_in_cell(ls, s, t);
  if (!s_mesh && t_mesh && kt == ls + 1) return eval_in_cell(ls, s, t);

  const std::size_t start = s_mesh ? ls : ls + 1;
  TensorPair out = base_->increment_index(start, kt);
  if (!s_mesh) out = chen_mul(eval_in_cell(ls, s, part.tau(ls + 1)), out);
  if (!t_mesh) out = chen_mul(out, eval_in_cell_from_start(kt, t));
  return out;
}

Vector LiftedRoughPath::path_value(double t) const {
  const auto& part = base_->partition();
  const std::size_t k = part.index_at(t);
  Vector x = base_->X(k);
  if (k < base_->count() && part.tau(k) != t) x += eval_in_cell_from_start(k, t).a;
  return x;
}

LiftedRoughPath lift(std::shared_ptr<const RoughStepFunction> rsf) {
  return LiftedRoughPath(std::move(rsf));
}

LiftedRoughPath lift(const RoughStepFunction& rsf) {
  return LiftedRoughPath(std::make_shared<const RoughStepFunction>(rsf));
}

HolderNorm holder_norm_estimate(const LiftedRoughPath& lrp, double gamma, int levels) {
  if (levels < 1) throw InvalidArgument("holder_norm_estimate: levels must be >= 1");
  if (levels > 16) throw InvalidArgument("holder_norm_estimate: levels above 16 are not supported");
  HolderNorm out = discrete_holder_parts(lrp.base(), gamma);

  const auto& part = lrp.base().partition();
  const std::size_t N = part.count();
  const std::size_t d = lrp.dim();
  const std::size_t sub = std::size_t{1} << levels;

  std::vector<double> times;
  std::vector<double> pa;  // level-1 values from the window start, row per point
  std::vector<double> pm;  // level-2 values from the window start
  std::vector<double> lag_pow(2 * sub + 1, 0.0);
  double lag_width = -1.0;

  for (std::size_t j = 0; j < N; ++j) {
    const bool two = j + 1 < N;
    const double w0 = part.width(j);
    const double w1 = two ? part.width(j + 1) : w0;
    const bool equal_widths = std::abs(w1 - w0) <= 1e-12 * w0;
    const std::size_t npts = two ? 2 * sub + 1 : sub + 1;

    times.resize(npts);
    pa.assign(npts * d, 0.0);
    pm.assign(npts * d * d, 0.0);
    const TensorPair& first = lrp.cell(j).increment;
    for (std::size_t i = 0; i < npts; ++i) {
      TensorPair p;
      if (i <= sub) {
        times[i] = i == sub ? part.tau(j + 1) : part.tau(j) + w0 * static_cast<double>(i) / sub;
        p = lrp.eval_in_cell_from_start(j, times[i]);
      } else {
        const std::size_t r = i - sub;
        times[i] = r == sub ? part.tau(j + 2) : part.tau(j + 1) + w1 * static_cast<double>(r) / sub;
        p = chen_mul(first, lrp.eval_in_cell_from_start(j + 1, times[i]));
      }
      std::copy(p.a.data(), p.a.data() + d, pa.begin() + i * d);
      std::copy(p.M.data(), p.M.data() + d * d, pm.begin() + i * d * d);
    }

    if (equal_widths && lag_width != w0) {
      const double h = w0 / static_cast<double>(sub);
      for (std::size_t lag = 1; lag <= 2 * sub; ++lag) {
        lag_pow[lag] = std::pow(h * static_cast<double>(lag), gamma);
      }
      lag_width = w0;
    }

    for (std::size_t i = 0; i < npts; ++i) {
      const double* ai = pa.data() + i * d;
      const double* mi = pm.data() + i * d * d;
      for (std::size_t k = i + 1; k < npts; ++k) {
        const double* ak = pa.data() + k * d;
        const double* mk = pm.data() + k * d * d;
        double n1 = 0.0;
        double n2 = 0.0;
        for (std::size_t x = 0; x < d; ++x) {
          const double da = ak[x] - ai[x];
          n1 += da * da;
        }
        for (std::size_t x = 0; x < d; ++x) {
          for (std::size_t y = 0; y < d; ++y) {
            const double v = mk[x * d + y] - mi[x * d + y] - ai[x] * (ak[y] - ai[y]);
            n2 += v * v;
          }
        }
        const double denom =
            equal_widths ? lag_pow[k - i] : std::pow(times[k] - times[i], gamma);
        out.level1 = std::max(out.level1, std::sqrt(n1) / denom);
        out.level2 = std::max(out.level2, std::sqrt(std::sqrt(n2)) / denom);
      }
    }
  }
  out.value = out.level1 + out.level2;
  out.lower_bound = true;
  return out;
}

void write_polyline_csv(std::ostream& os, const LiftedRoughPath& lrp, std::size_t samples_per_cell) {
  if (samples_per_cell == 0) throw InvalidArgument("write_polyline_csv: samples_per_cell must be >= 1");
  const std::size_t d = lrp.dim();
  const auto& part = lrp.base().partition();
  os << "t";
  for (std::size_t i = 0; i < d; ++i) os << ",x_" << (i + 1);
  os << '\n' << std::setprecision(17);
  auto row = [&](double t, const Vector& x) {
    os << t;
    for (std::size_t i = 0; i < d; ++i) os << ',' << x(i);
    os << '\n';
  };
  for (std::size_t j = 0; j < part.count(); ++j) {
    for (std::size_t i = 0; i < samples_per_cell; ++i) {
      const double t = part.tau(j) + part.width(j) * static_cast<double>(i) / samples_per_cell;
      Vector x = lrp.base().X(j);
      if (i > 0) x += lrp.eval_in_cell_from_start(j, t).a;
      row(t, x);
    }
  }
  row(part.horizon(), lrp.base().X(part.count()));
}

}  // namespace roughsim
