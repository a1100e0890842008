#include "roughsim/diagnostics.hpp"

#include "roughsim/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace roughsim {

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("linear_fit: length mismatch");
  if (x.size() < 2) throw InvalidArgument("linear_fit: need at least 2 points");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw InvalidArgument("linear_fit: x values are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0.0 ? 1.0 : std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
  return f;
}

LinearFit rate_fit(std::span<const double> deltas, std::span<const double> errors) {
  if (deltas.size() != errors.size()) throw InvalidArgument("rate_fit: length mismatch");
  if (deltas.size() < 3) throw InvalidArgument("rate_fit: need at least 3 points");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0) || !(errors[i] > 0.0)) throw InvalidArgument("rate_fit: inputs must be positive");
    lx.push_back(std::log(deltas[i]));
    ly.push_back(std::log(errors[i]));
  }
  return linear_fit(lx, ly);
}

nlohmann::json MomentScalingReport::to_json() const {
  return {{"q", q},
          {"gamma_hat_level1", gamma_hat_level1},
          {"gamma_hat_level2", gamma_hat_level2},
          {"r2_level1", r2_level1},
          {"r2_level2", r2_level2},
          {"pairs_used", pairs_used},
          {"lags_used", lags_used}};
}

namespace {

// x^p for x >= 0, exact repeated multiplication when p is a small integer.
inline double powp(double x, double p, int ip) {
  if (ip > 0) {
    double r = 1.0;
    for (int i = 0; i < ip; ++i) r *= x;
    return r;
  }
  return std::pow(x, p);
}

int small_integer(double p) {
  return (p == std::floor(p) && p >= 1.0 && p <= 16.0) ? static_cast<int>(p) : 0;
}

}  // namespace

MomentScalingReport kolmogorov_exponent(const std::vector<RoughStepFunction>& ensemble, double q,
                                        std::size_t pair_budget) {
  if (ensemble.size() < 100) throw InvalidArgument("kolmogorov_exponent: ensemble needs >= 100 paths");
  if (!(q > 0.0)) throw InvalidArgument("kolmogorov_exponent: q must be positive");
  const auto& part = ensemble.front().partition();
  const std::size_t N = part.count();
  const std::size_t d = ensemble.front().dim();
  for (const auto& r : ensemble) {
    if (!(r.partition() == part) || r.dim() != d) {
      throw InvalidArgument("kolmogorov_exponent: ensemble members must share partition and dimension");
    }
  }
  if (N < 3) throw InvalidArgument("kolmogorov_exponent: need at least 3 cells");

  std::vector<std::size_t> lags;
  const bool exact = N <= 1024;
  for (double x = 1.0; x <= static_cast<double>(N); x *= 1.2) {
    const auto l = static_cast<std::size_t>(std::llround(x));
    if (lags.empty() || lags.back() != l) lags.push_back(l);
  }
  const std::size_t per_lag = exact ? 0 : std::max<std::size_t>(1, pair_budget / lags.size());

  // Start indices for each lag.
  std::vector<std::vector<std::size_t>> starts(lags.size());
  std::vector<double> log_span(lags.size(), 0.0);
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < lags.size(); ++i) {
    const std::size_t avail = N - lags[i] + 1;
    const std::size_t take = exact ? avail : std::min(avail, per_lag);
    for (std::size_t s = 0; s < take; ++s) {
      const std::size_t j = take == avail ? s : (s * avail) / take;
      starts[i].push_back(j);
      log_span[i] += std::log(part.tau(j + lags[i]) - part.tau(j));
    }
    log_span[i] /= static_cast<double>(take);
    pairs += take;
  }

  const double p1 = q / 2.0;
  const double p2 = q / 4.0;
  const int i1 = small_integer(p1);
  const int i2 = small_integer(p2);
  const std::size_t P = ensemble.size();
  const std::size_t L = lags.size();
  std::vector<double> s1(P * L, 0.0), s2(P * L, 0.0);

  parallel_for(P, [&](std::size_t p, std::size_t) {
    const auto& r = ensemble[p];
    const double* X = r.X(0).data();
    const double* XX = r.XX(0).data();
    for (std::size_t li = 0; li < L; ++li) {
      const std::size_t lag = lags[li];
      double a1 = 0.0, a2 = 0.0;
      for (std::size_t j : starts[li]) {
        const std::size_t k = j + lag;
        const double* xj = X + j * d;
        const double* xk = X + k * d;
        const double* mj = XX + j * d * d;
        const double* mk = XX + k * d * d;
        double n1 = 0.0, n2 = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
          const double da = xk[a] - xj[a];
          n1 += da * da;
          for (std::size_t b = 0; b < d; ++b) {
            const double v = mk[a * d + b] - mj[a * d + b] - xj[a] * (xk[b] - xj[b]);
            n2 += v * v;
          }
        }
        a1 += powp(n1, p1, i1);
        a2 += powp(n2, p2, i2);
      }
      s1[p * L + li] = a1;
      s2[p * L + li] = a2;
    }
  });

  std::vector<double> x1, y1, x2, y2, col(P);
  for (std::size_t li = 0; li < L; ++li) {
    const double count = static_cast<double>(starts[li].size() * P);
    for (std::size_t p = 0; p < P; ++p) col[p] = s1[p * L + li];
    const double m1 = pairwise_sum(col) / count;
    for (std::size_t p = 0; p < P; ++p) col[p] = s2[p * L + li];
    const double m2 = pairwise_sum(col) / count;
    if (m1 > 0.0 && std::isfinite(m1)) {
      x1.push_back(log_span[li]);
      y1.push_back(std::log(m1) / q);
    }
    if (m2 > 0.0 && std::isfinite(m2)) {
      x2.push_back(log_span[li]);
      // ((E|XX|^{q/2})^{2/q})^{1/2}
      y2.push_back(std::log(m2) / q);
    }
  }

  MomentScalingReport rep;
  rep.q = q;
  rep.pairs_used = pairs;
  rep.lags_used = L;
  if (x1.size() >= 2) {
    const auto f = linear_fit(x1, y1);
    rep.gamma_hat_level1 = f.slope;
    rep.intercept_level1 = f.intercept;
    rep.r2_level1 = f.r2;
  }
  if (x2.size() >= 2) {
    const auto f = linear_fit(x2, y2);
    rep.gamma_hat_level2 = f.slope;
    rep.intercept_level2 = f.intercept;
    rep.r2_level2 = f.r2;
  }
  return rep;
}

std::vector<TightnessCurve> tightness_probe(const NoiseSpec& spec_in, double T, const std::vector<std::size_t>& n_grid,
                                            double gamma, const std::vector<double>& M_grid, std::size_t paths,
                                            std::uint64_t seed) {
  NoiseSpec spec = spec_in;
  validate(spec);
  if (paths == 0) throw InvalidArgument("tightness_probe: paths must be >= 1");
  std::vector<double> Ms = M_grid;
  std::sort(Ms.begin(), Ms.end());
  std::vector<TightnessCurve> out;
  for (std::size_t n : n_grid) {
    const Partition part = Partition::uniform(T, n);
    std::vector<double> norms(paths);
    parallel_for(paths, [&](std::size_t p, std::size_t) {
      SeedLineage rng(seed, p, n);
      IncrementStream stream(spec.d, n);
      NoiseWorkspace ws;
      generate_into(spec, part, rng, stream, ws);
      norms[p] = discrete_holder_norm(RoughStepFunction::build(part, std::move(stream)), gamma);
    });
    TightnessCurve c;
    c.n = n;
    c.M = Ms;
    for (double M : Ms) {
      const auto hits = std::count_if(norms.begin(), norms.end(), [M](double v) { return v > M; });
      c.p_hat.push_back(static_cast<double>(hits) / static_cast<double>(paths));
    }
    out.push_back(std::move(c));
  }
  return out;
}

void write_tightness_csv(std::ostream& os, const std::vector<TightnessCurve>& curves) {
  os << "M,n,p_hat\n";
  os.precision(17);
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.M.size(); ++i) os << c.M[i] << ',' << c.n << ',' << c.p_hat[i] << '\n';
  }
}

double ks_distance(std::span<const double> a_in, std::span<const double> b_in) {
  if (a_in.empty() || b_in.empty()) throw InvalidArgument("ks_distance: empty sample");
  std::vector<double> a(a_in.begin(), a_in.end()), b(b_in.begin(), b_in.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double dmax = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    dmax = std::max(dmax, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return dmax;
}

double ks_threshold(std::size_t m, std::size_t n) {
  const auto dm = static_cast<double>(m);
  const auto dn = static_cast<double>(n);
  return 1.63 * std::sqrt((dm + dn) / (dm * dn));
}

namespace {

long long kendall_s(std::span<const double> x, std::span<const double> y) {
  long long s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[j] - x[i];
      const double dy = y[j] - y[i];
      const double p = dx * dy;
      s += (p > 0.0) - (p < 0.0);
    }
  }
  return s;
}

}  // namespace

KendallResult kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("kendall_tau: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw InvalidArgument("kendall_tau: need at least 2 points");
  const long long s = kendall_s(x, y);
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  KendallResult r;
  r.tau = static_cast<double>(s) / pairs;
  if (n <= 10) {
    // Exact null distribution of S over all permutations of y's ranks.
    std::vector<double> xs(n), perm(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = static_cast<double>(i);
      perm[i] = static_cast<double>(i);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
    const long long s_obs = kendall_s(xs, ys);
    long long total = 0, ge = 0;
    do {
      ++total;
      if (kendall_s(xs, perm) >= s_obs) ++ge;
    } while (std::next_permutation(perm.begin(), perm.end()));
    r.p_increasing = static_cast<double>(ge) / static_cast<double>(total);
  } else {
    const auto dn = static_cast<double>(n);
    const double var = dn * (dn - 1.0) * (2.0 * dn + 5.0) / 18.0;
    const double z = (static_cast<double>(s) - 1.0) / std::sqrt(var);
    r.p_increasing = 0.5 * std::erfc(z / std::sqrt(2.0));
  }
  return r;
}

}  // namespace roughsim
