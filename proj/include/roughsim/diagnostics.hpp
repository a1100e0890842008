#pragma once

// Moment scaling fits, tightness probes, KS distances and rate regressions.

#include "roughsim/noise_models.hpp"
#include "roughsim/rough_step.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace roughsim {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// Least squares on log(errors) against log(deltas). Needs >= 3 positive points.
LinearFit rate_fit(std::span<const double> deltas, std::span<const double> errors);

struct MomentScalingReport {
  double q = 0.0;
  double gamma_hat_level1 = 0.0;
  double gamma_hat_level2 = 0.0;
  double r2_level1 = 0.0;
  double r2_level2 = 0.0;
  double intercept_level1 = 0.0;
  double intercept_level2 = 0.0;
  std::size_t pairs_used = 0;
  std::size_t lags_used = 0;

  nlohmann::json to_json() const;
};

/// Fits (E|X(tau_j, tau_k)|^q)^{1/q} and ((E|XX|^{q/2})^{2/q})^{1/2} against
/// |tau_k - tau_j| on a log-log scale. Moments are pooled per index lag and
/// lags lie on a logarithmic grid (ratio 1.2). Every start index is used when
/// N <= 1024; otherwise each lag receives an equal share of `pair_budget`
/// evenly spaced pairs.
MomentScalingReport kolmogorov_exponent(const std::vector<RoughStepFunction>& ensemble, double q,
                                        std::size_t pair_budget = 200000);

struct TightnessCurve {
  std::size_t n = 0;
  std::vector<double> M;
  std::vector<double> p_hat;
};

/// For each n, the fraction of `paths` draws whose discrete Hoelder norm
/// exceeds each M. Draws use SeedLineage(seed, path, n).
std::vector<TightnessCurve> tightness_probe(const NoiseSpec& spec, double T, const std::vector<std::size_t>& n_grid,
                                            double gamma, const std::vector<double>& M_grid, std::size_t paths,
                                            std::uint64_t seed);

/// Curve CSV "M,n,p_hat".
void write_tightness_csv(std::ostream& os, const std::vector<TightnessCurve>& curves);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_distance(std::span<const double> a, std::span<const double> b);

/// Asymptotic 99% critical value 1.63 sqrt((m + n) / (m n)).
double ks_threshold(std::size_t m, std::size_t n);

struct KendallResult {
  double tau = 0.0;
  /// One-sided p-value against a monotone increasing trend.
  double p_increasing = 1.0;
};

/// Kendall's tau-a with an exact permutation p-value for n <= 10 and the
/// normal approximation beyond.
KendallResult kendall_tau(std::span<const double> x, std::span<const double> y);

}  // namespace roughsim
