#pragma once

// Increment stream generators and their closed-form diffusion limits.

#include "roughsim/rng.hpp"
#include "roughsim/rough_step.hpp"

#include <json.hpp>

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace roughsim {

enum class NoiseKind { IidWalk, Brownian, Fbm, MarkovChain };

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& s);

struct Xi2Rule {
  enum class Kind { Zero, Theta, Refined };
  Kind kind = Kind::Zero;
  double theta = 1.0;
  std::size_t m = 1;

  static Xi2Rule zero() { return {}; }
  static Xi2Rule theta_rule(double theta) { return {Kind::Theta, theta, 1}; }
  static Xi2Rule refined(std::size_t m) { return {Kind::Refined, 1.0, m}; }
};

struct NoiseSpec {
  NoiseKind kind = NoiseKind::Brownian;
  std::size_t d = 1;
  Xi2Rule xi2;

  /// iid_walk: one of "rademacher", "normal", "uniform", "student_t"; all draws
  /// are normalized to unit variance per coordinate before `scale`.
  std::string law = "normal";
  double dof = 0.0;
  /// iid_walk / brownian / fbm amplitude.
  double scale = 1.0;

  /// fbm Hurst index.
  double hurst = 0.5;

  /// markov_chain: transition matrix (S x S), observable rows v(s) (S x d) and
  /// stationary law (computed when left empty).
  Matrix P;
  Matrix v;
  Vector mu;

  /// Declared finite moment order of the driving draws.
  double moment_order() const;
};

/// Throws InvalidArgument naming the offending field. Fills `mu` for chains.
void validate(NoiseSpec& spec);

/// Left Perron vector of a stochastic matrix.
Vector stationary_distribution(const Matrix& P);

/// Reusable per-worker buffers for generation.
struct NoiseWorkspace {
  std::vector<double> gauss;
  std::vector<double> sub;
};

/// Fills `out` (resized if needed) for the cells of `partition`.
///   iid_walk:     xi_j = sqrt(width_j) * scale * draw
///   brownian:     xi_j ~ N(0, width_j * scale^2 I)
///   fbm:          exact-covariance Gaussian increments (N <= 4096)
///   markov_chain: stationary chain, xi_j = sqrt(width_j) * v(state_j)
/// Xi_j follows the rule: zero, (1 - theta) xi (x) xi, or the left-Riemann
/// iterated sum over m Brownian sub-increments (brownian only).
void generate_into(const NoiseSpec& spec, const Partition& partition, SeedLineage& rng,
                   IncrementStream& out, NoiseWorkspace& ws);

IncrementStream generate(const NoiseSpec& spec, const Partition& partition, std::uint64_t seed,
                         std::uint64_t path_id = 0);

struct AnalyticLimit {
  Matrix D;
  Matrix nu;
  std::string derivation;
  /// Number of series terms summed (markov_chain only).
  std::size_t terms = 0;
};

/// Closed-form D and nu for iid_walk, brownian and markov_chain specs.
AnalyticLimit analytic_limit(const NoiseSpec& spec);

/// C_j = sum_s mu(s) v(s) (P^j v)(s)^T for j = 0..J.
std::vector<Matrix> markov_autocovariances(const NoiseSpec& spec, std::size_t J);

/// Largest |eigenvalue| of P with the Perron eigenvalue removed.
double subdominant_modulus(const Matrix& P);

struct NuEstimate {
  Matrix nu;
  Matrix nu_se;
  Matrix D;
  Matrix D_se;
  /// Antisymmetric part nu^{12} estimate and its standard error (d >= 2).
  double area = 0.0;
  double area_se = 0.0;
  std::size_t paths = 0;
  double T = 0.0;
  /// Set for non-martingale drivers; nu is then E XX - sym baseline only.
  bool non_martingale = false;
  std::string caveat;
};

/// Per-path terminal accumulator for empirical nu; results are reduced in
/// path order so they do not depend on scheduling.
class NuAccumulator {
 public:
  NuAccumulator(std::size_t d, std::size_t paths, double T);

  /// Stores X(T), XX(T) of path `i`; thread safe for distinct i.
  void set(std::size_t i, const ConstVectorRef& X, const ConstMatrixRef& XX);
  /// Computes X(T), XX(T) of `stream` under the given ordering convention.
  void set(std::size_t i, const IncrementStream& stream, Convention convention = Convention::EarlierLater);

  NuEstimate finalize() const;

 private:
  std::size_t d_;
  std::size_t paths_;
  double T_;
  std::vector<double> X_;
  std::vector<double> XX_;
};

/// nu_hat = (mean XX(T) - 1/2 mean X(T) (x) X(T)) / T with per-entry standard errors.
NuEstimate empirical_nu(const std::vector<RoughStepFunction>& ensemble, double T);

}  // namespace roughsim
