#include "roughsim/noise_models.hpp"

#include "roughsim/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>

namespace roughsim {

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::IidWalk: return "iid_walk";
    case NoiseKind::Brownian: return "brownian";
    case NoiseKind::Fbm: return "fbm";
    case NoiseKind::MarkovChain: return "markov_chain";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "iid_walk") return NoiseKind::IidWalk;
  if (s == "brownian") return NoiseKind::Brownian;
  if (s == "fbm") return NoiseKind::Fbm;
  if (s == "markov_chain") return NoiseKind::MarkovChain;
  throw InvalidArgument("noise.kind: unknown kind '" + s +
                        "' (expected iid_walk, brownian, fbm or markov_chain)");
}

double NoiseSpec::moment_order() const {
  if (kind == NoiseKind::IidWalk && law == "student_t") return dof;
  return std::numeric_limits<double>::infinity();
}

namespace {

constexpr std::size_t kFbmMaxCells = 4096;

bool is_integer(double x) { return std::isfinite(x) && std::floor(x) == x; }

}  // namespace

Vector stationary_distribution(const Matrix& P) {
  const auto S = P.rows();
  // Solve (P^T - I) mu = 0 with sum(mu) = 1 by replacing the last equation.
  Eigen::MatrixXd A = P.transpose() - Eigen::MatrixXd::Identity(S, S);
  A.row(S - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(S);
  b(S - 1) = 1.0;
  return A.fullPivLu().solve(b);
}

void validate(NoiseSpec& spec) {
  if (spec.d < 1) throw InvalidArgument("noise.d: dimension must be >= 1");
  const auto& r = spec.xi2;
  if (r.kind == Xi2Rule::Kind::Theta && !(r.theta >= 0.0 && r.theta <= 1.0)) {
    throw InvalidArgument("noise.xi2.theta: must lie in [0, 1]");
  }
  if (r.kind == Xi2Rule::Kind::Refined) {
    if (r.m < 1) throw InvalidArgument("noise.xi2.m: must be >= 1");
    if (spec.kind != NoiseKind::Brownian) {
      throw InvalidArgument("noise.xi2: refined(m) is only defined for brownian noise");
    }
  }
  if (!(spec.scale >= 0.0) || !std::isfinite(spec.scale)) {
    throw InvalidArgument("noise.scale: must be non-negative and finite");
  }
  switch (spec.kind) {
    case NoiseKind::IidWalk:
      if (spec.law == "student_t") {
        if (!(spec.dof > 6.0) || !is_integer(spec.dof)) {
          throw InvalidArgument("noise.dof: student_t needs an integer dof > 6 (finite moment of order > 6)");
        }
      } else if (spec.law != "rademacher" && spec.law != "normal" && spec.law != "uniform") {
        throw InvalidArgument("noise.law: unknown law '" + spec.law +
                              "' (expected rademacher, normal, uniform or student_t)");
      }
      break;
    case NoiseKind::Brownian:
      break;
    case NoiseKind::Fbm:
      if (!(spec.hurst > 1.0 / 3.0 && spec.hurst < 1.0)) {
        throw InvalidArgument("noise.hurst: must lie in (1/3, 1)");
      }
      break;
    case NoiseKind::MarkovChain: {
      const auto S = spec.P.rows();
      if (S < 1 || spec.P.cols() != S) throw InvalidArgument("noise.P: must be a non-empty square matrix");
      if (spec.v.rows() != S || static_cast<std::size_t>(spec.v.cols()) != spec.d) {
        throw InvalidArgument("noise.v: must have one row of length d per state");
      }
      for (Eigen::Index i = 0; i < S; ++i) {
        if ((spec.P.row(i).array() < 0.0).any()) throw InvalidArgument("noise.P: negative entry");
        if (std::abs(spec.P.row(i).sum() - 1.0) > 1e-12) {
          throw InvalidArgument("noise.P: row " + std::to_string(i) + " does not sum to 1");
        }
      }
      if (spec.mu.size() == 0) spec.mu = stationary_distribution(spec.P);
      if (spec.mu.size() != S) throw InvalidArgument("noise.mu: must have one entry per state");
      if ((spec.mu.array() < -1e-14).any()) throw InvalidArgument("noise.mu: negative entry");
      const Vector resid = spec.P.transpose() * spec.mu - spec.mu;
      if (resid.cwiseAbs().maxCoeff() > 1e-12) throw InvalidArgument("noise.mu: not stationary (mu P != mu)");
      const Vector mean = spec.v.transpose() * spec.mu;
      if (mean.cwiseAbs().maxCoeff() > 1e-12) {
        throw InvalidArgument("noise.v: observable is not centered under mu");
      }
      break;
    }
  }
}

namespace {

struct FbmKey {
  double hurst;
  std::vector<double> taus;
  bool operator<(const FbmKey& o) const {
    if (hurst != o.hurst) return hurst < o.hurst;
    return taus < o.taus;
  }
};

// Lower Cholesky factors of increment covariances; written once per key,
// read concurrently afterwards.
class FbmCache {
 public:
  std::shared_ptr<const Matrix> get(double hurst, const Partition& part) {
    FbmKey key{hurst, part.taus()};
    {
      std::shared_lock lock(mutex_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    auto factor = std::make_shared<const Matrix>(build(hurst, part));
    std::unique_lock lock(mutex_);
    auto [it, inserted] = cache_.emplace(std::move(key), factor);
    return it->second;
  }

 private:
  static Matrix build(double H, const Partition& part) {
    const std::size_t N = part.count();
    const double h2 = 2.0 * H;
    auto p = [h2](double x) { return std::pow(std::abs(x), h2); };
    Eigen::MatrixXd C(N, N);
    for (std::size_t j = 0; j < N; ++j) {
      for (std::size_t k = j; k < N; ++k) {
        const double a = part.tau(j), b = part.tau(j + 1), c = part.tau(k), e = part.tau(k + 1);
        const double v = 0.5 * (p(e - a) + p(c - b) - p(e - b) - p(c - a));
        C(j, k) = v;
        C(k, j) = v;
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(C);
    if (llt.info() != Eigen::Success) throw InvalidArgument("fbm: covariance factorization failed");
    return Matrix(llt.matrixL());
  }

  std::shared_mutex mutex_;
  std::map<FbmKey, std::shared_ptr<const Matrix>> cache_;
};

FbmCache& fbm_cache() {
  static FbmCache cache;
  return cache;
}

double iid_draw(const NoiseSpec& spec, SeedLineage& rng) {
  if (spec.law == "rademacher") return rng.rademacher();
  if (spec.law == "normal") return rng.normal();
  if (spec.law == "uniform") return std::sqrt(3.0) * (2.0 * rng.uniform() - 1.0);
  // student_t with integer dof, normalized to unit variance.
  const double nu = spec.dof;
  const double z = rng.normal();
  double chi2 = 0.0;
  for (int i = 0; i < static_cast<int>(nu); ++i) {
    const double g = rng.normal();
    chi2 += g * g;
  }
  return z / std::sqrt(chi2 / nu) * std::sqrt((nu - 2.0) / nu);
}

}  // namespace

void generate_into(const NoiseSpec& spec, const Partition& partition, SeedLineage& rng,
                   IncrementStream& out, NoiseWorkspace& ws) {
  const std::size_t d = spec.d;
  const std::size_t N = partition.count();
  if (out.dim() != d || out.count() != N) out.reset(d, N);
  double* xi = out.xi_data().data();
  double* Xi = out.Xi_data().data();
  const bool refined = spec.xi2.kind == Xi2Rule::Kind::Refined;

  switch (spec.kind) {
    case NoiseKind::IidWalk:
      for (std::size_t j = 0; j < N; ++j) {
        const double s = std::sqrt(partition.width(j)) * spec.scale;
        for (std::size_t a = 0; a < d; ++a) xi[j * d + a] = s * iid_draw(spec, rng);
      }
      break;
    case NoiseKind::Brownian:
      if (!refined) {
        for (std::size_t j = 0; j < N; ++j) {
          const double s = std::sqrt(partition.width(j)) * spec.scale;
          for (std::size_t a = 0; a < d; ++a) xi[j * d + a] = s * rng.normal();
        }
      } else {
        const std::size_t m = spec.xi2.m;
        ws.sub.assign(2 * d, 0.0);
        double* run = ws.sub.data();
        double* delta = ws.sub.data() + d;
        for (std::size_t j = 0; j < N; ++j) {
          const double s = std::sqrt(partition.width(j) / static_cast<double>(m)) * spec.scale;
          double* Xj = Xi + j * d * d;
          std::fill(run, run + d, 0.0);
          std::fill(Xj, Xj + d * d, 0.0);
          for (std::size_t b = 0; b < m; ++b) {
            for (std::size_t a = 0; a < d; ++a) delta[a] = s * rng.normal();
            for (std::size_t x = 0; x < d; ++x) {
              for (std::size_t y = 0; y < d; ++y) Xj[x * d + y] += run[x] * delta[y];
            }
            for (std::size_t a = 0; a < d; ++a) run[a] += delta[a];
          }
          std::copy(run, run + d, xi + j * d);
        }
      }
      break;
    case NoiseKind::Fbm: {
      if (N > kFbmMaxCells) {
        throw InvalidArgument("fbm: at most " + std::to_string(kFbmMaxCells) + " cells are supported");
      }
      const auto L = fbm_cache().get(spec.hurst, partition);
      ws.gauss.resize(N);
      for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t j = 0; j < N; ++j) ws.gauss[j] = rng.normal();
        for (std::size_t j = 0; j < N; ++j) {
          const double* row = L->data() + j * N;
          double acc = 0.0;
          for (std::size_t k = 0; k <= j; ++k) acc += row[k] * ws.gauss[k];
          xi[j * d + a] = spec.scale * acc;
        }
      }
      break;
    }
    case NoiseKind::MarkovChain: {
      const auto S = static_cast<std::size_t>(spec.P.rows());
      if (spec.mu.size() != static_cast<Eigen::Index>(S)) {
        throw InvalidArgument("markov_chain: spec must be validated before generation");
      }
      ws.sub.resize(S * S + S);
      double* cum = ws.sub.data();
      double* cmu = ws.sub.data() + S * S;
      for (std::size_t s = 0; s < S; ++s) {
        double acc = 0.0;
        for (std::size_t t = 0; t < S; ++t) {
          acc += spec.P(s, t);
          cum[s * S + t] = acc;
        }
        cum[s * S + S - 1] = 1.0;
      }
      double acc = 0.0;
      for (std::size_t s = 0; s < S; ++s) {
        acc += spec.mu(s);
        cmu[s] = acc;
      }
      cmu[S - 1] = 1.0;
      auto pick = [S](const double* c, double u) {
        std::size_t s = 0;
        while (s + 1 < S && u >= c[s]) ++s;
        return s;
      };
      std::size_t state = pick(cmu, rng.uniform());
      for (std::size_t j = 0; j < N; ++j) {
        if (j > 0) state = pick(cum + state * S, rng.uniform());
        const double s = std::sqrt(partition.width(j));
        for (std::size_t a = 0; a < d; ++a) xi[j * d + a] = s * spec.v(state, a);
      }
      break;
    }
  }

  if (spec.xi2.kind == Xi2Rule::Kind::Zero) {
    std::fill(Xi, Xi + N * d * d, 0.0);
  } else if (spec.xi2.kind == Xi2Rule::Kind::Theta) {
    const double w = 1.0 - spec.xi2.theta;
    for (std::size_t j = 0; j < N; ++j) {
      const double* x = xi + j * d;
      double* Xj = Xi + j * d * d;
      for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < d; ++b) Xj[a * d + b] = w * x[a] * x[b];
      }
    }
  }
}

IncrementStream generate(const NoiseSpec& spec, const Partition& partition, std::uint64_t seed,
                         std::uint64_t path_id) {
  NoiseSpec s = spec;
  validate(s);
  SeedLineage rng(seed, path_id);
  IncrementStream out(s.d, partition.count());
  NoiseWorkspace ws;
  generate_into(s, partition, rng, out, ws);
  return out;
}

double subdominant_modulus(const Matrix& P) {
  const auto S = P.rows();
  if (S <= 1) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(P), false);
  const auto ev = es.eigenvalues();
  Eigen::Index perron = 0;
  double best = std::abs(ev(0) - 1.0);
  for (Eigen::Index i = 1; i < S; ++i) {
    const double dist = std::abs(ev(i) - 1.0);
    if (dist < best) {
      best = dist;
      perron = i;
    }
  }
  double r = 0.0;
  for (Eigen::Index i = 0; i < S; ++i) {
    if (i != perron) r = std::max(r, std::abs(ev(i)));
  }
  return r;
}

std::vector<Matrix> markov_autocovariances(const NoiseSpec& spec, std::size_t J) {
  NoiseSpec s = spec;
  if (s.kind != NoiseKind::MarkovChain) throw InvalidArgument("markov_autocovariances: markov_chain spec required");
  validate(s);
  const Matrix Dmu = s.mu.asDiagonal();
  const Matrix left = s.v.transpose() * Dmu;
  Matrix u = s.v;
  std::vector<Matrix> out;
  out.reserve(J + 1);
  for (std::size_t j = 0; j <= J; ++j) {
    if (j > 0) u = s.P * u;
    out.push_back(left * u);
  }
  return out;
}

AnalyticLimit analytic_limit(const NoiseSpec& spec_in) {
  NoiseSpec spec = spec_in;
  validate(spec);
  const auto d = static_cast<Eigen::Index>(spec.d);
  AnalyticLimit out;
  const double theta_shift =
      spec.xi2.kind == Xi2Rule::Kind::Theta ? 1.0 - spec.xi2.theta : 0.0;

  switch (spec.kind) {
    case NoiseKind::IidWalk:
    case NoiseKind::Brownian: {
      out.D = spec.scale * spec.scale * Matrix::Identity(d, d);
      out.nu = (theta_shift - 0.5) * out.D;
      out.derivation = to_string(spec.kind) + ": D = Cov(draw), nu = -D/2";
      if (theta_shift != 0.0) out.derivation += " + (1 - theta) E[draw draw^T]";
      break;
    }
    case NoiseKind::Fbm:
      throw InvalidArgument("analytic_limit: no closed form for fbm (non-martingale limit)");
    case NoiseKind::MarkovChain: {
      const double r = subdominant_modulus(spec.P);
      if (!(r < 1.0 - 1e-12)) {
        throw InvalidArgument("analytic_limit: transition matrix has spectral radius >= 1 on the centered subspace");
      }
      const Matrix Dmu = spec.mu.asDiagonal();
      const Matrix left = spec.v.transpose() * Dmu;
      const Matrix C0 = left * spec.v;
      Matrix S = Matrix::Zero(d, d);
      Matrix u = spec.v;
      const double geo = r / (1.0 - r);
      double rj = 1.0;
      std::size_t j = 0;
      constexpr std::size_t kMaxTerms = 100000000;
      while (true) {
        ++j;
        if (j > kMaxTerms) throw InvalidArgument("analytic_limit: series did not converge");
        u = spec.P * u;
        const Matrix Cj = left * u;
        S += Cj;
        rj *= r;
        const double scale = std::max((C0 + S + S.transpose()).norm(), C0.norm());
        const double tail_term = Cj.norm() * geo;
        const double tail_geo = C0.norm() * rj / (1.0 - r);
        if (tail_term <= 1e-13 * scale && tail_geo <= 1e-12 * scale) break;
        if (scale == 0.0) break;
      }
      out.terms = j;
      out.D = C0 + S + S.transpose();
      out.nu = -0.5 * C0 + 0.5 * (S - S.transpose()) + theta_shift * C0;
      out.derivation = "markov_chain: Green-Kubo sums of C_j, " + std::to_string(j) + " terms";
      break;
    }
  }
  return out;
}

NuAccumulator::NuAccumulator(std::size_t d, std::size_t paths, double T)
    : d_(d), paths_(paths), T_(T), X_(d * paths, 0.0), XX_(d * d * paths, 0.0) {
  if (paths == 0) throw InvalidArgument("empirical_nu: empty ensemble");
  if (!(T > 0.0)) throw InvalidArgument("empirical_nu: horizon must be positive");
}

void NuAccumulator::set(std::size_t i, const ConstVectorRef& X, const ConstMatrixRef& XX) {
  for (std::size_t a = 0; a < d_; ++a) X_[i * d_ + a] = X(a);
  for (std::size_t a = 0; a < d_; ++a) {
    for (std::size_t b = 0; b < d_; ++b) XX_[(i * d_ + a) * d_ + b] = XX(a, b);
  }
}

void NuAccumulator::set(std::size_t i, const IncrementStream& stream, Convention convention) {
  const std::size_t d = d_;
  double* X = X_.data() + i * d;
  double* XX = XX_.data() + i * d * d;
  std::fill(X, X + d, 0.0);
  std::fill(XX, XX + d * d, 0.0);
  const double* xi = stream.xi_data().data();
  const double* Xi = stream.Xi_data().data();
  const bool later_earlier = convention == Convention::LaterEarlier;
  for (std::size_t j = 0; j < stream.count(); ++j) {
    const double* x = xi + j * d;
    const double* Xj = Xi + j * d * d;
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        const double cross = later_earlier ? x[a] * X[b] : X[a] * x[b];
        XX[a * d + b] += cross + Xj[a * d + b];
      }
    }
    for (std::size_t a = 0; a < d; ++a) X[a] += x[a];
  }
}

NuEstimate NuAccumulator::finalize() const {
  const auto d = static_cast<Eigen::Index>(d_);
  NuEstimate out;
  out.nu = Matrix::Zero(d, d);
  out.nu_se = Matrix::Zero(d, d);
  out.D = Matrix::Zero(d, d);
  out.D_se = Matrix::Zero(d, d);
  out.paths = paths_;
  out.T = T_;
  std::vector<double> q(paths_);
  std::vector<double> c(paths_);
  for (std::size_t a = 0; a < d_; ++a) {
    for (std::size_t b = 0; b < d_; ++b) {
      for (std::size_t i = 0; i < paths_; ++i) {
        const double xx = X_[i * d_ + a] * X_[i * d_ + b];
        q[i] = (XX_[(i * d_ + a) * d_ + b] - 0.5 * xx) / T_;
        c[i] = xx / T_;
      }
      const auto sq = mean_se(q);
      const auto sc = mean_se(c);
      out.nu(a, b) = sq.mean;
      out.nu_se(a, b) = sq.se;
      out.D(a, b) = sc.mean;
      out.D_se(a, b) = sc.se;
    }
  }
  if (d_ >= 2) {
    for (std::size_t i = 0; i < paths_; ++i) {
      q[i] = 0.5 * (XX_[(i * d_ + 0) * d_ + 1] - XX_[(i * d_ + 1) * d_ + 0]) / T_;
    }
    const auto sa = mean_se(q);
    out.area = sa.mean;
    out.area_se = sa.se;
  }
  return out;
}

NuEstimate empirical_nu(const std::vector<RoughStepFunction>& ensemble, double T) {
  if (ensemble.empty()) throw InvalidArgument("empirical_nu: empty ensemble");
  const std::size_t d = ensemble.front().dim();
  NuAccumulator acc(d, ensemble.size(), T);
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const auto& r = ensemble[i];
    if (r.dim() != d) throw InvalidArgument("empirical_nu: mixed dimensions in ensemble");
    acc.set(i, r.X(r.count()), r.XX(r.count()));
  }
  return acc.finalize();
}

}  // namespace roughsim
