#include "roughsim/rough_step.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace roughsim {

Partition::Partition(std::vector<double> taus, double max_mesh_ratio) : taus_(std::move(taus)) {
  if (taus_.size() < 2) throw InvalidArgument("Partition: need at least one cell");
  if (taus_.front() != 0.0) throw InvalidArgument("Partition: tau_0 must be 0");
  for (std::size_t k = 0; k + 1 < taus_.size(); ++k) {
    if (!(taus_[k + 1] > taus_[k])) {
      throw InvalidArgument("Partition: times must be strictly increasing (index " +
                            std::to_string(k + 1) + ")");
    }
    mesh_ = std::max(mesh_, taus_[k + 1] - taus_[k]);
  }
  if (!std::isfinite(taus_.back())) throw InvalidArgument("Partition: non-finite horizon");
  const double ratio = static_cast<double>(count()) * mesh_;
  if (ratio > max_mesh_ratio * horizon() * (1.0 + 1e-12)) {
    throw InvalidArgument("Partition: N * mesh exceeds the configured bound");
  }
}

Partition Partition::uniform(double T, std::size_t N) {
  if (N == 0) throw InvalidArgument("Partition::uniform: N must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("Partition::uniform: T must be positive");
  std::vector<double> taus(N + 1);
  for (std::size_t k = 0; k <= N; ++k) {
    taus[k] = T * static_cast<double>(k) / static_cast<double>(N);
  }
  taus[N] = T;
  return Partition(std::move(taus));
}

std::size_t Partition::index_at(double t) const {
  if (taus_.empty()) throw InvalidArgument("Partition: empty");
  if (t <= 0.0) return 0;
  if (t >= taus_.back()) return count();
  const auto it = std::upper_bound(taus_.begin(), taus_.end(), t);
  return static_cast<std::size_t>(it - taus_.begin()) - 1;
}

bool Partition::is_mesh_point(double t, std::size_t& index) const {
  const std::size_t k = index_at(t);
  if (taus_[k] == t) {
    index = k;
    return true;
  }
  return false;
}

IncrementStream::IncrementStream(std::size_t d, std::size_t count) { reset(d, count); }

void IncrementStream::reset(std::size_t d, std::size_t count) {
  if (d == 0) throw InvalidArgument("IncrementStream: dimension must be >= 1");
  d_ = d;
  count_ = count;
  xi_.assign(d * count, 0.0);
  Xi_.assign(d * d * count, 0.0);
}

bool IncrementStream::level2_zero() const noexcept {
  return std::all_of(Xi_.begin(), Xi_.end(), [](double v) { return v == 0.0; });
}

Convention parse_convention(const std::string& name) {
  if (name == "earlier_later") return Convention::EarlierLater;
  if (name == "later_earlier") return Convention::LaterEarlier;
  throw InvalidArgument("unknown convention '" + name + "' (expected earlier_later or later_earlier)");
}

std::string to_string(Convention c) {
  return c == Convention::EarlierLater ? "earlier_later" : "later_earlier";
}

RoughStepFunction RoughStepFunction::build(Partition partition, IncrementStream increments,
                                           Convention convention) {
  if (partition.count() != increments.count()) {
    throw InvalidArgument("RoughStepFunction::build: partition has " +
                          std::to_string(partition.count()) + " cells but stream has " +
                          std::to_string(increments.count()) + " increments");
  }
  RoughStepFunction rsf;
  rsf.partition_ = std::move(partition);
  rsf.increments_ = std::move(increments);
  rsf.convention_ = convention;

  const std::size_t d = rsf.increments_.dim();
  const std::size_t N = rsf.increments_.count();
  rsf.prefixX_.assign((N + 1) * d, 0.0);
  rsf.prefixXX_.assign((N + 1) * d * d, 0.0);

  const double* xi = rsf.increments_.xi_data().data();
  const double* Xi = rsf.increments_.Xi_data().data();
  for (std::size_t k = 0; k < N; ++k) {
    const double* x = rsf.prefixX_.data() + k * d;
    double* xn = rsf.prefixX_.data() + (k + 1) * d;
    const double* xx = rsf.prefixXX_.data() + k * d * d;
    double* xxn = rsf.prefixXX_.data() + (k + 1) * d * d;
    const double* step = xi + k * d;
    const double* area = Xi + k * d * d;
    for (std::size_t a = 0; a < d; ++a) {
      xn[a] = x[a] + step[a];
      for (std::size_t b = 0; b < d; ++b) {
        const double cross =
            convention == Convention::EarlierLater ? x[a] * step[b] : step[a] * x[b];
        xxn[a * d + b] = xx[a * d + b] + cross + area[a * d + b];
      }
    }
  }
  return rsf;
}

void RoughStepFunction::increment_into(std::size_t l, std::size_t k, std::span<double> a,
                                       std::span<double> M) const {
  const std::size_t d = dim();
  if (l > k || k > count()) throw InvalidArgument("increment: need l <= k <= N");
  if (k == l + 1) {
    // Single cell: return the stored increments without rounding.
    const auto step = increments_.xi(l);
    const auto area = increments_.Xi(l);
    for (std::size_t i = 0; i < d; ++i) {
      a[i] = step(i);
      for (std::size_t j = 0; j < d; ++j) M[i * d + j] = area(i, j);
    }
    return;
  }
  const double* xl = prefixX_.data() + l * d;
  const double* xk = prefixX_.data() + k * d;
  const double* xxl = prefixXX_.data() + l * d * d;
  const double* xxk = prefixXX_.data() + k * d * d;
  for (std::size_t i = 0; i < d; ++i) a[i] = xk[i] - xl[i];
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double cross = convention_ == Convention::EarlierLater ? xl[i] * a[j] : a[i] * xl[j];
      M[i * d + j] = xxk[i * d + j] - xxl[i * d + j] - cross;
    }
  }
}

TensorPair RoughStepFunction::increment_index(std::size_t l, std::size_t k) const {
  TensorPair out = TensorPair::zero(dim());
  increment_into(l, k, std::span<double>(out.a.data(), dim()),
                 std::span<double>(out.M.data(), dim() * dim()));
  return out;
}

TensorPair RoughStepFunction::increment(double s, double t) const {
  if (s > t) throw InvalidArgument("increment: require s <= t");
  return increment_index(partition_.index_at(s), partition_.index_at(t));
}

TensorPair RoughStepFunction::value(double t) const {
  const std::size_t k = partition_.index_at(t);
  return TensorPair(Vector(X(k)), Matrix(XX(k)));
}

namespace {

bool is_uniform(const Partition& p) {
  const double w = p.width(0);
  for (std::size_t j = 1; j < p.count(); ++j) {
    if (std::abs(p.width(j) - w) > 1e-12 * w) return false;
  }
  return true;
}

}  // namespace

HolderNorm discrete_holder_parts(const RoughStepFunction& rsf, double gamma, std::size_t stride) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw InvalidArgument("discrete_holder_norm: gamma must lie in (0, 1]");
  }
  if (stride == 0) throw InvalidArgument("discrete_holder_norm: stride must be >= 1");
  const auto& part = rsf.partition();
  const std::size_t N = rsf.count();
  const std::size_t d = rsf.dim();

  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k <= N; k += stride) idx.push_back(k);
  if (idx.back() != N) idx.push_back(N);

  // Uniform meshes share denominators by lag.
  const bool uniform = stride == 1 && is_uniform(part);
  std::vector<double> lag_pow;
  if (uniform) {
    lag_pow.resize(N + 1, 0.0);
    for (std::size_t lag = 1; lag <= N; ++lag) {
      lag_pow[lag] = std::pow(part.tau(lag) - part.tau(0), gamma);
    }
  }

  std::vector<double> a(d), M(d * d);
  double best1 = 0.0;
  double best2 = 0.0;
  for (std::size_t ii = 0; ii < idx.size(); ++ii) {
    const std::size_t j = idx[ii];
    for (std::size_t kk = ii + 1; kk < idx.size(); ++kk) {
      const std::size_t k = idx[kk];
      rsf.increment_into(j, k, a, M);
      double n1 = 0.0;
      for (double v : a) n1 += v * v;
      double n2 = 0.0;
      for (double v : M) n2 += v * v;
      const double denom = uniform ? lag_pow[k - j] : std::pow(part.tau(k) - part.tau(j), gamma);
      best1 = std::max(best1, std::sqrt(n1) / denom);
      best2 = std::max(best2, std::sqrt(std::sqrt(n2)) / denom);
    }
  }
  HolderNorm out;
  out.level1 = best1;
  out.level2 = best2;
  out.value = best1 + best2;
  out.lower_bound = stride > 1;
  return out;
}

double discrete_holder_norm(const RoughStepFunction& rsf, double gamma, std::size_t stride) {
  return discrete_holder_parts(rsf, gamma, stride).value;
}

void write_stream_csv(std::ostream& os, const Partition& partition, const IncrementStream& stream) {
  if (partition.count() != stream.count()) {
    throw InvalidArgument("write_stream_csv: partition/stream length mismatch");
  }
  const std::size_t d = stream.dim();
  os << "t_start,t_end";
  for (std::size_t i = 0; i < d; ++i) os << ",xi_" << (i + 1);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) os << ",Xi_" << (i + 1) << (j + 1);
  }
  os << '\n';
  os << std::setprecision(17);
  for (std::size_t k = 0; k < stream.count(); ++k) {
    os << partition.tau(k) << ',' << partition.tau(k + 1);
    const auto x = stream.xi(k);
    const auto X = stream.Xi(k);
    for (std::size_t i = 0; i < d; ++i) os << ',' << x(i);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) os << ',' << X(i, j);
    }
    os << '\n';
  }
}

void write_stream_csv(const std::string& path, const Partition& partition,
                      const IncrementStream& stream) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_stream_csv(os, partition, stream);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

StreamCsv read_stream_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("stream CSV: missing header row");
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "t_start" || header[1] != "t_end") {
    throw InvalidArgument("stream CSV: header must begin with t_start,t_end");
  }
  std::size_t d = 0;
  while (2 + d < header.size() && header[2 + d] == "xi_" + std::to_string(d + 1)) ++d;
  if (d == 0) throw InvalidArgument("stream CSV: no xi_ columns");
  if (header.size() != 2 + d + d * d) {
    throw InvalidArgument("stream CSV: expected " + std::to_string(d * d) + " Xi columns");
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const std::string expect = "Xi_" + std::to_string(i + 1) + std::to_string(j + 1);
      if (header[2 + d + i * d + j] != expect) {
        throw InvalidArgument("stream CSV: expected column " + expect);
      }
    }
  }

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw InvalidArgument("stream CSV: wrong field count on line " + std::to_string(line_no));
    }
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      try {
        row[c] = std::stod(fields[c]);
      } catch (const std::exception&) {
        throw InvalidArgument("stream CSV: bad number on line " + std::to_string(line_no));
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidArgument("stream CSV: no data rows");

  std::vector<double> taus;
  taus.push_back(rows.front()[0]);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k][0] != taus.back()) {
      throw InvalidArgument("stream CSV: cells are not contiguous at row " + std::to_string(k + 1));
    }
    taus.push_back(rows[k][1]);
  }
  StreamCsv out{Partition(std::move(taus)), IncrementStream(d, rows.size())};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto x = out.stream.xi(k);
    auto X = out.stream.Xi(k);
    for (std::size_t i = 0; i < d; ++i) x(i) = rows[k][2 + i];
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) X(i, j) = rows[k][2 + d + i * d + j];
    }
  }
  return out;
}

StreamCsv read_stream_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  return read_stream_csv(is);
}

}  // namespace roughsim
