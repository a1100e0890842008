#include "roughsim/experiment.hpp"

#include "roughsim/parallel.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>

namespace roughsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw InvalidArgument(path + ": " + msg);
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
}

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  require_object(j, path);
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) fail(join(path, key), "unknown key");
  }
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

std::uint64_t get_uint(const json& j, const std::string& path, std::uint64_t min_value) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  if (j.is_number_unsigned()) {
    const auto v = j.get<std::uint64_t>();
    if (v < min_value) fail(path, "must be >= " + std::to_string(min_value));
    return v;
  }
  const auto v = j.get<long long>();
  if (v < 0 || static_cast<std::uint64_t>(v) < min_value) {
    fail(path, "must be an integer >= " + std::to_string(min_value));
  }
  return static_cast<std::uint64_t>(v);
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

Vector vector_from_json(const json& j, const std::string& path) {
  if (j.is_number()) {
    Vector v(1);
    v(0) = get_number(j, path);
    return v;
  }
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = get_number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

Matrix matrix_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
  // A flat list is read as a column.
  if (j[0].is_number()) {
    Matrix m(static_cast<Eigen::Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = get_number(j[i], path + "[" + std::to_string(i) + "]");
    return m;
  }
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) fail(path, "rows must be non-empty arrays");
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || j[r].size() != cols) fail(rp, "rows must all have length " + std::to_string(cols));
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = get_number(j[r][c], rp + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

NoiseSpec parse_noise(const json& j, const std::string& path) {
  check_keys(j, path, {"kind", "d", "law", "dof", "scale", "hurst", "P", "v", "mu", "xi2"});
  NoiseSpec s;
  if (!j.contains("kind")) fail(join(path, "kind"), "required");
  try {
    s.kind = parse_noise_kind(get_string(j["kind"], join(path, "kind")));
  } catch (const InvalidArgument& e) {
    const std::string msg = e.what();
    fail(join(path, "kind"), msg.substr(msg.find(':') + 2));
  }
  if (j.contains("d")) s.d = get_uint(j["d"], join(path, "d"), 1);
  if (j.contains("law")) s.law = get_string(j["law"], join(path, "law"));
  if (j.contains("dof")) s.dof = get_number(j["dof"], join(path, "dof"));
  if (j.contains("scale")) s.scale = get_number(j["scale"], join(path, "scale"));
  if (j.contains("hurst")) s.hurst = get_number(j["hurst"], join(path, "hurst"));
  if (j.contains("P")) s.P = matrix_from_json(j["P"], join(path, "P"));
  if (j.contains("v")) {
    s.v = matrix_from_json(j["v"], join(path, "v"));
    if (!j.contains("d")) s.d = static_cast<std::size_t>(s.v.cols());
  }
  if (j.contains("mu")) s.mu = vector_from_json(j["mu"], join(path, "mu"));
  if (j.contains("xi2")) {
    const std::string xp = join(path, "xi2");
    const auto& x = j["xi2"];
    check_keys(x, xp, {"rule", "theta", "m"});
    const std::string rule = x.contains("rule") ? get_string(x["rule"], join(xp, "rule")) : "zero";
    if (rule == "zero") {
      s.xi2 = Xi2Rule::zero();
    } else if (rule == "theta") {
      if (!x.contains("theta")) fail(join(xp, "theta"), "required for rule 'theta'");
      s.xi2 = Xi2Rule::theta_rule(get_number(x["theta"], join(xp, "theta")));
    } else if (rule == "refined") {
      if (!x.contains("m")) fail(join(xp, "m"), "required for rule 'refined'");
      s.xi2 = Xi2Rule::refined(get_uint(x["m"], join(xp, "m"), 1));
    } else {
      fail(join(xp, "rule"), "unknown rule '" + rule + "' (expected zero, theta or refined)");
    }
  }
  try {
    validate(s);
  } catch (const InvalidArgument& e) {
    std::string msg = e.what();
    if (path != "noise" && msg.rfind("noise.", 0) == 0) msg = path + msg.substr(5);
    throw InvalidArgument(msg);
  }
  return s;
}

std::size_t ExperimentConfig::n() const {
  if (partition.n) return *partition.n;
  if (!partition.n_grid.empty()) return partition.n_grid.back();
  throw InvalidArgument("partition.n: required by scenario '" + scenario + "'");
}

fs::path ExperimentConfig::resolve(const std::string& p) const {
  fs::path q(p);
  return q.is_absolute() ? q : base_dir / q;
}

ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
  check_keys(j, "", {"schema_version", "scenario", "noise", "field", "partition", "y0", "mc", "outputs",
                     "convention", "params", "acceptance", "description"});
  ExperimentConfig c;
  c.base_dir = base_dir;
  if (!j.contains("schema_version")) fail("schema_version", "required");
  c.schema_version = static_cast<int>(get_uint(j["schema_version"], "schema_version", 1));
  if (c.schema_version != kSchemaVersion) {
    fail("schema_version", "unsupported version " + std::to_string(c.schema_version) + " (expected " +
                               std::to_string(kSchemaVersion) + ")");
  }
  if (!j.contains("scenario")) fail("scenario", "required");
  c.scenario = get_string(j["scenario"], "scenario");
  bool known = false;
  for (const auto& s : scenario_catalog()) known = known || s.key == c.scenario;
  if (!known) fail("scenario", "unknown scenario '" + c.scenario + "'");

  if (j.contains("noise")) {
    c.noise = parse_noise(j["noise"], "noise");
    c.has_noise = true;
  }
  if (j.contains("field")) {
    const auto& f = j["field"];
    check_keys(f, "field", {"name", "params"});
    if (!f.contains("name")) fail("field.name", "required");
    c.field.name = get_string(f["name"], "field.name");
    if (!FieldRegistry::instance().contains(c.field.name)) fail("field.name", "unknown field '" + c.field.name + "'");
    if (f.contains("params")) {
      require_object(f["params"], "field.params");
      c.field.params = f["params"];
    }
    FieldRegistry::instance().make(c.field.name, c.field.params);
  }
  if (j.contains("partition")) {
    const auto& p = j["partition"];
    check_keys(p, "partition", {"T", "n", "n_grid"});
    if (p.contains("T")) {
      c.partition.T = get_number(p["T"], "partition.T");
      if (!(c.partition.T > 0.0)) fail("partition.T", "must be positive");
    }
    if (p.contains("n")) c.partition.n = get_uint(p["n"], "partition.n", 1);
    if (p.contains("n_grid")) {
      const auto& g = p["n_grid"];
      if (!g.is_array() || g.empty()) fail("partition.n_grid", "expected a non-empty array");
      std::set<std::size_t> seen;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const std::string ip = "partition.n_grid[" + std::to_string(i) + "]";
        const auto n = get_uint(g[i], ip, 1);
        if (!is_power_of_two(n)) fail(ip, "must be a power of two");
        if (!seen.insert(n).second) fail(ip, "duplicate entry");
        c.partition.n_grid.push_back(n);
      }
      std::sort(c.partition.n_grid.begin(), c.partition.n_grid.end());
    }
  }
  if (j.contains("y0")) c.y0 = vector_from_json(j["y0"], "y0");
  if (j.contains("mc")) {
    const auto& m = j["mc"];
    check_keys(m, "mc", {"paths", "master_seed"});
    if (m.contains("paths")) c.mc.paths = get_uint(m["paths"], "mc.paths", 1);
    if (m.contains("master_seed")) c.mc.master_seed = get_uint(m["master_seed"], "mc.master_seed", 0);
  }
  if (j.contains("outputs")) {
    const auto& o = j["outputs"];
    check_keys(o, "outputs", {"report", "trajectory_csv", "ensemble_csv", "stream_csv", "curve_csv"});
    auto opt = [&](const char* key, std::string& dst) {
      if (o.contains(key)) dst = get_string(o[key], std::string("outputs.") + key);
    };
    opt("report", c.outputs.report);
    opt("trajectory_csv", c.outputs.trajectory_csv);
    opt("ensemble_csv", c.outputs.ensemble_csv);
    opt("stream_csv", c.outputs.stream_csv);
    opt("curve_csv", c.outputs.curve_csv);
  }
  if (j.contains("convention")) {
    try {
      c.convention = parse_convention(get_string(j["convention"], "convention"));
    } catch (const InvalidArgument&) {
      fail("convention", "expected 'earlier_later' or 'later_earlier'");
    }
  }
  if (j.contains("params")) {
    require_object(j["params"], "params");
    c.params = j["params"];
  }
  if (j.contains("acceptance")) {
    const auto& a = j["acceptance"];
    require_object(a, "acceptance");
    if (a.contains("fixture")) {
      const fs::path fp = c.resolve(get_string(a["fixture"], "acceptance.fixture"));
      std::ifstream in(fp);
      if (!in) fail("acceptance.fixture", "cannot open '" + fp.string() + "'");
      json fixture;
      try {
        in >> fixture;
      } catch (const json::exception& e) {
        fail("acceptance.fixture", std::string("invalid JSON: ") + e.what());
      }
      require_object(fixture, "acceptance.fixture");
      c.acceptance = fixture;
    }
    for (const auto& [key, value] : a.items()) {
      if (key != "fixture") c.acceptance[key] = value;
    }
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("config: cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

bool ScenarioResult::pass() const {
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  return true;
}

json ScenarioResult::to_json() const {
  json checks_json = json::array();
  for (const auto& c : checks) {
    checks_json.push_back({{"name", c.name}, {"value", c.value}, {"target", c.target},
                           {"tolerance", c.tolerance}, {"pass", c.pass}});
  }
  json out = report;
  out["scenario"] = scenario;
  out["checks"] = checks_json;
  out["status"] = pass() ? "pass" : "fail";
  return out;
}

std::vector<double> EnsembleResult::column(std::size_t k) const {
  std::vector<double> out;
  out.reserve(paths);
  for (std::size_t i = 0; i < paths; ++i) {
    const double v = terminal[i * e + k];
    if (std::isfinite(v)) out.push_back(v);
  }
  return out;
}

EnsembleResult run_ensemble(const NoiseSpec& noise_in, const Partition& partition, const VectorFieldBundle& bundle,
                            const Vector& y0, const EnsembleOptions& opts) {
  NoiseSpec noise = noise_in;
  validate(noise);
  if (noise.d != bundle.d) {
    throw InvalidArgument("noise.d: dimension " + std::to_string(noise.d) + " does not match field d = " +
                          std::to_string(bundle.d));
  }
  if (static_cast<std::size_t>(y0.size()) != bundle.e) {
    throw InvalidArgument("y0: expected " + std::to_string(bundle.e) + " entries");
  }
  if (opts.paths == 0) throw InvalidArgument("mc.paths: must be >= 1");
  const std::size_t workers = std::min(opts.workers == 0 ? worker_count() : opts.workers, opts.paths);

  EnsembleResult res;
  res.paths = opts.paths;
  res.e = bundle.e;
  res.terminal.assign(opts.paths * bundle.e, std::numeric_limits<double>::quiet_NaN());
  std::optional<NuAccumulator> acc;
  if (opts.compute_nu) acc.emplace(noise.d, opts.paths, partition.horizon());

  std::vector<DavieStepper> steppers;
  steppers.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) steppers.emplace_back(bundle);
  std::vector<IncrementStream> streams(workers, IncrementStream(noise.d, partition.count()));
  std::vector<NoiseWorkspace> spaces(workers);
  std::atomic<std::size_t> aborted{0};

  parallel_for(
      opts.paths,
      [&](std::size_t i, std::size_t w) {
        SeedLineage rng(opts.master_seed, i, opts.stream_id);
        auto& stream = streams[w];
        generate_into(noise, partition, rng, stream, spaces[w]);
        if (opts.transform) opts.transform(stream);
        if (acc) acc->set(i, stream, opts.convention);
        try {
          const Vector y = run_terminal(steppers[w], partition, stream, y0);
          std::copy(y.data(), y.data() + bundle.e, res.terminal.begin() + i * bundle.e);
        } catch (const IterateExplosion&) {
          aborted.fetch_add(1, std::memory_order_relaxed);
        }
      },
      workers);
  res.aborted = aborted.load();
  if (acc) res.nu = acc->finalize();
  return res;
}

NuEstimate estimate_nu(const NoiseSpec& noise_in, const Partition& partition, const EnsembleOptions& opts) {
  NoiseSpec noise = noise_in;
  validate(noise);
  if (opts.paths == 0) throw InvalidArgument("mc.paths: must be >= 1");
  const std::size_t workers = std::min(opts.workers == 0 ? worker_count() : opts.workers, opts.paths);
  NuAccumulator acc(noise.d, opts.paths, partition.horizon());
  std::vector<IncrementStream> streams(workers, IncrementStream(noise.d, partition.count()));
  std::vector<NoiseWorkspace> spaces(workers);
  parallel_for(
      opts.paths,
      [&](std::size_t i, std::size_t w) {
        SeedLineage rng(opts.master_seed, i, opts.stream_id);
        generate_into(noise, partition, rng, streams[w], spaces[w]);
        if (opts.transform) opts.transform(streams[w]);
        acc.set(i, streams[w], opts.convention);
      },
      workers);
  auto est = acc.finalize();
  if (noise.kind == NoiseKind::Fbm) {
    est.non_martingale = true;
    est.caveat = "non-martingale limit: interpret as E XX - sym baseline";
  }
  return est;
}

void write_ensemble_csv(std::ostream& os, const EnsembleResult& ens, std::uint64_t master_seed) {
  os << "path_id,seed";
  for (std::size_t k = 0; k < ens.e; ++k) os << ",y_" << (k + 1);
  os << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < ens.paths; ++i) {
    os << i << ',' << master_seed;
    for (std::size_t k = 0; k < ens.e; ++k) os << ',' << ens.terminal[i * ens.e + k];
    os << '\n';
  }
}

fs::path default_report_dir() {
  if (const char* env = std::getenv("ROUGHSIM_REPORT_DIR")) {
    if (*env) return fs::path(env);
  }
  return fs::path("reports");
}

std::vector<ScenarioRow> list_scenarios(const fs::path& report_dir) {
  std::vector<ScenarioRow> rows;
  for (const auto& info : scenario_catalog()) {
    ScenarioRow row{info, "-"};
    const fs::path p = report_dir / (info.key + ".json");
    std::ifstream in(p);
    if (in) {
      try {
        json j;
        in >> j;
        if (j.contains("status") && j["status"].is_string()) row.status = j["status"].get<std::string>();
      } catch (const json::exception&) {
        row.status = "unreadable";
      }
    }
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const ScenarioRow& a, const ScenarioRow& b) { return a.info.key < b.info.key; });
  return rows;
}

int run_experiment(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err, const fs::path& report_dir) {
  try {
    const ScenarioResult res = run_scenario(cfg);
    const json report = res.to_json();
    fs::path path;
    if (!cfg.outputs.report.empty()) {
      path = cfg.resolve(cfg.outputs.report);
    } else {
      path = report_dir / (cfg.scenario + ".json");
    }
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write report '" + path.string() + "'");
    f << report.dump(2) << '\n';
    for (const auto& c : res.checks) {
      out << (c.pass ? "PASS " : "FAIL ") << c.name << ": value=" << c.value << " target=" << c.target
          << " tol=" << c.tolerance << '\n';
    }
    out << cfg.scenario << ": " << (res.pass() ? "pass" : "fail") << " (report: " << path.string() << ")\n";
    return res.pass() ? 0 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int run_experiment(const fs::path& config_path, std::ostream& out, std::ostream& err, const fs::path& report_dir) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return run_experiment(cfg, out, err, report_dir);
}

}  // namespace roughsim
