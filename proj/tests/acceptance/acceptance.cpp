#include "roughsim/diagnostics.hpp"
#include "roughsim/experiment.hpp"
#include "roughsim/lift.hpp"
#include "roughsim/rde_solver.hpp"

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

using namespace roughsim;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

fs::path scenario_dir() {
  if (const char* env = std::getenv("ROUGHSIM_SCENARIO_DIR")) {
    if (*env) return env;
  }
  return ROUGHSIM_SCENARIO_DIR;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double pair_error(const TensorPair& p, const TensorPair& q) {
  return std::max((p.a - q.a).cwiseAbs().maxCoeff(), (p.M - q.M).cwiseAbs().maxCoeff());
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::map<std::string, ScenarioResult> cache;

const ScenarioResult& scenario(const std::string& file) {
  auto it = cache.find(file);
  if (it != cache.end()) return it->second;
  const auto t0 = Clock::now();
  auto res = run_scenario(load_config(scenario_dir() / file));
  std::cerr << "  " << file << ": " << (res.pass() ? "pass" : "fail") << " in " << seconds_since(t0) << " s\n";
  for (const auto& c : res.checks) {
    if (!c.pass) std::cerr << "    failed " << c.name << ": value=" << c.value << " target=" << c.target << '\n';
  }
  return cache.emplace(file, std::move(res)).first->second;
}

const Check* find_check(const ScenarioResult& r, const std::string& name) {
  for (const auto& c : r.checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::string describe(const ScenarioResult& r) {
  std::size_t ok = 0;
  for (const auto& c : r.checks) ok += c.pass;
  return r.scenario + " " + std::to_string(ok) + "/" + std::to_string(r.checks.size()) + " checks";
}

RoughStepFunction brownian_path(std::size_t d, std::size_t n, std::uint64_t seed, Xi2Rule rule) {
  NoiseSpec spec;
  spec.kind = NoiseKind::Brownian;
  spec.d = d;
  spec.xi2 = rule;
  validate(spec);
  const auto p = Partition::uniform(1.0, n);
  return RoughStepFunction::build(p, generate(spec, p, seed));
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  SeedLineage rng(101, 0);
  NoiseSpec spec;
  spec.kind = NoiseKind::Brownian;
  spec.d = 3;
  spec.xi2 = Xi2Rule::refined(4);
  validate(spec);
  const std::size_t n = 512;
  Vector w(n);
  for (auto& v : w) v = 0.5 + rng.uniform();
  std::vector<double> taus(n + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) taus[j + 1] = taus[j] + w(j) / n;
  const Partition part(taus);
  const auto rsf = std::make_shared<const RoughStepFunction>(RoughStepFunction::build(part, generate(spec, part, 7)));
  const auto lrp = lift(rsf);
  const double T = part.horizon();
  double inc_err = 0.0, lift_err = 0.0, round_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    std::size_t k[3] = {rng.below(n + 1), rng.below(n + 1), rng.below(n + 1)};
    std::sort(k, k + 3);
    inc_err = std::max(inc_err, pair_error(rsf->increment_index(k[0], k[2]),
                                           chen_mul(rsf->increment_index(k[0], k[1]), rsf->increment_index(k[1], k[2]))));
    double t[3] = {rng.uniform() * T, rng.uniform() * T, rng.uniform() * T};
    std::sort(t, t + 3);
    const TensorPair whole = lrp.eval(t[0], t[2]);
    lift_err = std::max(lift_err, pair_error(whole, chen_mul(lrp.eval(t[0], t[1]), lrp.eval(t[1], t[2]))));
    const auto dec = decompose(whole);
    round_err = std::max(round_err, pair_error(recompose(dec.g, dec.z), whole));
  }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "chen_increment=" << inc_err << " chen_lift=" << lift_err << " round_trip=" << round_err << " time=" << secs
     << "s";
  return {inc_err <= 1e-10 && lift_err <= 1e-10 && round_err <= 1e-14 && secs < 10.0, os.str()};
}

Outcome from_scenario(const std::string& file, double time_limit = 0.0) {
  const auto t0 = Clock::now();
  const auto& r = scenario(file);
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << describe(r);
  bool ok = r.pass();
  if (time_limit > 0.0) {
    os << " time=" << secs << "s";
    ok = ok && secs < time_limit;
  }
  return {ok, os.str()};
}

Outcome criterion4() {
  const auto& a = scenario("fastslow_markov.json");
  const auto& b = scenario("fastslow_markov_cyclic3.json");
  const bool witness = find_check(b, "area_significance") && find_check(b, "area_vs_series");
  return {a.pass() && b.pass() && witness, describe(a) + ", cyclic3 " + describe(b)};
}

Outcome criterion5() {
  const auto& r = scenario("modified_equation_rate.json");
  const Check* slope = find_check(r, "median_slope");
  const Check* frac = find_check(r, "fraction_within_c_cal_K");
  std::ostringstream os;
  if (slope) os << "median_slope=" << slope->value;
  if (frac) os << " within_c_cal_K=" << frac->value;
  return {slope && frac && slope->pass && frac->pass, os.str()};
}

Outcome criterion6() {
  const auto& t = scenario("tightness_probe.json");
  const auto& f = scenario("subdiffusion_fbm.json");
  std::ostringstream os;
  const Check* g1 = find_check(t, "gamma_hat_level1");
  const Check* g2 = find_check(t, "gamma_hat_level2");
  const Check* ctrl = find_check(t, "control_growth");
  const Check* fb = find_check(f, "gamma_hat_level1");
  if (g1 && g2) os << "brownian gamma_hat=" << g1->value << "/" << g2->value;
  if (fb) os << " fbm gamma_hat=" << fb->value;
  if (ctrl) os << " control_growth=" << ctrl->value;
  return {t.pass() && f.pass() && g1 && g2 && ctrl && fb, os.str()};
}

Outcome criterion7() {
  double mesh_err = 0.0;
  for (const char* file : {"lemma31_random_walk.json", "theta_scheme_gbm.json", "fastslow_markov.json",
                           "fastslow_markov_cyclic3.json", "modified_equation_rate.json", "tightness_probe.json",
                           "subdiffusion_fbm.json"}) {
    const auto cfg = load_config(scenario_dir() / file);
    const auto part = Partition::uniform(cfg.partition.T, std::min<std::size_t>(cfg.n(), 4096));
    const auto rsf = RoughStepFunction::build(part, generate(cfg.noise, part, cfg.mc.master_seed), cfg.convention);
    const auto lrp = lift(rsf);
    for (std::size_t j = 0; j <= rsf.count(); ++j) {
      mesh_err = std::max(mesh_err, pair_error(lrp.eval(0.0, part.tau(j)), TensorPair(Vector(rsf.X(j)), Matrix(rsf.XX(j)))));
    }
  }
  std::vector<double> ns, ratios;
  const double gamma = 0.45;
  const std::size_t per_n = 4;
  for (std::size_t n = 64; n <= 4096; n *= 2) {
    double sum = 0.0;
    for (std::size_t s = 0; s < per_n; ++s) {
      const auto rsf = brownian_path(2, n, 700 + s, Xi2Rule::refined(8));
      sum += holder_norm_estimate(lift(rsf), gamma, 6).value / discrete_holder_parts(rsf, gamma).value;
    }
    ns.push_back(static_cast<double>(n));
    ratios.push_back(sum / per_n);
  }
  const auto kt = kendall_tau(ns, ratios);
  std::ostringstream os;
  os << "mesh_agreement=" << mesh_err << " ratio=[" << *std::min_element(ratios.begin(), ratios.end()) << ", "
     << *std::max_element(ratios.begin(), ratios.end()) << "] kendall_tau=" << kt.tau << " p=" << kt.p_increasing;
  return {mesh_err <= 1e-12 && kt.p_increasing > 0.05, os.str()};
}

Outcome criterion8() {
  const auto cfg = load_config(scenario_dir() / "modified_equation_rate.json");
  const auto bundle = FieldRegistry::instance().make(cfg.field.name, cfg.field.params);
  bool identical = true;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto part = Partition::uniform(cfg.partition.T, 1024);
    const auto rsf = RoughStepFunction::build(part, generate(cfg.noise, part, cfg.mc.master_seed, seed));
    const auto a = run(bundle, rsf, cfg.y0);
    const auto b = solve_rde(bundle, lift(rsf), cfg.y0);
    identical = identical && a.values.size() == b.values.size() &&
                std::memcmp(a.values.data(), b.values.data(), sizeof(double) * a.values.size()) == 0;
  }
  const auto& r = scenario("modified_equation_rate.json");
  const Check* band = find_check(r, "cross_solver_consistency");
  std::ostringstream os;
  os << "bit_identical=" << (identical ? "yes" : "no");
  if (band) os << " band_error=" << band->value << " band=" << band->target;
  return {identical && band && band->pass, os.str()};
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Entry> entries = {
      {1, "algebraic exactness", criterion1},
      {2, "random walk limit nu = -D/2", [] { return from_scenario("lemma31_random_walk.json", 300.0); }},
      {3, "theta-scheme limits", [] { return from_scenario("theta_scheme_gbm.json"); }},
      {4, "fast-slow surrogate", criterion4},
      {5, "modified equation rate", criterion5},
      {6, "discrete Kolmogorov criterion", criterion6},
      {7, "lift fidelity", criterion7},
      {8, "cross-solver consistency", criterion8},
  };
  int failures = 0;
  for (const auto& e : entries) {
    Outcome o;
    try {
      o = e.fn();
    } catch (const std::exception& ex) {
      o = {false, std::string("error: ") + ex.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << e.id << " (" << e.name << "): " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
