#include "roughsim/diagnostics.hpp"
#include "roughsim/experiment.hpp"
#include "roughsim/lift.hpp"
#include "roughsim/rng.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

using namespace roughsim;
using nlohmann::json;

namespace {

RoughStepFunction load_stream(const std::string& path, const std::string& convention) {
  auto csv = read_stream_csv(path);
  return RoughStepFunction::build(std::move(csv.partition), std::move(csv.stream), parse_convention(convention));
}

double pair_error(const TensorPair& p, const TensorPair& q) {
  return std::max((p.a - q.a).cwiseAbs().maxCoeff(), (p.M - q.M).cwiseAbs().maxCoeff());
}

int cmd_lift_check(const std::string& path, const std::string& convention, double gamma, int levels,
                   std::size_t triples, const std::string& polyline, std::size_t samples) {
  auto rsf = std::make_shared<const RoughStepFunction>(load_stream(path, convention));
  const auto lrp = lift(rsf);
  const auto& part = rsf->partition();

  double mesh_err = 0.0;
  for (std::size_t j = 0; j <= rsf->count(); ++j) {
    const TensorPair p = lrp.eval(0.0, part.tau(j));
    const TensorPair q(Vector(rsf->X(j)), Matrix(rsf->XX(j)));
    mesh_err = std::max(mesh_err, pair_error(p, q));
  }
  SeedLineage rng(0, 0, 0);
  double chen_err = 0.0;
  const double T = part.horizon();
  for (std::size_t i = 0; i < triples; ++i) {
    double t[3] = {rng.uniform() * T, rng.uniform() * T, rng.uniform() * T};
    std::sort(t, t + 3);
    const auto whole = lrp.eval(t[0], t[2]);
    const auto split = chen_mul(lrp.eval(t[0], t[1]), lrp.eval(t[1], t[2]));
    chen_err = std::max(chen_err, pair_error(whole, split));
  }
  const auto discrete = discrete_holder_parts(*rsf, gamma);
  const auto fine = holder_norm_estimate(lrp, gamma, levels);
  const bool ok = mesh_err <= 1e-12 && chen_err <= 1e-10;
  json out = {{"cells", rsf->count()},
              {"dim", rsf->dim()},
              {"mesh_agreement_max_error", mesh_err},
              {"chen_max_error", chen_err},
              {"chen_triples", triples},
              {"gamma", gamma},
              {"levels", levels},
              {"discrete_holder_norm", discrete.value},
              {"lift_holder_estimate", fine.value},
              {"ratio", discrete.value > 0.0 ? fine.value / discrete.value : 0.0},
              {"pass", ok}};
  std::cout << out.dump(2) << '\n';
  if (!polyline.empty()) {
    std::ofstream f(polyline);
    if (!f) throw std::runtime_error("cannot write '" + polyline + "'");
    write_polyline_csv(f, lrp, samples);
  }
  return ok ? 0 : 2;
}

int cmd_holder(const std::string& path, const std::string& convention, double gamma, std::size_t stride) {
  const auto rsf = load_stream(path, convention);
  const auto h = discrete_holder_parts(rsf, gamma, stride);
  json out = {{"gamma", gamma},   {"level1", h.level1},           {"level2", h.level2},
              {"value", h.value}, {"lower_bound", h.lower_bound}, {"stride", stride},
              {"cells", rsf.count()}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_estimate_nu(const std::string& path) {
  const auto cfg = load_config(path);
  if (!cfg.has_noise) throw InvalidArgument("noise: required by estimate-nu");
  const auto part = Partition::uniform(cfg.partition.T, cfg.n());
  EnsembleOptions opts;
  opts.paths = cfg.mc.paths;
  opts.master_seed = cfg.mc.master_seed;
  opts.convention = cfg.convention;
  const auto est = estimate_nu(cfg.noise, part, opts);
  json out = {{"noise", to_string(cfg.noise.kind)},
              {"convention", to_string(cfg.convention)},
              {"paths", est.paths},
              {"n", part.count()},
              {"T", est.T},
              {"nu_hat", matrix_to_json(est.nu)},
              {"nu_se", matrix_to_json(est.nu_se)},
              {"D_hat", matrix_to_json(est.D)},
              {"D_se", matrix_to_json(est.D_se)},
              {"martingale_assumption", !est.non_martingale}};
  if (est.nu.rows() >= 2) {
    out["area_hat"] = est.area;
    out["area_se"] = est.area_se;
  }
  if (!est.caveat.empty()) out["caveat"] = est.caveat;
  try {
    const auto lim = analytic_limit(cfg.noise);
    out["analytic"] = {{"D", matrix_to_json(lim.D)}, {"nu", matrix_to_json(lim.nu)}, {"derivation", lim.derivation}};
  } catch (const InvalidArgument&) {
  }
  std::cout << out.dump(2) << '\n';
  if (!cfg.outputs.report.empty()) {
    std::ofstream f(cfg.resolve(cfg.outputs.report));
    if (!f) throw std::runtime_error("cannot write '" + cfg.outputs.report + "'");
    f << out.dump(2) << '\n';
  }
  return 0;
}

int cmd_scenarios(const std::string& report_dir) {
  const auto rows = list_scenarios(report_dir);
  std::size_t wk = 8, ws = 6, wa = 6;
  for (const auto& r : rows) {
    wk = std::max(wk, r.info.key.size());
    ws = std::max(ws, r.status.size());
    wa = std::max(wa, r.info.anchor.size());
  }
  std::cout << std::left << std::setw(static_cast<int>(wk + 2)) << "scenario" << std::setw(static_cast<int>(ws + 2))
            << "status" << std::setw(static_cast<int>(wa + 2)) << "anchor"
            << "description\n";
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(static_cast<int>(wk + 2)) << r.info.key << std::setw(static_cast<int>(ws + 2))
              << r.status << std::setw(static_cast<int>(wa + 2)) << r.info.anchor << r.info.description << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"roughsim: rough path recursions, lifts and diffusion-limit experiments"};
  app.require_subcommand(1);

  std::string report_dir = default_report_dir().string();

  auto* run = app.add_subcommand("run", "Run an experiment config");
  std::string run_config;
  run->add_option("config", run_config, "Experiment JSON")->required();
  run->add_option("--report-dir", report_dir, "Directory for reports without an explicit path");

  auto* scen = app.add_subcommand("scenarios", "List scenarios with their last-run status");
  scen->add_option("--report-dir", report_dir, "Directory scanned for reports");

  auto* lc = app.add_subcommand("lift-check", "Check the lift of an increment stream CSV");
  std::string lc_path, convention = "earlier_later", polyline;
  double lc_gamma = 0.45;
  int levels = 6;
  std::size_t triples = 1000, samples = 8;
  lc->add_option("stream", lc_path, "Increment stream CSV")->required();
  lc->add_option("--gamma", lc_gamma, "Hoelder exponent")->check(CLI::Range(1e-9, 1.0));
  lc->add_option("--levels", levels, "Dyadic refinement levels")->check(CLI::Range(1, 16));
  lc->add_option("--triples", triples, "Random Chen triples");
  lc->add_option("--convention", convention, "earlier_later or later_earlier");
  lc->add_option("--polyline", polyline, "Write the realization as CSV (t, x_1..x_d)");
  lc->add_option("--samples", samples, "Polyline samples per cell")->check(CLI::PositiveNumber);

  auto* ho = app.add_subcommand("holder", "Discrete Hoelder norm of an increment stream CSV");
  std::string ho_path;
  double ho_gamma = 0.45;
  std::size_t stride = 1;
  ho->add_option("stream", ho_path, "Increment stream CSV")->required();
  ho->add_option("--gamma", ho_gamma, "Hoelder exponent in (0, 1]")->required();
  ho->add_option("--stride", stride, "Subsampling stride (values > 1 give a lower bound)")->check(CLI::PositiveNumber);
  ho->add_option("--convention", convention, "earlier_later or later_earlier");

  auto* en = app.add_subcommand("estimate-nu", "Monte Carlo estimate of the area correction nu");
  std::string en_config;
  en->add_option("config", en_config, "Experiment JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_experiment(run_config, std::cout, std::cerr, report_dir);
    if (*scen) return cmd_scenarios(report_dir);
    if (*lc) return cmd_lift_check(lc_path, convention, lc_gamma, levels, triples, polyline, samples);
    if (*ho) return cmd_holder(ho_path, convention, ho_gamma, stride);
    if (*en) return cmd_estimate_nu(en_config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
