#pragma once

// Experiment configuration, Monte Carlo ensembles and scenario dispatch.

#include "roughsim/noise_models.hpp"
#include "roughsim/recursion_engine.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace roughsim {

inline constexpr int kSchemaVersion = 1;

struct FieldConfig {
  std::string name = "linear";
  nlohmann::json params = nlohmann::json::object();
};

struct PartitionConfig {
  double T = 1.0;
  std::optional<std::size_t> n;
  std::vector<std::size_t> n_grid;
};

struct McConfig {
  std::size_t paths = 1000;
  std::uint64_t master_seed = 0;
};

struct OutputConfig {
  std::string report;
  std::string trajectory_csv;
  std::string ensemble_csv;
  std::string stream_csv;
  std::string curve_csv;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string scenario;
  NoiseSpec noise;
  bool has_noise = false;
  FieldConfig field;
  PartitionConfig partition;
  Vector y0;
  McConfig mc;
  OutputConfig outputs;
  Convention convention = Convention::EarlierLater;
  /// Scenario-specific parameters; each scenario rejects keys it does not know.
  nlohmann::json params = nlohmann::json::object();
  /// Merged acceptance thresholds (fixture file first, inline keys override).
  nlohmann::json acceptance = nlohmann::json::object();
  /// Directory relative paths are resolved against.
  std::filesystem::path base_dir = ".";

  std::size_t n() const;
  std::filesystem::path resolve(const std::string& p) const;
};

/// Parses and validates; errors throw InvalidArgument whose message starts
/// with the offending field path (e.g. "mc.paths: ...").
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

NoiseSpec parse_noise(const nlohmann::json& j, const std::string& path = "noise");

struct Check {
  std::string name;
  double value = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct ScenarioResult {
  std::string scenario;
  nlohmann::json report = nlohmann::json::object();
  std::vector<Check> checks;
  bool pass() const;
  nlohmann::json to_json() const;
};

/// Terminal values and terminal signature statistics of an ensemble run.
struct EnsembleResult {
  std::size_t paths = 0;
  std::size_t e = 0;
  std::vector<double> terminal;  // paths x e, NaN for aborted paths
  std::size_t aborted = 0;
  std::optional<NuEstimate> nu;
  double abort_fraction() const { return paths == 0 ? 0.0 : static_cast<double>(aborted) / paths; }
  /// Terminal coordinate k of the non-aborted paths.
  std::vector<double> column(std::size_t k) const;
};

struct EnsembleOptions {
  std::size_t paths = 1000;
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;
  bool compute_nu = true;
  Convention convention = Convention::EarlierLater;
  /// Optional per-stream transformation applied after generation.
  std::function<void(IncrementStream&)> transform;
  std::size_t workers = 0;
};

/// Path i draws from SeedLineage(master_seed, i, stream_id), runs the
/// recursion and stores its terminal value.
EnsembleResult run_ensemble(const NoiseSpec& noise, const Partition& partition, const VectorFieldBundle& bundle,
                            const Vector& y0, const EnsembleOptions& opts);

/// Ensemble nu estimate without running a recursion.
NuEstimate estimate_nu(const NoiseSpec& noise, const Partition& partition, const EnsembleOptions& opts);

/// Scenario registry.
struct ScenarioInfo {
  std::string key;
  std::string description;
  std::string anchor;
};

std::vector<ScenarioInfo> scenario_catalog();

/// Runs the named scenario of `cfg`.
ScenarioResult run_scenario(const ExperimentConfig& cfg);

/// Directory scanned for last-run reports; ROUGHSIM_REPORT_DIR or "reports".
std::filesystem::path default_report_dir();

struct ScenarioRow {
  ScenarioInfo info;
  std::string status;  // "pass", "fail" or "-"
};

/// Alphabetical rows with the status of the last report in `report_dir`.
std::vector<ScenarioRow> list_scenarios(const std::filesystem::path& report_dir);

/// Loads, runs, writes outputs. Returns 0 on success, 2 when an acceptance
/// check failed, 1 on error (message written to `err`).
int run_experiment(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err,
                   const std::filesystem::path& report_dir = default_report_dir());
int run_experiment(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err,
                   const std::filesystem::path& report_dir = default_report_dir());

/// Ensemble CSV "path_id,seed,y_1..y_e".
void write_ensemble_csv(std::ostream& os, const EnsembleResult& ens, std::uint64_t master_seed);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, const std::string& path);

}  // namespace roughsim
