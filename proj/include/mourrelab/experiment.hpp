#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mourrelab/lattice.hpp"
#include "mourrelab/potential.hpp"

namespace mourrelab {

inline constexpr const char* kVersion = "0.1.0";

enum class Experiment { TorusLemma, CommutatorIdentity, HypothesisCheck, Lemma1, Mourre, LambdaScan, Weyl, Spectrum, Dos };
enum class OutputFormat { Csv, Json };

std::string_view to_string(Experiment e);
std::optional<Experiment> parse_experiment(std::string_view name);
const std::vector<std::string_view>& experiment_names();

struct ExperimentConfig {
  Experiment experiment = Experiment::TorusLemma;
  int dim = 1;
  int half_side = 0;  // L; 0 means "derive from the potential"
  Boundary boundary = Boundary::Dirichlet;
  std::optional<int> base_scale;     // M
  std::optional<int> annulus_count;  // K
  double plateau_radius = 0.5;
  bool stationary = false;           // i.i.d. on every site instead of bumps
  std::optional<CouplingDistribution> distribution;
  double lambda = 0.0;
  std::vector<double> lambda_grid;
  double a = -0.5, b = 0.5;
  bool has_interval = false;
  std::vector<std::uint64_t> seeds{1};
  std::vector<double> deltas;
  int grid = 256;
  int collar = 5;
  double mass_cutoff = 0.01;
  std::vector<double> energies;
  std::vector<double> couplings;
  int ell = 100;
  std::vector<int> windows;
  double window_plateau = 0.2;
  double residual_threshold = 0.15;
  double linearity_tolerance = 0.2;
  int samples = 100;
  int bins = 50;
  std::string output_path;
  OutputFormat format = OutputFormat::Csv;
  nlohmann::json source;  // the parsed document, echoed into the manifest
};

// Strict parse: unknown keys, out-of-range values and missing required fields
// are collected and thrown together as a ConfigError. `experiment_override`
// (from the subcommand) fills in or must agree with the "experiment" key.
ExperimentConfig validate(std::string_view config_text, std::optional<Experiment> experiment_override = std::nullopt);

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
};

struct RunManifest {
  nlohmann::json config;
  std::string version = kVersion;
  std::string experiment;
  std::vector<std::uint64_t> seeds;
  double wall_time_seconds = 0.0;
  std::vector<CheckResult> checks;
  std::vector<std::string> data_files;

  bool pass() const;
  nlohmann::json to_json() const;
};

using Cell = std::variant<std::int64_t, std::uint64_t, double, std::string, bool>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

struct ExperimentResult {
  Table table;
  std::vector<CheckResult> checks;
  std::optional<nlohmann::json> sidecar;  // extra JSON document, written to <output><sidecar_suffix>
  std::string sidecar_suffix;
};

std::string_view to_string(Boundary b);
std::string format_cell(const Cell& cell);
// Default data path "<experiment>.<csv|json>" when none is configured.
std::string data_path(const ExperimentConfig& config);

// Computes an experiment without touching the filesystem.
ExperimentResult execute(const ExperimentConfig& config);

// Executes and writes the data file, optional sidecar and `<output>.manifest.json`.
RunManifest run(const ExperimentConfig& config);

}  // namespace mourrelab
