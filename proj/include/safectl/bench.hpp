#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "safectl/adversary.hpp"
#include "safectl/online.hpp"

namespace safectl {

/// Contents of a model file. Matrices are kept as written: continuous-time
/// A and B when `continuous` is set, discrete-time otherwise. D is always
/// the discrete-time disturbance matrix.
struct Model {
  std::string name;
  std::string description;
  bool continuous = false;
  double dt = 1.0;
  Matrix A, B, C, D, E;
  double gamma = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  double w_max = 1.0;
  double delta = 0.1;

  /// Discrete-time plant; A and B pass through zero-order hold when continuous.
  LtiSystem plant() const;
};

/// Throws ParseError on malformed JSON and SchemaError on missing fields,
/// non-rectangular matrices or non-positive scalars.
Model parse_model(const std::string& text);
std::string write_model(const Model& model);

Model read_model_file(const std::filesystem::path& path);
void write_model_file(const Model& model, const std::filesystem::path& path);

struct LoadedModel {
  Model model;
  LtiSystem plant;
};

/// Reads, discretizes and validates a model, including stabilizability.
LoadedModel load_model(const std::filesystem::path& path);

enum class K1Source { Stationary, File };

struct ExperimentConfig {
  std::string model_path;
  long horizon = 0;
  AttackKind attack = AttackKind::Arbitrary;
  std::optional<long> dos_start;  // default T/4
  std::optional<long> dos_end;    // default T/2
  // Unset values fall back to the model file.
  std::optional<double> gamma, mu, sigma, w_max, delta;
  double m = 1.0;
  bool estimate_m = false;
  K1Source k1_source = K1Source::Stationary;
  std::optional<double> gamma_init;  // defaults to gamma
  std::string k1_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  long trace_stride = 0;  // 0 picks 1 for T ≤ 1000 and 10 beyond
  bool verify = true;     // H∞ check of every gain
  bool certify = true;    // strong-stability certificate every step
};

/// Parameters after model defaults were applied.
struct ResolvedRun {
  double gamma = 0.0, mu = 0.0, sigma = 0.0, w_max = 0.0, delta = 0.0;
  long stride = 1;
  AttackConfig attack;
  CostPerturbConfig costs;
  OnlineConfig online;
};

ResolvedRun resolve(const ExperimentConfig& cfg, const Model& model);

struct RunResult {
  ResolvedRun settings;
  RegretTrace trace;
  std::vector<HistoryEntry> history;
  BoundConstants constants;
  std::optional<Refinement> refinement;
  std::size_t constant_recomputations = 0;
  long violations = 0;
  long certificate_failures = 0;
  std::string certificate_error;
  double sequential_max = 0.0;
  long sequential_exceedances = 0;
  long dos_steps = 0;
  double dos_residual = 0.0;  // max ‖x_{t+1} − A x_t‖ inside the window
  double J1 = 0.0;
  double trace_ddt = 0.0;
  std::optional<RegretValue> final_regret;
  std::optional<double> final_bound;
  // set when a step threw; the trace holds everything before it
  std::optional<Error> failure;
  long failed_step = 0;
};

/// Algorithm loop without file output. Errors are captured in the result.
RunResult run_simulation(const LtiSystem& sys, const Model& model, const ExperimentConfig& cfg,
                         const DisturbanceGenerator* generator = nullptr);

/// Runs one experiment and writes trace.csv, summary.json and
/// config.echo.json into cfg.out_dir. Rethrows a step failure after the
/// partial outputs are flushed.
RunResult run_experiment(const ExperimentConfig& cfg);

inline constexpr const char* kTraceHeader = "t,J,J_star,regret,regret_norm,bound,pdiff,specrad,hinf,nu";

std::string trace_csv(const RegretTrace& trace);

/// (t, bound_t) for t ∈ [t*, T] from a summary.json written by run_experiment.
/// Throws HorizonBelowBurnIn when T < t*.
std::string emit_bound_curve(const std::filesystem::path& summary_path);

/// 2 for configuration and validation problems, 3 for runtime infeasibility.
int exit_code_for(ErrorKind kind);

}  // namespace safectl
