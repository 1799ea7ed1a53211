#pragma once

// Scenario files (scenario.json) and the run orchestration behind the CLI.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kprox/casefile.hpp"
#include "kprox/distributions.hpp"
#include "kprox/fpk_oracle.hpp"
#include "kprox/network.hpp"
#include "kprox/prox.hpp"
#include "kprox/transform.hpp"

namespace kprox {

struct NetworkSource {
  enum class Kind { Case, Reduced, Table1 } kind = Kind::Case;
  std::string case_path;      // Case: .m or network.json
  std::string dynamics_path;  // Case: dynamics.json
  std::string reduced_path;   // Reduced: reduced_network.json
  int table1_n = 0;
  std::uint64_t table1_seed = 0;
  PhasePolicy phase_policy = PhasePolicy::Strict;  // Case only
};

struct MetricsConfig {
  long every = 0;              // snapshot cadence in steps; 0 uses emit_every
  double w2_epsilon_rel = 1e-2;
  long w2_exact_max_n = 64;    // exact LP when both clouds are this small
};

struct OracleConfig {
  FpkOptions grid;
  std::vector<double> times{0.25, 0.5};
  int bins_theta = 24;
  int bins_omega = 24;
  double omega_lo = -4.0;
  double omega_hi = 4.0;
};

struct ScenarioConfig {
  NetworkSource network;
  std::optional<int> outage;
  InitialPdf initial;  // n = 0 until resolve_initial; length-1 vectors broadcast
  bool has_initial = false;
  ProxConfig prox;
  double t_final = 1.0;
  std::uint64_t seed = 1;
  FMode f_mode = FMode::Derived;
  long emit_every = 100;
  std::string output_dir = "out";
  MetricsConfig metrics;
  OracleConfig oracle;
  std::string source_text;  // scenario.json as read, echoed into run.json
};

/// Relative paths resolve against `base_dir`. Error{Config} on schema violations.
ScenarioConfig parse_scenario(std::string_view text, const std::string& base_dir = ".");
ScenarioConfig load_scenario(const std::string& path);

/// Command-line overrides; unset fields keep the scenario values.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> f_mode;
  std::optional<long> emit_every;
  std::optional<std::string> z0;
  std::optional<bool> strict;
  std::optional<int> outage;
  std::optional<std::string> output_dir;
  std::optional<double> t_final;
  std::optional<long> N;
  std::optional<std::string> log_domain;
};
void apply_overrides(ScenarioConfig& cfg, const Overrides& o);

struct BuiltNetwork {
  ReducedNetwork net;
  std::vector<Diagnostic> diagnostics;
};
BuiltNetwork build_network(const ScenarioConfig& cfg);

/// Parses, optionally removes a branch, reduces.
BuiltNetwork reduce_case(const std::string& case_path, const std::string& dynamics_path, PhasePolicy policy,
                         std::optional<int> outage);

/// Uniform angles times U[-0.1, 0.1] velocities; used when the scenario omits `initial`.
InitialPdf default_initial(int n);
/// Broadcasts length-1 parameter vectors of a parsed `initial` block to n entries.
InitialPdf resolve_initial(const InitialPdf& spec, int n);

struct StepRecord {
  long step;
  double t;
  ProxReport report;
};

struct MetricRecord {
  double t;
  double rel_mean_err;
  double bw_normalized;
  double w2;
  double ess;
};

struct SimulationSummary {
  long steps = 0;
  long converged_steps = 0;
  double median_step_seconds = 0.0;
  std::vector<StepRecord> timing;
  Ensemble final_original;     // pushed back to (theta, omega)
  std::vector<Ensemble> snapshots;  // original coordinates, every emit_every steps (kept when requested)
};

struct RunOptions {
  bool write_files = true;
  bool keep_snapshots = false;
  bool quiet = false;
};

/// Prox pipeline: run.json, snapshots.csv, timing.csv, metrics.csv.
SimulationSummary run_simulate(const ScenarioConfig& cfg, const RunOptions& opt = {});

struct CompareSummary {
  std::vector<MetricRecord> metrics;
  SimulationSummary prox;
};

/// Prox pipeline plus an independent plain Monte Carlo ensemble; metrics per snapshot.
CompareSummary run_compare(const ScenarioConfig& cfg, const RunOptions& opt = {});

struct TrendResult {
  bool rel_mean_err = false;
  bool bw = false;
  bool w2 = false;
  double first_quarter[3] = {0, 0, 0};
  double last_half[3] = {0, 0, 0};
  bool all() const { return rel_mean_err && bw && w2; }
};
/// Drops snapshots with t < burn_in * t_final, then compares the mean of the
/// last half against the mean of the first quarter for each metric.
TrendResult trend_check(const std::vector<MetricRecord>& metrics, double t_final, double burn_in);

struct OracleComparison {
  double t;
  double l1_theta;
  double l1_omega;
  double ess;
};
/// n = 1 only: grid oracle and prox pipeline from the same initial law.
std::vector<OracleComparison> run_oracle_n1(const ScenarioConfig& cfg, const RunOptions& opt = {});

/// 17 significant digits.
std::string format_double(double v);

/// 0 success, 2 configuration, 3 numerical failure, 4 NonConvergence under --strict.
int exit_code_for(Errc code) noexcept;

}  // namespace kprox
