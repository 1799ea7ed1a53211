// kprox: network reduction, density propagation and validation runs.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kprox/casefile.hpp"
#include "kprox/errors.hpp"
#include "kprox/network.hpp"
#include "kprox/parallel.hpp"
#include "kprox/scenario.hpp"

namespace {

using namespace kprox;

struct Common {
  std::string config;
  int threads = 0;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> f_mode;
  std::optional<long> emit_every;
  std::optional<std::string> z0;
  bool strict = false;
  std::optional<int> outage;
  std::optional<std::string> output;
  std::optional<double> t_final;
  std::optional<long> N;
  std::optional<std::string> log_domain;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "scenario.json")->required()->check(CLI::ExistingFile);
  cmd->add_option("--threads", c.threads, "worker threads (0: hardware; env KPROX_THREADS)");
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--f-mode", c.f_mode, "paper | derived")->check(CLI::IsMember({"paper", "derived"}));
  cmd->add_option("--emit-every", c.emit_every, "snapshot cadence in steps");
  cmd->add_option("--z0", c.z0, "ones | random:<seed>");
  cmd->add_flag("--strict", c.strict, "abort on fixed-point non-convergence");
  cmd->add_option("--outage", c.outage, "1-based branch index removed at t = 0");
  cmd->add_option("--output", c.output, "output directory");
  cmd->add_option("--t-final", c.t_final, "final time");
  cmd->add_option("--N", c.N, "particle count");
  cmd->add_option("--log-domain", c.log_domain, "auto | never | always");
}

ScenarioConfig load(const Common& c) {
  if (c.threads > 0) set_thread_count(c.threads);
  ScenarioConfig cfg = load_scenario(c.config);
  Overrides o;
  o.seed = c.seed;
  o.f_mode = c.f_mode;
  o.emit_every = c.emit_every;
  o.z0 = c.z0;
  if (c.strict) o.strict = true;
  o.outage = c.outage;
  o.output_dir = c.output;
  o.t_final = c.t_final;
  o.N = c.N;
  o.log_domain = c.log_domain;
  apply_overrides(cfg, o);
  return cfg;
}

void print_network(const ReducedNetwork& net) {
  double kmin = 0.0, kmax = 0.0;
  bool first = true;
  for (int i = 0; i < net.n; ++i) {
    for (int j = 0; j < net.n; ++j) {
      if (i == j) continue;
      if (first || net.K(i, j) < kmin) kmin = net.K(i, j);
      if (first || net.K(i, j) > kmax) kmax = net.K(i, j);
      first = false;
    }
  }
  std::cout << "n = " << net.n << '\n';
  std::cout << "coupling k_ij in [" << format_double(kmin) << ", " << format_double(kmax) << "]\n";
  const EinsteinResult e = check_einstein(net);
  if (const auto* b = std::get_if<EinsteinBeta>(&e)) {
    std::cout << "einstein relation: satisfied, beta = " << format_double(b->beta) << '\n';
  } else {
    std::cout << "einstein relation: violated, max relative deviation "
              << format_double(std::get<EinsteinViolation>(e).max_relative_deviation) << '\n';
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Density propagation for stochastic swing dynamics"};
  app.require_subcommand(1);

  std::string case_path, dyn_path, reduce_out = "reduced_network.json";
  std::optional<int> reduce_outage;
  int reduce_threads = 0;
  auto* reduce = app.add_subcommand("reduce", "Kron-reduce a case and write reduced_network.json");
  reduce->add_option("--case", case_path, "case file (.m or .json)")->required()->check(CLI::ExistingFile);
  reduce->add_option("--dynamics", dyn_path, "dynamics.json")->required()->check(CLI::ExistingFile);
  reduce->add_option("--outage", reduce_outage, "1-based branch index to remove");
  reduce->add_option("--out", reduce_out, "output path");
  std::string reduce_phase = "strict";
  reduce->add_option("--phase-policy", reduce_phase, "strict | signed");
  reduce->add_option("--threads", reduce_threads, "unused; accepted for symmetry");

  Common sim_opts, cmp_opts, orc_opts;
  auto* simulate = app.add_subcommand("simulate", "Propagate particles and density values");
  add_common(simulate, sim_opts);

  auto* compare = app.add_subcommand("compare", "Prox pipeline against plain Monte Carlo");
  add_common(compare, cmp_opts);
  bool assert_decreasing = false;
  double burn_in = 0.0;
  compare->add_flag("--assert-decreasing", assert_decreasing, "fail unless every metric trends down");
  compare->add_option("--burn-in", burn_in, "fraction of t_final ignored by the trend check");

  auto* oracle = app.add_subcommand("oracle-n1", "Single-machine grid oracle against the prox pipeline");
  add_common(oracle, orc_opts);

  int t1_n = 0;
  std::uint64_t t1_seed = 1;
  std::string t1_out;
  auto* table1 = app.add_subcommand("sample-table1", "Draw a synthetic network from the parameter table");
  table1->add_option("--n", t1_n, "generator count")->required()->check(CLI::PositiveNumber);
  table1->add_option("--seed", t1_seed, "seed");
  table1->add_option("--out", t1_out, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*reduce) {
      const BuiltNetwork bn = reduce_case(case_path, dyn_path, parse_phase_policy(reduce_phase), reduce_outage);
      for (const Diagnostic& d : bn.diagnostics) std::cerr << "warning: " << to_string(d.code) << ": " << d.message << '\n';
      std::ofstream f(reduce_out);
      if (!f) throw Error(Errc::Config, "cannot write " + reduce_out);
      f << to_reduced_json(bn.net) << '\n';
      print_network(bn.net);
      return 0;
    }
    if (*simulate) {
      const ScenarioConfig cfg = load(sim_opts);
      const SimulationSummary s = run_simulate(cfg);
      std::cout << "steps " << s.steps << ", converged " << s.converged_steps << ", median prox step "
                << format_double(s.median_step_seconds) << " s, f_mode " << to_string(cfg.f_mode) << '\n';
      return 0;
    }
    if (*compare) {
      const ScenarioConfig cfg = load(cmp_opts);
      const CompareSummary s = run_compare(cfg);
      std::cout << "snapshots " << s.metrics.size() << ", f_mode " << to_string(cfg.f_mode) << '\n';
      if (assert_decreasing) {
        const TrendResult tr = trend_check(s.metrics, cfg.t_final, burn_in);
        const char* names[3] = {"rel_mean_err", "bw_normalized", "w2"};
        for (int k = 0; k < 3; ++k) {
          std::cout << names[k] << ": first quarter " << format_double(tr.first_quarter[k]) << ", last half "
                    << format_double(tr.last_half[k]) << '\n';
        }
        if (!tr.all()) {
          std::cerr << "trend assertion failed\n";
          return 1;
        }
      }
      return 0;
    }
    if (*oracle) {
      const ScenarioConfig cfg = load(orc_opts);
      for (const OracleComparison& c : run_oracle_n1(cfg)) {
        std::cout << "t = " << format_double(c.t) << ": L1 theta " << format_double(c.l1_theta) << ", L1 omega "
                  << format_double(c.l1_omega) << ", ess " << format_double(c.ess) << '\n';
      }
      return 0;
    }
    if (*table1) {
      const std::string text = to_reduced_json(make_reduced_network(sample_table1_params(t1_n, t1_seed)));
      if (t1_out.empty()) {
        std::cout << text << '\n';
      } else {
        std::ofstream f(t1_out);
        if (!f) throw Error(Errc::Config, "cannot write " + t1_out);
        f << text << '\n';
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
