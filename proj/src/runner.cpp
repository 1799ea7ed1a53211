#include "kprox/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>

#include <json.hpp>

#include "kprox/dynamics.hpp"
#include "kprox/errors.hpp"
#include "kprox/moments.hpp"
#include "kprox/parallel.hpp"
#include "kprox/simd/kernels.hpp"
#include "kprox/transport.hpp"

namespace kprox {

using nlohmann::json;

namespace {

constexpr int kCsvSchemaVersion = 1;

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw Error(Errc::Config, "cannot write " + p.string());
  return f;
}

json network_summary(const ReducedNetwork& net) {
  json j;
  j["n"] = net.n;
  j["gen_buses"] = net.gen_buses;
  double kmin = 0.0, kmax = 0.0, phimax = 0.0;
  bool first = true;
  for (int i = 0; i < net.n; ++i) {
    for (int k = 0; k < net.n; ++k) {
      if (i == k) continue;
      if (first || net.K(i, k) < kmin) kmin = net.K(i, k);
      if (first || net.K(i, k) > kmax) kmax = net.K(i, k);
      phimax = std::max(phimax, net.phi(i, k));
      first = false;
    }
  }
  j["k_min"] = kmin;
  j["k_max"] = kmax;
  j["phi_max"] = phimax;
  const EinsteinResult e = check_einstein(net);
  if (const auto* b = std::get_if<EinsteinBeta>(&e)) {
    j["einstein"] = {{"satisfied", true}, {"beta", b->beta}};
  } else {
    j["einstein"] = {{"satisfied", false},
                     {"max_relative_deviation", std::get<EinsteinViolation>(e).max_relative_deviation}};
  }
  return j;
}

json scenario_echo(const ScenarioConfig& cfg) {
  json j;
  try {
    j = json::parse(cfg.source_text);
  } catch (const json::exception&) {
    j = json::object();
  }
  return j;
}

void write_manifest(const ScenarioConfig& cfg, const BuiltNetwork& bn, const std::string& command) {
  json m;
  m["format"] = "kprox-run";
  m["csv_schema_version"] = kCsvSchemaVersion;
  m["command"] = command;
  m["scenario"] = scenario_echo(cfg);
  m["effective"] = {
      {"seed", cfg.seed},
      {"f_mode", std::string(to_string(cfg.f_mode))},
      {"t_final", cfg.t_final},
      {"emit_every", cfg.emit_every},
      {"outage", cfg.outage ? json(*cfg.outage) : json(nullptr)},
      {"prox",
       {{"h", cfg.prox.h},
        {"epsilon", cfg.prox.epsilon},
        {"delta", cfg.prox.delta},
        {"l_max", cfg.prox.l_max},
        {"N", cfg.prox.N},
        {"z0", to_string(cfg.prox.z0)},
        {"log_domain", std::string(to_string(cfg.prox.log_domain))},
        {"strict", cfg.prox.strict},
        {"exponent", cfg.prox.exponent()}}},
      {"threads", thread_count()},
      {"simd", std::string(simd::active().name)},
  };
  m["network"] = network_summary(bn.net);
  json diags = json::array();
  for (const Diagnostic& d : bn.diagnostics) diags.push_back({{"code", std::string(to_string(d.code))}, {"message", d.message}});
  m["diagnostics"] = diags;
  m["files"] = {
      {"snapshots.csv", "k,t,i,theta_wrapped_1..n,theta_1..n,omega_1..n,rho"},
      {"timing.csv", "step,t,iterations,residual_y,residual_z,converged,log_domain,wall_seconds"},
      {"metrics.csv", command == "compare" ? "t,rel_mean_err,bw_normalized,w2,ess"
                                           : "t,ess,log_rho_min,log_rho_max,second_raw_moment"},
  };
  auto f = open_out(std::filesystem::path(cfg.output_dir) / "run.json");
  f << m.dump(2) << '\n';
}

std::string snapshot_header(int n) {
  std::string h = "k,t,i";
  for (int i = 1; i <= n; ++i) h += ",theta_wrapped_" + std::to_string(i);
  for (int i = 1; i <= n; ++i) h += ",theta_" + std::to_string(i);
  for (int i = 1; i <= n; ++i) h += ",omega_" + std::to_string(i);
  return h + ",rho";
}

void write_snapshot(std::ostream& os, const Ensemble& e) {
  std::string line;
  for (Eigen::Index p = 0; p < e.size(); ++p) {
    line = std::to_string(e.step) + ',' + format_double(e.t) + ',' + std::to_string(p + 1);
    for (int i = 0; i < e.n; ++i) line += ',' + format_double(wrap_angle(e.states(p, i)));
    for (int i = 0; i < 2 * e.n; ++i) line += ',' + format_double(e.states(p, i));
    line += ',' + format_double(std::exp(e.log_values(p)));
    os << line << '\n';
  }
}

MetricRecord compare_metrics(const Ensemble& prox, const Ensemble& mc, const MetricsConfig& mcfg) {
  const ImportanceWeights iw = importance_weights(prox);
  MomentSummary sp = weighted_moments(prox.states, iw.w);
  const MomentSummary sm = mc_moments(mc);
  MetricRecord r;
  r.t = prox.t;
  r.ess = iw.ess;
  const double mn = sm.mean.norm();
  r.rel_mean_err = (sm.mean - sp.mean).norm() / (mn > 0.0 ? mn : 1.0);
  const double tr = sm.cov.trace();
  r.bw_normalized = bures_wasserstein(sm.cov, sp.cov) / std::sqrt(tr > 0.0 ? tr : 1.0);
  WeightedCloud a{prox.states, iw.w};
  WeightedCloud b{mc.states, Eigen::VectorXd::Constant(mc.size(), 1.0 / static_cast<double>(mc.size()))};
  OtOptions ot;
  ot.epsilon_rel = mcfg.w2_epsilon_rel;
  ot.tolerance = 1e-6;
  ot.max_iterations = 5000;
  if (prox.size() <= mcfg.w2_exact_max_n && mc.size() <= mcfg.w2_exact_max_n) ot.mode = OtMode::Exact;
  r.w2 = wasserstein2(a, b, ot).w2;
  return r;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

struct PipelineOutput {
  SimulationSummary sim;
  std::vector<MetricRecord> metrics;
};

PipelineOutput run_pipeline(const ScenarioConfig& cfg, const RunOptions& opt, const std::string& command,
                            const std::vector<long>& capture_steps = {}) {
  const BuiltNetwork bn = build_network(cfg);
  const ReducedNetwork& net = bn.net;
  const TransformSpec spec = make_transform(net, cfg.f_mode);
  const InitialPdf pdf = cfg.has_initial ? resolve_initial(cfg.initial, net.n) : default_initial(net.n);
  const long K = step_count(cfg.t_final, cfg.prox.h);
  const bool compare = command == "compare";
  const long metric_every = cfg.metrics.every > 0 ? cfg.metrics.every : cfg.emit_every;

  std::ofstream snap, timing, metrics;
  if (opt.write_files) {
    std::filesystem::create_directories(cfg.output_dir);
    write_manifest(cfg, bn, command);
    const std::filesystem::path dir(cfg.output_dir);
    snap = open_out(dir / "snapshots.csv");
    timing = open_out(dir / "timing.csv");
    metrics = open_out(dir / "metrics.csv");
    snap << snapshot_header(net.n) << '\n';
    timing << "step,t,iterations,residual_y,residual_z,converged,log_domain,wall_seconds\n";
    metrics << (compare ? "t,rel_mean_err,bw_normalized,w2,ess\n" : "t,ess,log_rho_min,log_rho_max,second_raw_moment\n");
  }
  if (!opt.quiet) {
    for (const Diagnostic& d : bn.diagnostics) std::cerr << "warning: " << to_string(d.code) << ": " << d.message << '\n';
  }

  const Ensemble ens0 = sample_initial(pdf, cfg.prox.N, cfg.seed);
  Ensemble mc;
  if (compare) mc = sample_initial(pdf, cfg.prox.N, cfg.seed, StreamPurpose::ReferenceInitial);
  const NoiseStream noise{cfg.seed, StreamPurpose::Noise, true};
  const NoiseStream mc_noise{cfg.seed, StreamPurpose::ReferenceNoise, true};

  PipelineOutput out;
  auto emit = [&](const Ensemble& original) {
    if (opt.keep_snapshots) out.sim.snapshots.push_back(original);
    else if (std::find(capture_steps.begin(), capture_steps.end(), original.step) != capture_steps.end()) {
      out.sim.snapshots.push_back(original);
    }
    if (opt.write_files && original.step % cfg.emit_every == 0) write_snapshot(snap, original);
    if (original.step % metric_every != 0) return;
    if (compare) {
      const MetricRecord r = compare_metrics(original, mc, cfg.metrics);
      out.metrics.push_back(r);
      if (opt.write_files) {
        metrics << format_double(r.t) << ',' << format_double(r.rel_mean_err) << ',' << format_double(r.bw_normalized)
                << ',' << format_double(r.w2) << ',' << format_double(r.ess) << '\n';
      }
    } else if (opt.write_files) {
      const ImportanceWeights iw = importance_weights(original);
      const double m2 = original.states.array().square().colwise().mean().sum();
      if (!std::isfinite(m2)) throw Error(Errc::NonFinite, "second raw moment is not finite");
      metrics << format_double(original.t) << ',' << format_double(iw.ess) << ','
              << format_double(original.log_values.minCoeff()) << ',' << format_double(original.log_values.maxCoeff())
              << ',' << format_double(m2) << '\n';
    }
  };

  emit(ens0);
  PropagateHooks hooks;
  hooks.on_step = [&](const Ensemble& e, const ProxReport& rep) {
    out.sim.timing.push_back({e.step, e.t, rep});
    if (rep.converged) ++out.sim.converged_steps;
    if (opt.write_files) {
      timing << e.step << ',' << format_double(e.t) << ',' << rep.iterations << ',' << format_double(rep.residual_y)
             << ',' << format_double(rep.residual_z) << ',' << (rep.converged ? 1 : 0) << ','
             << (rep.log_domain ? 1 : 0) << ',' << format_double(rep.wall_seconds) << '\n';
    }
    if (!rep.converged && !opt.quiet) {
      std::cerr << "warning: step " << e.step << " did not converge within " << cfg.prox.l_max << " iterations\n";
    }
    if (compare) em_step_original(mc, net, cfg.prox.h, mc_noise);
    const bool wanted = opt.keep_snapshots || e.step % cfg.emit_every == 0 || e.step % metric_every == 0 ||
                        std::find(capture_steps.begin(), capture_steps.end(), e.step) != capture_steps.end();
    if (wanted) emit(pushback_weights(e, spec));
  };
  const Ensemble last = propagate(pushforward(ens0, spec), net, spec, cfg.prox, K, noise, hooks);
  out.sim.steps = K;
  out.sim.final_original = pushback_weights(last, spec);
  std::vector<double> secs;
  secs.reserve(out.sim.timing.size());
  for (const StepRecord& r : out.sim.timing) secs.push_back(r.report.wall_seconds);
  out.sim.median_step_seconds = median(secs);
  return out;
}

Eigen::VectorXd theta_cell_averages(const InitialPdf& pdf, const GridDensity& g, int sub) {
  Eigen::VectorXd v(g.theta.size());
  const auto* vm = std::get_if<VonMisesProduct>(&pdf.theta_law);
  for (Eigen::Index i = 0; i < g.theta.size(); ++i) {
    double acc = 0.0;
    for (int s = 0; s < sub; ++s) {
      const double th = static_cast<double>(i) * g.dtheta + (s + 0.5) * g.dtheta / sub;
      acc += vm ? von_mises_pdf(th, vm->mu(0), vm->kappa(0), vm->convention) : 1.0 / (2.0 * std::numbers::pi);
    }
    v(i) = acc / sub;
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int exit_code_for(Errc code) noexcept {
  switch (code) {
    case Errc::MissingMatrix:
    case Errc::MalformedRow:
    case Errc::DanglingBranch:
    case Errc::ZeroReactance:
    case Errc::Unsupported:
    case Errc::MissingGenerator:
    case Errc::NonPositive:
    case Errc::InvalidCase:
    case Errc::UnknownBranch:
    case Errc::AlreadyOut:
    case Errc::Config:
    case Errc::WeightMismatch:
      return 2;
    case Errc::NonConvergence:
      return 4;
    default:
      return 3;
  }
}

SimulationSummary run_simulate(const ScenarioConfig& cfg, const RunOptions& opt) {
  return run_pipeline(cfg, opt, "simulate").sim;
}

CompareSummary run_compare(const ScenarioConfig& cfg, const RunOptions& opt) {
  PipelineOutput p = run_pipeline(cfg, opt, "compare");
  return {std::move(p.metrics), std::move(p.sim)};
}

TrendResult trend_check(const std::vector<MetricRecord>& metrics, double t_final, double burn_in) {
  std::vector<const MetricRecord*> kept;
  for (const MetricRecord& m : metrics) {
    if (m.t >= burn_in * t_final - 1e-12) kept.push_back(&m);
  }
  TrendResult r;
  if (kept.size() < 4) return r;
  const std::size_t q = std::max<std::size_t>(1, kept.size() / 4);
  const std::size_t half = kept.size() / 2;
  auto value = [](const MetricRecord& m, int k) { return k == 0 ? m.rel_mean_err : k == 1 ? m.bw_normalized : m.w2; };
  for (int k = 0; k < 3; ++k) {
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < q; ++i) first += value(*kept[i], k);
    for (std::size_t i = half; i < kept.size(); ++i) last += value(*kept[i], k);
    r.first_quarter[k] = first / static_cast<double>(q);
    r.last_half[k] = last / static_cast<double>(kept.size() - half);
  }
  r.rel_mean_err = r.last_half[0] < r.first_quarter[0];
  r.bw = r.last_half[1] < r.first_quarter[1];
  r.w2 = r.last_half[2] < r.first_quarter[2];
  return r;
}

std::vector<OracleComparison> run_oracle_n1(const ScenarioConfig& cfg_in, const RunOptions& opt) {
  ScenarioConfig cfg = cfg_in;
  const BuiltNetwork bn = build_network(cfg);
  if (bn.net.n != 1) throw Error(Errc::Config, "oracle-n1 needs a single-machine network");
  if (!(bn.net.sigma(0) > 0.0)) throw Error(Errc::Config, "oracle-n1 needs sigma > 0");
  const InitialPdf pdf = cfg.has_initial ? resolve_initial(cfg.initial, 1) : default_initial(1);
  std::vector<double> times = cfg.oracle.times;
  std::sort(times.begin(), times.end());
  if (times.empty()) throw Error(Errc::Config, "oracle needs at least one time");

  // Product initial law: theta cell averages by sub-sampling, omega by exact overlap.
  GridDensity rho0 = make_grid(cfg.oracle.grid);
  const Eigen::VectorXd th = theta_cell_averages(pdf, rho0, 16);
  const double lo = pdf.omega_law.lo(0), hi = pdf.omega_law.hi(0);
  for (Eigen::Index j = 0; j < rho0.omega.size(); ++j) {
    const double a = rho0.omega(j) - 0.5 * rho0.domega;
    const double overlap = std::max(0.0, std::min(a + rho0.domega, hi) - std::max(a, lo));
    rho0.values.col(j) = th * (overlap / (rho0.domega * (hi - lo)));
  }
  rho0.values /= rho0.mass();
  const std::vector<GridDensity> grid = fd_fpk_oracle_n1(bn.net, rho0, cfg.oracle.grid, times);

  cfg.t_final = times.back();
  std::vector<long> capture;
  for (double t : times) capture.push_back(step_count(t, cfg.prox.h));
  cfg.emit_every = std::max<long>(1, capture.back());
  RunOptions ro = opt;
  ro.keep_snapshots = false;
  PipelineOutput p = run_pipeline(cfg, ro, "oracle-n1", capture);

  std::vector<OracleComparison> out;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const Ensemble* e = nullptr;
    for (const Ensemble& s : p.sim.snapshots) {
      if (s.step == capture[k]) e = &s;
    }
    if (e == nullptr) throw Error(Errc::Config, "missing prox snapshot");
    const ImportanceWeights iw = importance_weights(*e);
    const Histogram ht = marginal_univariate(*e, 0, cfg.oracle.bins_theta);
    const Histogram hw = marginal_univariate(*e, 1, cfg.oracle.bins_omega,
                                             std::make_pair(cfg.oracle.omega_lo, cfg.oracle.omega_hi));
    const GridDensity& g = grid[k];
    const Eigen::VectorXd mt = g.theta_marginal();
    const Eigen::VectorXd mw = g.omega_marginal();
    auto l1 = [](const Histogram& h, const Eigen::VectorXd& marg, double start, double width) {
      double acc = 0.0;
      for (std::size_t b = 0; b < h.density.size(); ++b) {
        const double w = h.edges[b + 1] - h.edges[b];
        const double ref = integrate_marginal(marg, start, width, h.edges[b], h.edges[b + 1]) / w;
        acc += std::abs(h.density[b] - ref) * w;
      }
      return acc;
    };
    out.push_back({times[k], l1(ht, mt, 0.0, g.dtheta), l1(hw, mw, -cfg.oracle.grid.omega_max, g.domega), iw.ess});
  }
  if (opt.write_files) {
    auto f = open_out(std::filesystem::path(cfg.output_dir) / "oracle.csv");
    f << "t,l1_theta,l1_omega,ess\n";
    for (const OracleComparison& c : out) {
      f << format_double(c.t) << ',' << format_double(c.l1_theta) << ',' << format_double(c.l1_omega) << ','
        << format_double(c.ess) << '\n';
    }
  }
  return out;
}

}  // namespace kprox
