#include "kprox/scenario.hpp"

#include <filesystem>

#include <json.hpp>

#include "kprox/errors.hpp"

namespace kprox {

using nlohmann::json;

namespace {

std::string resolve_path(const std::string& base, const std::string& p) {
  const std::filesystem::path path(p);
  if (path.is_absolute() || base.empty()) return p;
  return (std::filesystem::path(base) / path).lexically_normal().string();
}

Eigen::VectorXd vector_field(const json& v) {
  if (v.is_number()) return Eigen::VectorXd::Constant(1, v.get<double>());
  const auto xs = v.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

Eigen::VectorXd broadcast(const Eigen::VectorXd& v, int n, const char* name) {
  if (v.size() == n) return v;
  if (v.size() == 1) return Eigen::VectorXd::Constant(n, v(0));
  throw Error(Errc::Config, std::string("initial.") + name + " has " + std::to_string(v.size()) +
                                " entries, expected 1 or " + std::to_string(n));
}

InitialPdf parse_initial(const json& j) {
  InitialPdf pdf;
  const std::string law = j.value("theta", std::string("uniform"));
  if (law == "vonmises") {
    VonMisesProduct vm;
    vm.mu = vector_field(j.at("mu"));
    vm.kappa = vector_field(j.at("kappa"));
    vm.convention = parse_vm_convention(j.value("convention", std::string("doubled")));
    pdf.theta_law = vm;
  } else if (law == "uniform") {
    pdf.theta_law = UniformCircle{};
  } else {
    throw Error(Errc::Config, "initial.theta must be vonmises or uniform");
  }
  const json omega = j.value("omega", json{{"lo", -0.1}, {"hi", 0.1}});
  pdf.omega_law.lo = vector_field(omega.at("lo"));
  pdf.omega_law.hi = vector_field(omega.at("hi"));
  return pdf;
}

}  // namespace

InitialPdf default_initial(int n) {
  InitialPdf pdf;
  pdf.n = n;
  pdf.theta_law = UniformCircle{};
  pdf.omega_law.lo = Eigen::VectorXd::Constant(n, -0.1);
  pdf.omega_law.hi = Eigen::VectorXd::Constant(n, 0.1);
  return pdf;
}

InitialPdf resolve_initial(const InitialPdf& spec, int n) {
  InitialPdf pdf = spec;
  pdf.n = n;
  if (auto* vm = std::get_if<VonMisesProduct>(&pdf.theta_law)) {
    vm->mu = broadcast(vm->mu, n, "mu");
    vm->kappa = broadcast(vm->kappa, n, "kappa");
  }
  pdf.omega_law.lo = broadcast(pdf.omega_law.lo, n, "omega.lo");
  pdf.omega_law.hi = broadcast(pdf.omega_law.hi, n, "omega.hi");
  pdf.validate();
  return pdf;
}

ScenarioConfig parse_scenario(std::string_view text, const std::string& base_dir) {
  ScenarioConfig cfg;
  cfg.source_text = std::string(text);
  try {
    const json j = json::parse(text);
    const json& net = j.at("network");
    if (net.contains("table1")) {
      cfg.network.kind = NetworkSource::Kind::Table1;
      cfg.network.table1_n = net.at("table1").at("n").get<int>();
      cfg.network.table1_seed = net.at("table1").value("seed", std::uint64_t{1});
    } else if (net.contains("reduced")) {
      cfg.network.kind = NetworkSource::Kind::Reduced;
      cfg.network.reduced_path = resolve_path(base_dir, net.at("reduced").get<std::string>());
    } else {
      cfg.network.kind = NetworkSource::Kind::Case;
      cfg.network.case_path = resolve_path(base_dir, net.at("case").get<std::string>());
      cfg.network.dynamics_path = resolve_path(base_dir, net.at("dynamics").get<std::string>());
      cfg.network.phase_policy = parse_phase_policy(net.value("phase_policy", std::string("strict")));
    }
    if (j.contains("outage") && !j.at("outage").is_null()) cfg.outage = j.at("outage").get<int>();
    if (j.contains("initial")) {
      cfg.initial = parse_initial(j.at("initial"));
      cfg.has_initial = true;
    }
    if (j.contains("prox")) {
      const json& p = j.at("prox");
      cfg.prox.h = p.value("h", cfg.prox.h);
      cfg.prox.epsilon = p.value("epsilon", cfg.prox.epsilon);
      cfg.prox.delta = p.value("delta", cfg.prox.delta);
      cfg.prox.l_max = p.value("l_max", cfg.prox.l_max);
      cfg.prox.N = p.value("N", cfg.prox.N);
      cfg.prox.z0 = parse_z0(p.value("z0", std::string("ones")));
      cfg.prox.log_domain = parse_log_domain(p.value("log_domain", std::string("auto")));
    }
    cfg.prox.strict = j.value("strict", false);
    cfg.t_final = j.value("t_final", cfg.t_final);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.f_mode = parse_f_mode(j.value("f_mode", std::string("derived")));
    cfg.emit_every = j.value("emit_every", cfg.emit_every);
    cfg.output_dir = resolve_path(base_dir, j.value("output", cfg.output_dir));
    if (j.contains("metrics")) {
      const json& m = j.at("metrics");
      cfg.metrics.every = m.value("every", cfg.metrics.every);
      cfg.metrics.w2_epsilon_rel = m.value("w2_epsilon_rel", cfg.metrics.w2_epsilon_rel);
      cfg.metrics.w2_exact_max_n = m.value("w2_exact_max_n", cfg.metrics.w2_exact_max_n);
    }
    if (j.contains("oracle")) {
      const json& o = j.at("oracle");
      cfg.oracle.grid.omega_max = o.value("omega_max", cfg.oracle.grid.omega_max);
      cfg.oracle.grid.g_theta = o.value("g_theta", cfg.oracle.grid.g_theta);
      cfg.oracle.grid.g_omega = o.value("g_omega", cfg.oracle.grid.g_omega);
      cfg.oracle.grid.h_pde = o.value("h_pde", cfg.oracle.grid.h_pde);
      if (o.contains("times")) cfg.oracle.times = o.at("times").get<std::vector<double>>();
      cfg.oracle.bins_theta = o.value("bins_theta", cfg.oracle.bins_theta);
      cfg.oracle.bins_omega = o.value("bins_omega", cfg.oracle.bins_omega);
      cfg.oracle.omega_lo = o.value("omega_lo", cfg.oracle.omega_lo);
      cfg.oracle.omega_hi = o.value("omega_hi", cfg.oracle.omega_hi);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::Config, std::string("scenario: ") + e.what());
  }
  cfg.prox.validate();
  if (cfg.emit_every < 1) throw Error(Errc::Config, "emit_every must be >= 1");
  step_count(cfg.t_final, cfg.prox.h);
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  const std::string text = read_text_file(path);
  return parse_scenario(text, std::filesystem::path(path).parent_path().string());
}

void apply_overrides(ScenarioConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.f_mode) cfg.f_mode = parse_f_mode(*o.f_mode);
  if (o.emit_every) {
    if (*o.emit_every < 1) throw Error(Errc::Config, "emit_every must be >= 1");
    cfg.emit_every = *o.emit_every;
  }
  if (o.z0) cfg.prox.z0 = parse_z0(*o.z0);
  if (o.strict) cfg.prox.strict = *o.strict;
  if (o.outage) cfg.outage = *o.outage;
  if (o.output_dir) cfg.output_dir = *o.output_dir;
  if (o.t_final) cfg.t_final = *o.t_final;
  if (o.N) cfg.prox.N = *o.N;
  if (o.log_domain) cfg.prox.log_domain = parse_log_domain(*o.log_domain);
  cfg.prox.validate();
  step_count(cfg.t_final, cfg.prox.h);
}

BuiltNetwork reduce_case(const std::string& case_path, const std::string& dynamics_path, PhasePolicy policy,
                         std::optional<int> outage) {
  UnreducedCase c = load_case_file(case_path);
  const std::string dyn_text = read_text_file(dynamics_path);
  BuiltNetwork out;
  if (!outage) {
    out.net = reduce_network(c, parse_dynamic_params(dyn_text, c), policy, &out.diagnostics);
    return out;
  }
  // Injections, EMFs and mechanical power stay at their pre-outage values.
  const DynamicParams intact_dyn = parse_dynamic_params(dyn_text, c);
  const Eigen::VectorXcd j_int =
      interior_injection(build_admittance(c, intact_dyn), operating_point(c, intact_dyn));
  OutageResult r = apply_line_outage(c, *outage);
  out.diagnostics = std::move(r.diagnostics);
  const DynamicParams dyn = parse_dynamic_params(dyn_text, r.network);
  out.net = reduce_network(r.network, dyn, policy, &out.diagnostics, &j_int);
  return out;
}

BuiltNetwork build_network(const ScenarioConfig& cfg) {
  switch (cfg.network.kind) {
    case NetworkSource::Kind::Case:
      return reduce_case(cfg.network.case_path, cfg.network.dynamics_path, cfg.network.phase_policy,
                         cfg.outage);
    case NetworkSource::Kind::Reduced:
      if (cfg.outage) throw Error(Errc::Config, "outage needs an unreduced case");
      return {parse_reduced_json(read_text_file(cfg.network.reduced_path)), {}};
    case NetworkSource::Kind::Table1:
      if (cfg.outage) throw Error(Errc::Config, "outage needs an unreduced case");
      return {make_reduced_network(sample_table1_params(cfg.network.table1_n, cfg.network.table1_seed)), {}};
  }
  throw Error(Errc::Config, "unknown network source");
}

}  // namespace kprox
