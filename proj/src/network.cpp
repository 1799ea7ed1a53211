#include "kprox/network.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <queue>

#include <json.hpp>

namespace kprox {

using cd = std::complex<double>;
using nlohmann::json;

namespace {

constexpr double kInteriorRcondThreshold = 1e-12;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

}  // namespace

void finalize(ReducedNetwork& net) {
  const int n = net.n;
  if (n < 1) throw Error(Errc::InvalidCase, "reduced network needs n >= 1");
  auto check_size = [n](const Eigen::VectorXd& v, const char* name) {
    if (v.size() != n) throw Error(Errc::InvalidCase, std::string(name) + " has the wrong size");
  };
  check_size(net.P, "P");
  check_size(net.m, "m");
  check_size(net.gamma, "gamma");
  check_size(net.sigma, "sigma");
  if (net.phi.rows() != n || net.phi.cols() != n || net.K.rows() != n || net.K.cols() != n) {
    throw Error(Errc::InvalidCase, "phi/K must be n x n");
  }
  if (net.k_inf.size() == 0) net.k_inf = Eigen::VectorXd::Zero(n);
  if (net.phi_inf.size() == 0) net.phi_inf = Eigen::VectorXd::Zero(n);
  check_size(net.k_inf, "k_inf");
  check_size(net.phi_inf, "phi_inf");
  for (int i = 0; i < n; ++i) {
    if (!(net.m(i) > 0.0) || !(net.gamma(i) > 0.0) || !(net.sigma(i) > 0.0)) {
      throw Error(Errc::NonPositive, "m, gamma and sigma must be positive (generator " +
                                         std::to_string(i + 1) + ")");
    }
    if (net.K(i, i) != 0.0 || net.phi(i, i) != 0.0) {
      throw Error(Errc::InvalidCase, "K and phi must have zero diagonals");
    }
    if (net.k_inf(i) < 0.0) throw Error(Errc::InvalidCase, "k_inf must be nonnegative");
    for (int j = 0; j < n; ++j) {
      if (net.K(i, j) < 0.0 || net.K(i, j) != net.K(j, i)) {
        throw Error(Errc::InvalidCase, "K must be symmetric and nonnegative");
      }
    }
  }
  net.Kc = net.K.cwiseProduct(net.phi.array().cos().matrix());
  net.Ks = net.K.cwiseProduct(net.phi.array().sin().matrix());
}

AugmentedAdmittance build_admittance(const UnreducedCase& c, const DynamicParams& dyn) {
  if (dyn.gens.size() != c.gens.size()) {
    throw Error(Errc::MissingGenerator, "dynamic parameters do not cover every generator");
  }
  const int n = static_cast<int>(c.gens.size());
  const int m = static_cast<int>(c.buses.size());
  AugmentedAdmittance aug;
  aug.boundary_count = n;
  aug.interior_count = m;
  aug.y = Eigen::MatrixXcd::Zero(n + m, n + m);
  auto node = [&](int bus_id) { return n + static_cast<int>(c.bus_position(bus_id)); };

  for (const Branch& br : c.branches) {
    if (br.status == 0) continue;
    if (br.r == 0.0 && br.x == 0.0) {
      throw Error(Errc::SingularBranch, "branch " + std::to_string(br.branch_index));
    }
    const cd ys = 1.0 / cd(br.r, br.x);
    const cd half_b(0.0, br.b_charging / 2.0);
    const double tap = br.tap == 0.0 ? 1.0 : br.tap;
    const int f = node(br.from);
    const int t = node(br.to);
    aug.y(f, f) += (ys + half_b) / (tap * tap);
    aug.y(t, t) += ys + half_b;
    aug.y(f, t) -= ys / tap;
    aug.y(t, f) -= ys / tap;
  }
  for (const Bus& b : c.buses) {
    const int k = node(b.id);
    const double v2 = b.v_mag * b.v_mag;
    aug.y(k, k) += cd(b.p_load, -b.q_load) / (v2 * c.base_mva);
    aug.y(k, k) += cd(b.g_shunt, b.b_shunt) / c.base_mva;
  }
  for (int i = 0; i < n; ++i) {
    const cd yg = 1.0 / cd(0.0, dyn.gens[static_cast<std::size_t>(i)].x_d_prime);
    const int k = node(c.gens[static_cast<std::size_t>(i)].bus);
    aug.y(i, i) += yg;
    aug.y(k, k) += yg;
    aug.y(i, k) -= yg;
    aug.y(k, i) -= yg;
  }
  return aug;
}

Eigen::MatrixXcd kron_reduce(const AugmentedAdmittance& aug) {
  const Eigen::MatrixXcd ybnd = aug.boundary();
  if (aug.interior_count == 0) return ybnd;
  const Eigen::MatrixXcd ybi = aug.coupling();
  const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(aug.interior());
  const double rcond = lu.rcond();
  if (!(rcond >= kInteriorRcondThreshold)) {
    throw Error(Errc::SingularInterior, "reciprocal condition estimate " + std::to_string(rcond));
  }
  return ybnd - ybi * lu.solve(ybi.transpose());
}

OperatingPoint operating_point(const UnreducedCase& c, const DynamicParams& dyn) {
  OperatingPoint op;
  const auto n = static_cast<Eigen::Index>(c.gens.size());
  op.e_boundary.resize(n);
  op.e_interior.resize(static_cast<Eigen::Index>(c.buses.size()));
  for (std::size_t k = 0; k < c.buses.size(); ++k) {
    op.e_interior(static_cast<Eigen::Index>(k)) =
        std::polar(c.buses[k].v_mag, deg2rad(c.buses[k].v_angle));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const Generator& g = c.gens[static_cast<std::size_t>(i)];
    const cd vt = op.e_interior(static_cast<Eigen::Index>(c.bus_position(g.bus)));
    const cd s(g.p_mech / c.base_mva, g.q_gen / c.base_mva);
    const cd current = std::conj(s / vt);
    cd e = vt + cd(0.0, dyn.gens[static_cast<std::size_t>(i)].x_d_prime) * current;
    if (g.e_internal_mag) e = std::polar(*g.e_internal_mag, std::arg(e));
    op.e_boundary(i) = e;
  }
  return op;
}

Eigen::VectorXcd interior_injection(const AugmentedAdmittance& aug, const OperatingPoint& op) {
  return aug.coupling().transpose() * op.e_boundary + aug.interior() * op.e_interior;
}

std::string_view to_string(PhasePolicy p) noexcept {
  return p == PhasePolicy::Strict ? "strict" : "signed";
}

PhasePolicy parse_phase_policy(std::string_view s) {
  if (s == "strict") return PhasePolicy::Strict;
  if (s == "signed") return PhasePolicy::Signed;
  throw Error(Errc::Config, "phase_policy must be strict or signed, got '" + std::string(s) + "'");
}

ReducedNetwork derive_parameters(const Eigen::MatrixXcd& Y, const AugmentedAdmittance& aug,
                                 const UnreducedCase& c, const DynamicParams& dyn,
                                 PhasePolicy policy, std::vector<Diagnostic>* diagnostics,
                                 const Eigen::VectorXcd* injection) {
  const int n = static_cast<int>(Y.rows());
  const OperatingPoint op = operating_point(c, dyn);
  const Eigen::VectorXcd j_int = injection ? *injection : interior_injection(aug, op);
  if (j_int.size() != aug.interior_count) throw Error(Errc::InvalidCase, "interior injection has the wrong size");

  ReducedNetwork net;
  net.n = n;
  net.Y = Y;
  net.E = op.e_boundary;
  net.I = -(aug.coupling() * aug.interior().partialPivLu().solve(j_int));
  net.P.resize(n);
  net.phi = Eigen::MatrixXd::Zero(n, n);
  net.K = Eigen::MatrixXd::Zero(n, n);
  net.m.resize(n);
  net.gamma.resize(n);
  net.sigma.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    if (!(std::abs(net.E(i)) > 0.0)) throw Error(Errc::InvalidCase, "|E| must be positive");
    // Loads sit in Y as constant impedances, so no separate P_load term remains.
    net.P(i) = c.gens[si].p_mech / c.base_mva - std::norm(net.E(i)) * Y(i, i).real() +
               (net.E(i) * std::conj(net.I(i))).real();
    net.m(i) = dyn.gens[si].m;
    net.gamma(i) = dyn.gens[si].gamma;
    net.sigma(i) = dyn.gens[si].sigma;
    net.gen_buses.push_back(c.gens[si].bus);
  }
  int negative = 0;
  double phi_min = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const cd y = Y(i, j);
      double phi = 0.0;
      if (y.real() != 0.0) {
        if (y.imag() == 0.0) {
          throw Error(Errc::DegeneratePhase, "Im(Y) = 0 with Re(Y) != 0 at (" + std::to_string(i + 1) +
                                                 "," + std::to_string(j + 1) + ")");
        }
        phi = -std::atan(y.real() / y.imag());
      }
      if (phi == 0.0) phi = 0.0;  // drops the sign of -0
      const bool signed_ok = policy == PhasePolicy::Signed && phi > -std::numbers::pi / 2 && phi < 0.0;
      if (signed_ok) {
        if (j > i) ++negative;
        phi_min = std::min(phi_min, phi);
      } else if (!(phi >= 0.0 && phi < std::numbers::pi / 2)) {
        throw Error(Errc::DegeneratePhase, "phi(" + std::to_string(i + 1) + "," +
                                               std::to_string(j + 1) + ") = " + std::to_string(phi));
      }
      net.phi(i, j) = phi;
      net.K(i, j) = std::abs(net.E(i)) * std::abs(net.E(j)) * std::abs(y);
    }
  }
  if (negative > 0 && diagnostics) {
    diagnostics->push_back({Errc::DegeneratePhase,
                            std::to_string(negative) + " pair(s) with phi < 0 kept under phase_policy=signed (min " +
                                std::to_string(phi_min) + ")"});
  }
  // |E_i||E_j||Y_ij| is symmetric up to rounding of the Schur complement
  net.K = (0.5 * (net.K + net.K.transpose())).eval();
  finalize(net);
  return net;
}

ReducedNetwork reduce_network(const UnreducedCase& c, const DynamicParams& dyn, PhasePolicy policy,
                              std::vector<Diagnostic>* diagnostics, const Eigen::VectorXcd* injection) {
  const AugmentedAdmittance aug = build_admittance(c, dyn);
  return derive_parameters(kron_reduce(aug), aug, c, dyn, policy, diagnostics, injection);
}

ReducedNetwork make_reduced_network(const Table1Draw& d) {
  ReducedNetwork net;
  net.n = d.n;
  net.P = Eigen::Map<const Eigen::VectorXd>(d.p.data(), d.n);
  net.m = Eigen::Map<const Eigen::VectorXd>(d.m.data(), d.n);
  net.gamma = Eigen::Map<const Eigen::VectorXd>(d.gamma.data(), d.n);
  net.sigma = Eigen::Map<const Eigen::VectorXd>(d.sigma.data(), d.n);
  net.phi = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      d.phi.data(), d.n, d.n);
  net.K = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      d.k.data(), d.n, d.n);
  finalize(net);
  return net;
}

double potential_V(std::span<const double> theta, const ReducedNetwork& net) {
  double v = 0.0;
  for (int i = 0; i < net.n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    v -= net.P(i) * theta[si];
    v += net.k_inf(i) * (1.0 - std::cos(theta[si] - net.phi_inf(i)));
    for (int j = i + 1; j < net.n; ++j) {
      v += net.K(i, j) * (1.0 - std::cos(theta[si] - theta[static_cast<std::size_t>(j)] - net.phi(i, j)));
    }
  }
  return v;
}

void grad_V(std::span<const double> theta, const ReducedNetwork& net, std::span<double> out) {
  for (int i = 0; i < net.n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    double g = -net.P(i) + net.k_inf(i) * std::sin(theta[si] - net.phi_inf(i));
    for (int j = 0; j < net.n; ++j) {
      if (j == i) continue;
      g += net.K(i, j) * std::sin(theta[si] - theta[static_cast<std::size_t>(j)] - net.phi(i, j));
    }
    out[si] = g;
  }
}

void grad_V_batch(const Eigen::MatrixXd& theta, const ReducedNetwork& net, Eigen::MatrixXd& out) {
  // sin(a - b - p) = cos p (s_a c_b - c_a s_b) - sin p (c_a c_b + s_a s_b)
  const Eigen::MatrixXd s = theta.array().sin().matrix();
  const Eigen::MatrixXd c = theta.array().cos().matrix();
  const Eigen::MatrixXd sc = c * net.Kc.transpose() - s * net.Ks.transpose();
  const Eigen::MatrixXd cs = s * net.Kc.transpose() + c * net.Ks.transpose();
  out = s.cwiseProduct(sc) - c.cwiseProduct(cs);
  out.rowwise() -= net.P.transpose();
  if (net.k_inf.any()) {
    for (Eigen::Index i = 0; i < net.n; ++i) {
      out.col(i).array() +=
          net.k_inf(i) * (theta.col(i).array() - net.phi_inf(i)).sin();
    }
  }
}

OutageResult apply_line_outage(const UnreducedCase& c, int branch_index) {
  OutageResult result{c, {}};
  Branch* target = nullptr;
  for (Branch& br : result.network.branches) {
    if (br.branch_index == branch_index) target = &br;
  }
  if (target == nullptr) throw Error(Errc::UnknownBranch, "branch " + std::to_string(branch_index));
  if (target->status == 0) throw Error(Errc::AlreadyOut, "branch " + std::to_string(branch_index));
  target->status = 0;

  const UnreducedCase& g = result.network;
  std::vector<std::vector<std::size_t>> adj(g.buses.size());
  for (const Branch& br : g.branches) {
    if (br.status == 0) continue;
    const std::size_t a = g.bus_position(br.from);
    const std::size_t b = g.bus_position(br.to);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<bool> seen(g.buses.size(), false);
  std::queue<std::size_t> todo;
  if (!g.buses.empty()) {
    todo.push(0);
    seen[0] = true;
  }
  std::size_t reached = todo.size();
  while (!todo.empty()) {
    const std::size_t u = todo.front();
    todo.pop();
    for (std::size_t v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        todo.push(v);
      }
    }
  }
  if (reached != g.buses.size()) {
    result.diagnostics.push_back(
        {Errc::DisconnectedNetwork, "removing branch " + std::to_string(branch_index) + " islands " +
                                        std::to_string(g.buses.size() - reached) + " bus(es)"});
  }
  return result;
}

namespace {

json complex_vector(const Eigen::VectorXcd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back({v(i).real(), v(i).imag()});
  return a;
}

json real_vector(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json real_matrix(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(real_vector(m.row(i).transpose()));
  return a;
}

Eigen::VectorXd read_real_vector(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

Eigen::VectorXcd read_complex_vector(const json& a) {
  Eigen::VectorXcd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = cd(a[i].at(0).get<double>(), a[i].at(1).get<double>());
  }
  return v;
}

}  // namespace

std::string to_reduced_json(const ReducedNetwork& net) {
  json j;
  j["format"] = "kprox-reduced-network";
  j["version"] = 1;
  j["n"] = net.n;
  j["gen_buses"] = net.gen_buses;
  if (net.Y.size() > 0) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < net.Y.rows(); ++i) rows.push_back(complex_vector(net.Y.row(i).transpose()));
    j["Y"] = rows;
  }
  if (net.E.size() > 0) j["E"] = complex_vector(net.E);
  if (net.I.size() > 0) j["I"] = complex_vector(net.I);
  j["P"] = real_vector(net.P);
  j["phi"] = real_matrix(net.phi);
  j["K"] = real_matrix(net.K);
  j["M"] = real_vector(net.m);
  j["Gamma"] = real_vector(net.gamma);
  j["Sigma"] = real_vector(net.sigma);
  j["k_inf"] = real_vector(net.k_inf);
  j["phi_inf"] = real_vector(net.phi_inf);
  return j.dump(2);
}

ReducedNetwork parse_reduced_json(std::string_view text) {
  ReducedNetwork net;
  try {
    const json j = json::parse(text);
    net.n = j.at("n").get<int>();
    if (j.contains("gen_buses")) net.gen_buses = j.at("gen_buses").get<std::vector<int>>();
    if (j.contains("Y")) {
      const json& rows = j.at("Y");
      net.Y.resize(net.n, net.n);
      for (int i = 0; i < net.n; ++i) net.Y.row(i) = read_complex_vector(rows.at(static_cast<std::size_t>(i))).transpose();
    }
    if (j.contains("E")) net.E = read_complex_vector(j.at("E"));
    if (j.contains("I")) net.I = read_complex_vector(j.at("I"));
    net.P = read_real_vector(j.at("P"));
    auto read_matrix = [&](const json& a) {
      Eigen::MatrixXd m(net.n, net.n);
      for (int i = 0; i < net.n; ++i) m.row(i) = read_real_vector(a.at(static_cast<std::size_t>(i))).transpose();
      return m;
    };
    net.phi = j.contains("phi") ? read_matrix(j.at("phi")) : Eigen::MatrixXd::Zero(net.n, net.n);
    net.K = j.contains("K") ? read_matrix(j.at("K")) : Eigen::MatrixXd::Zero(net.n, net.n);
    net.m = read_real_vector(j.at("M"));
    net.gamma = read_real_vector(j.at("Gamma"));
    net.sigma = read_real_vector(j.at("Sigma"));
    if (j.contains("k_inf")) net.k_inf = read_real_vector(j.at("k_inf"));
    if (j.contains("phi_inf")) net.phi_inf = read_real_vector(j.at("phi_inf"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Config, std::string("reduced_network.json: ") + e.what());
  }
  finalize(net);
  return net;
}

}  // namespace kprox
