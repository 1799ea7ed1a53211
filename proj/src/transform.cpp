#include "kprox/transform.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kprox/errors.hpp"

namespace kprox {

std::string_view to_string(FMode mode) noexcept {
  return mode == FMode::Paper ? "paper" : "derived";
}

FMode parse_f_mode(std::string_view text) {
  if (text == "paper") return FMode::Paper;
  if (text == "derived") return FMode::Derived;
  throw Error(Errc::Config, "f_mode must be paper or derived, got '" + std::string(text) + "'");
}

TransformSpec make_transform(const ReducedNetwork& net, FMode mode) {
  const int n = net.n;
  TransformSpec spec;
  spec.n = n;
  spec.f_mode = mode;
  spec.psi_diag.resize(2 * n);
  spec.log_upsilon.resize(n);
  spec.f_coeff.resize(n);
  double log_pre = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = net.m(i) / net.sigma(i);
    spec.psi_diag(i) = r;
    spec.psi_diag(n + i) = r;
    log_pre += 2.0 * std::log(r);
    spec.f_coeff(i) = mode == FMode::Paper ? net.gamma(i) / net.sigma(i) : net.gamma(i) / net.m(i);
  }
  spec.log_prefactor = log_pre;
  spec.log_jac = log_pre;
  for (int i = 0; i < n; ++i) {
    spec.log_upsilon(i) = -log_pre + std::log(net.m(i)) - 2.0 * std::log(net.sigma(i));
  }
  spec.upsilon_diag = spec.log_upsilon.array().exp().matrix();
  return spec;
}

void to_xi_eta(std::span<const double> x, const TransformSpec& spec, std::span<double> out) {
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = spec.psi_diag(static_cast<Eigen::Index>(k)) * x[k];
}

void to_theta_omega(std::span<const double> y, const TransformSpec& spec, std::span<double> out) {
  for (std::size_t k = 0; k < y.size(); ++k) out[k] = y[k] / spec.psi_diag(static_cast<Eigen::Index>(k));
}

namespace {

std::vector<double> angles_from_xi(std::span<const double> xi, const TransformSpec& spec) {
  std::vector<double> theta(xi.size());
  for (std::size_t i = 0; i < xi.size(); ++i) theta[i] = xi[i] / spec.psi_diag(static_cast<Eigen::Index>(i));
  return theta;
}

}  // namespace

double potential_U(std::span<const double> xi, const ReducedNetwork& net, const TransformSpec& spec) {
  const std::vector<double> theta = angles_from_xi(xi, spec);
  return std::exp(spec.log_prefactor) * potential_V(theta, net);
}

void grad_U(std::span<const double> xi, const ReducedNetwork& net, const TransformSpec& spec,
            std::span<double> out) {
  const std::vector<double> theta = angles_from_xi(xi, spec);
  grad_V(theta, net, out);
  const double pre = std::exp(spec.log_prefactor);
  for (int i = 0; i < net.n; ++i) out[static_cast<std::size_t>(i)] *= pre / spec.psi_diag(i);
}

void upsilon_grad_U(std::span<const double> xi, const ReducedNetwork& net,
                    const TransformSpec& spec, std::span<double> out) {
  const std::vector<double> theta = angles_from_xi(xi, spec);
  grad_V(theta, net, out);
  for (int i = 0; i < net.n; ++i) out[static_cast<std::size_t>(i)] /= net.sigma(i);
}

void upsilon_grad_U_batch(const Eigen::MatrixXd& xi, const ReducedNetwork& net,
                          const TransformSpec& spec, Eigen::MatrixXd& out) {
  const Eigen::RowVectorXd inv_psi = spec.psi_diag.head(net.n).cwiseInverse().transpose();
  const Eigen::MatrixXd theta = xi.array().rowwise() * inv_psi.array();
  grad_V_batch(theta, net, out);
  out.array().rowwise() /= net.sigma.transpose().array();
}

double potential_F(std::span<const double> eta, const TransformSpec& spec) {
  double f = 0.0;
  for (int i = 0; i < spec.n; ++i) {
    const double e = eta[static_cast<std::size_t>(i)];
    f += 0.5 * spec.f_coeff(i) * e * e;
  }
  return f;
}

void grad_F(std::span<const double> eta, const TransformSpec& spec, std::span<double> out) {
  for (int i = 0; i < spec.n; ++i) {
    out[static_cast<std::size_t>(i)] = spec.f_coeff(i) * eta[static_cast<std::size_t>(i)];
  }
}

LogDensity pushforward_log_density(LogDensity log_rho0, const TransformSpec& spec) {
  return [log_rho0 = std::move(log_rho0), spec](std::span<const double> y) {
    std::vector<double> x(y.size());
    to_theta_omega(y, spec, x);
    return log_rho0(x) - spec.log_jac;
  };
}

Ensemble pushforward(const Ensemble& ens, const TransformSpec& spec) {
  if (ens.coords != Coords::Original) throw Error(Errc::Config, "pushforward expects original coordinates");
  Ensemble out = ens;
  out.coords = Coords::Transformed;
  out.states.array().rowwise() *= spec.psi_diag.transpose().array();
  out.log_values.array() -= spec.log_jac;
  return out;
}

Ensemble pushback_weights(const Ensemble& ens, const TransformSpec& spec) {
  if (ens.coords != Coords::Transformed) throw Error(Errc::Config, "pushback expects transformed coordinates");
  Ensemble out = ens;
  out.coords = Coords::Original;
  out.states.array().rowwise() /= spec.psi_diag.transpose().array();
  out.log_values.array() += spec.log_jac;
  return out;
}

EinsteinResult check_einstein(const ReducedNetwork& net) {
  const Eigen::ArrayXd ratio = 2.0 * net.gamma.array() / net.sigma.array().square();
  const double ref = ratio(0);
  const double dev = ((ratio - ref).abs() / ref).maxCoeff();
  if (dev <= 1e-9) return EinsteinBeta{ref};
  return EinsteinViolation{dev};
}

}  // namespace kprox
