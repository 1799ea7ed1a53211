#pragma once

// Isotropic-diffusion coordinates (xi, eta) = Psi (theta, omega) with
// Psi = I_2 (x) M Sigma^-1, the scaling Upsilon and the potentials U, F.

#include <cmath>
#include <functional>
#include <span>
#include <string_view>
#include <variant>

#include <Eigen/Dense>

#include "kprox/ensemble.hpp"
#include "kprox/network.hpp"

namespace kprox {

/// Convention for the dissipative potential F.
///   Paper:   F = 1/2 <eta, Sigma^-1 Gamma eta>
///   Derived: F = 1/2 <eta, M^-1 Gamma eta>, the exact Ito image of the swing SDE under Psi.
enum class FMode { Paper, Derived };

std::string_view to_string(FMode mode) noexcept;
FMode parse_f_mode(std::string_view text);

struct TransformSpec {
  int n = 0;
  Eigen::VectorXd psi_diag;      // 2n entries, m_i / sigma_i repeated
  Eigen::VectorXd log_upsilon;   // n entries
  Eigen::VectorXd upsilon_diag;  // exp(log_upsilon); may hold inf for very large n
  double log_prefactor = 0.0;    // log prod_i m_i^2 / sigma_i^2, the U prefactor
  double log_jac = 0.0;          // log of the pushforward factor, equal to log_prefactor
  Eigen::VectorXd f_coeff;       // grad F = f_coeff .* eta
  FMode f_mode = FMode::Derived;

  double jac() const { return std::exp(log_jac); }
};

TransformSpec make_transform(const ReducedNetwork& net, FMode mode = FMode::Derived);

void to_xi_eta(std::span<const double> x, const TransformSpec& spec, std::span<double> out);
void to_theta_omega(std::span<const double> y, const TransformSpec& spec, std::span<double> out);

/// U(xi) = prod(m^2/sigma^2) V(Sigma M^-1 xi). Overflows for large n; use
/// upsilon_grad_U for dynamics.
double potential_U(std::span<const double> xi, const ReducedNetwork& net, const TransformSpec& spec);
void grad_U(std::span<const double> xi, const ReducedNetwork& net, const TransformSpec& spec,
            std::span<double> out);
/// Upsilon grad U(xi) evaluated as Sigma^-1 grad V(Sigma M^-1 xi), free of the
/// prefactor and its overflow.
void upsilon_grad_U(std::span<const double> xi, const ReducedNetwork& net,
                    const TransformSpec& spec, std::span<double> out);
/// Batched upsilon_grad_U: xi and out are N x n.
void upsilon_grad_U_batch(const Eigen::MatrixXd& xi, const ReducedNetwork& net,
                          const TransformSpec& spec, Eigen::MatrixXd& out);

double potential_F(std::span<const double> eta, const TransformSpec& spec);
void grad_F(std::span<const double> eta, const TransformSpec& spec, std::span<double> out);

using LogDensity = std::function<double(std::span<const double>)>;

/// log rho0~(xi, eta) = log rho0(Sigma M^-1 xi, Sigma M^-1 eta) - log_jac.
LogDensity pushforward_log_density(LogDensity log_rho0, const TransformSpec& spec);

/// Maps every state by Psi and divides the values by the Jacobian factor.
Ensemble pushforward(const Ensemble& ens, const TransformSpec& spec);
/// Inverse of pushforward: states by Psi^-1, values times the Jacobian factor.
Ensemble pushback_weights(const Ensemble& ens, const TransformSpec& spec);

struct EinsteinBeta {
  double beta;
};
struct EinsteinViolation {
  double max_relative_deviation;
};
using EinsteinResult = std::variant<EinsteinBeta, EinsteinViolation>;

/// Checks sigma_i^2 proportional to gamma_i: all 2 gamma_i / sigma_i^2 equal within 1e-9 relative.
EinsteinResult check_einstein(const ReducedNetwork& net);

}  // namespace kprox
