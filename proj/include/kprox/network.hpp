#pragma once

// Augmented bus admittance, Kron reduction, and the coupled-oscillator
// parameters of the reduced swing model.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "kprox/casefile.hpp"
#include "kprox/errors.hpp"

namespace kprox {

/// Generator internal nodes first (boundary block), network buses after
/// (interior block, in case order).
struct AugmentedAdmittance {
  Eigen::MatrixXcd y;
  int boundary_count = 0;
  int interior_count = 0;

  Eigen::MatrixXcd boundary() const { return y.topLeftCorner(boundary_count, boundary_count); }
  Eigen::MatrixXcd coupling() const { return y.topRightCorner(boundary_count, interior_count); }
  Eigen::MatrixXcd interior() const { return y.bottomRightCorner(interior_count, interior_count); }
};

/// Parameters of m_i w'_i = P_i - gamma_i w_i - sum_j k_ij sin(t_i - t_j - phi_ij) + sigma_i dW_i.
///
/// `k_inf` / `phi_inf` optionally couple generator i to an infinite bus held at
/// angle 0, adding k_inf_i (1 - cos(t_i - phi_inf_i)) to the potential. They
/// are zero for Kron-reduced networks and exist for single-machine fixtures.
struct ReducedNetwork {
  int n = 0;
  Eigen::MatrixXcd Y;  // empty for synthetic networks
  Eigen::VectorXcd E;
  Eigen::VectorXcd I;
  Eigen::VectorXd P;
  Eigen::MatrixXd phi;
  Eigen::MatrixXd K;
  Eigen::VectorXd m, gamma, sigma;
  Eigen::VectorXd k_inf, phi_inf;
  std::vector<int> gen_buses;

  // K .* cos(phi) and K .* sin(phi), filled by finalize()
  Eigen::MatrixXd Kc, Ks;
};

/// Checks the invariants (zero diagonals, symmetric nonnegative K, positive
/// m/gamma/sigma), zero-fills optional members and caches Kc/Ks. Throws
/// Error{InvalidCase} on violation.
void finalize(ReducedNetwork& net);

AugmentedAdmittance build_admittance(const UnreducedCase& c, const DynamicParams& dyn);

/// Schur complement Y_bnd - Y_bi Y_int^-1 Y_bi^T; Error{SingularInterior} when
/// the reciprocal condition estimate of Y_int is below 1e-12.
Eigen::MatrixXcd kron_reduce(const AugmentedAdmittance& aug);

/// Operating point of the augmented network: complex internal EMFs behind x'_d
/// (boundary) and the case's bus phasors (interior), all in p.u.
struct OperatingPoint {
  Eigen::VectorXcd e_boundary;
  Eigen::VectorXcd e_interior;
};
OperatingPoint operating_point(const UnreducedCase& c, const DynamicParams& dyn);

/// Strict requires every phi_ij in [0, pi/2). Signed also accepts (-pi/2, 0),
/// which constant-impedance loads produce on meshed cases, and reports them
/// as a DegeneratePhase diagnostic instead of failing.
enum class PhasePolicy { Strict, Signed };

std::string_view to_string(PhasePolicy p) noexcept;
PhasePolicy parse_phase_policy(std::string_view s);

/// Net current injected into each interior bus at the operating point,
/// Y_bi^T E_bnd + Y_int E_int. Zero up to power-flow rounding for a solved case.
Eigen::VectorXcd interior_injection(const AugmentedAdmittance& aug, const OperatingPoint& op);

/// Reduced currents are I = -Y_bi Y_int^-1 J. J defaults to the injection of
/// `aug` at the case operating point; pass the intact network's J to carry the
/// pre-outage injections across a topology change.
ReducedNetwork derive_parameters(const Eigen::MatrixXcd& Y, const AugmentedAdmittance& aug,
                                 const UnreducedCase& c, const DynamicParams& dyn,
                                 PhasePolicy policy = PhasePolicy::Strict,
                                 std::vector<Diagnostic>* diagnostics = nullptr,
                                 const Eigen::VectorXcd* injection = nullptr);

/// build_admittance -> kron_reduce -> derive_parameters.
ReducedNetwork reduce_network(const UnreducedCase& c, const DynamicParams& dyn,
                              PhasePolicy policy = PhasePolicy::Strict,
                              std::vector<Diagnostic>* diagnostics = nullptr,
                              const Eigen::VectorXcd* injection = nullptr);

ReducedNetwork make_reduced_network(const Table1Draw& draw);

/// V(t) = -sum P_i t_i + sum_{i<j} k_ij (1 - cos(t_i - t_j - phi_ij)) (+ infinite-bus terms).
double potential_V(std::span<const double> theta, const ReducedNetwork& net);

/// Network force term: g_i = -P_i + sum_j k_ij sin(t_i - t_j - phi_ij) (+ k_inf_i sin(t_i - phi_inf_i)).
/// Equals dV/dt_i exactly when phi = 0; with phase shifts the pairwise force is
/// not a gradient field and only this form enters the dynamics.
void grad_V(std::span<const double> theta, const ReducedNetwork& net, std::span<double> out);

/// Row-wise grad_V for a batch: theta and out are N x n.
void grad_V_batch(const Eigen::MatrixXd& theta, const ReducedNetwork& net, Eigen::MatrixXd& out);

struct OutageResult {
  UnreducedCase network;
  std::vector<Diagnostic> diagnostics;  // DisconnectedNetwork when the removal islands a bus
};

OutageResult apply_line_outage(const UnreducedCase& c, int branch_index);

std::string to_reduced_json(const ReducedNetwork& net);
ReducedNetwork parse_reduced_json(std::string_view text);

}  // namespace kprox
