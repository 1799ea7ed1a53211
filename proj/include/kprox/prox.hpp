#pragma once

// Entropic proximal update of particle density values over a moving cloud,
// and the Euler-Maruyama + prox step that composes it with the dynamics.

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "kprox/dynamics.hpp"
#include "kprox/ensemble.hpp"
#include "kprox/network.hpp"
#include "kprox/transform.hpp"

namespace kprox {

/// Weight of the position-velocity consistency term of the ground cost.
inline constexpr double kGroundCostCoupling = 12.0;

enum class LogDomain { Auto, Never, Always };
std::string_view to_string(LogDomain mode) noexcept;
LogDomain parse_log_domain(std::string_view text);

struct Z0 {
  enum class Kind { Ones, Random } kind = Kind::Ones;
  std::uint64_t seed = 0;  // Random: z0_i ~ U(0, 1] from CounterRng(seed, ProxInit, i, step)
};
/// "ones" or "random:<seed>".
Z0 parse_z0(std::string_view text);
std::string to_string(const Z0& z0);

struct ProxConfig {
  double h = 1e-3;
  double epsilon = 0.05;
  double delta = 1e-3;
  int l_max = 300;
  long N = 1000;
  Z0 z0;
  LogDomain log_domain = LogDomain::Auto;
  bool strict = false;  // NonConvergence throws instead of returning the last iterate

  /// Throws Error{Config} unless h, epsilon, delta > 0, l_max >= 1, N >= 1.
  void validate() const;
  /// 1 / (1 + 2 epsilon / h)
  double exponent() const { return 1.0 / (1.0 + 2.0 * epsilon / h); }
};

struct ProxReport {
  int iterations = 0;
  double residual_y = 0.0;
  double residual_z = 0.0;
  bool converged = false;
  double wall_seconds = 0.0;
  bool log_domain = false;
  std::vector<double> history_y;
  std::vector<double> history_z;
};

struct ProxResult {
  Eigen::VectorXd log_values;  // log rho~_k
  ProxReport report;
  // Exit iterates of the literal recursion for the given rho~_{k-1}, as logs.
  Eigen::VectorXd log_y;
  Eigen::VectorXd log_z;
};

/// <a, Upsilon^-1 a> + 12 <b, Upsilon^-1 b> with
/// a = eta_bar - eta + h Upsilon grad U(xi), b = ((xi_bar - xi) - (eta_bar - eta)) / h.
double ground_cost(std::span<const double> xi, std::span<const double> eta, std::span<const double> xi_bar,
                   std::span<const double> eta_bar, std::span<const double> grad_u,
                   std::span<const double> upsilon, double h);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// The ground cost as a squared distance between embeddings: row i (previous
/// particle) maps to `rows.row(i)`, column j (next particle) to column j of
/// the (2n x N) structure-of-arrays block `cols`.
struct CostEmbedding {
  int dim = 0;
  RowMatrix rows;
  std::vector<double> cols;
};
CostEmbedding embed_cost(const Ensemble& prev, const Ensemble& next, const ReducedNetwork& net,
                         const TransformSpec& spec, double h);

/// C(i, j) = ground cost from previous particle i to next particle j; Upsilon grad U is
/// evaluated once per row.
RowMatrix build_cost_matrix(const Ensemble& prev, const Ensemble& next, const ReducedNetwork& net,
                            const TransformSpec& spec, double h);

/// One proximal update rho~_{k-1} -> rho~_k.
///
/// The iteration runs on rho~_{k-1} / max(rho~_{k-1}) with each kernel row
/// scaled to a unit maximum; both are exact symmetries of the output, and the
/// reported residuals are measured in that normalization. `step` keys the
/// random z0 stream.
ProxResult prox_step(const Eigen::VectorXd& log_values_prev, const Ensemble& prev, const Ensemble& next,
                     const ReducedNetwork& net, const TransformSpec& spec, const ProxConfig& cfg,
                     long step = 0);

/// The same update from a precomputed cost matrix and log zeta = -F(eta_prev) - 1.
ProxResult prox_from_cost(const Eigen::VectorXd& log_values_prev, const RowMatrix& cost,
                          const Eigen::VectorXd& log_zeta, const ProxConfig& cfg, long step = 0);

struct StepResult {
  Ensemble ensemble;
  ProxReport report;
};

/// em_step_transformed followed by prox_step on the (pre, post) pair.
StepResult full_step(const Ensemble& ens, const ReducedNetwork& net, const TransformSpec& spec,
                     const ProxConfig& cfg, const NoiseStream& noise);

struct PropagateHooks {
  /// Called on the coordinating thread after every step.
  std::function<void(const Ensemble&, const ProxReport&)> on_step;
};

/// Runs `steps` full steps from a transformed-coordinate ensemble and returns the last one.
Ensemble propagate(Ensemble ens, const ReducedNetwork& net, const TransformSpec& spec,
                   const ProxConfig& cfg, long steps, const NoiseStream& noise,
                   const PropagateHooks& hooks = {});

/// Number of steps K with K h = t_final; Error{Config} if not integral within 1e-9.
long step_count(double t_final, double h);

}  // namespace kprox
