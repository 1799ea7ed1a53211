#pragma once

// 2-Wasserstein distance between weighted point clouds with squared
// Euclidean ground cost.

#include <Eigen/Dense>

namespace kprox {

struct WeightedCloud {
  Eigen::MatrixXd points;   // N x d
  Eigen::VectorXd weights;  // sums to 1
};

enum class OtMode { Exact, Sinkhorn };

struct OtOptions {
  OtMode mode = OtMode::Sinkhorn;
  /// Entropic weight as a fraction of the median ground cost.
  double epsilon_rel = 1e-3;
  /// Sinkhorn stops when the row-marginal L1 error falls below this.
  double tolerance = 1e-10;
  int max_iterations = 100000;
};

struct OtResult {
  double w2 = 0.0;        // sqrt of the plan's transport cost
  double cost = 0.0;      // sum P_ij C_ij
  Eigen::MatrixXd plan;
  int iterations = 0;
  bool converged = true;
};

/// Largest N_a * N_b accepted by the exact solver.
inline constexpr long kExactOtMaxEntries = 4096;

Eigen::MatrixXd squared_distance_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Error{WeightMismatch} when the weight sums differ by more than 1e-9;
/// Error{Config} when exact mode is asked for more than kExactOtMaxEntries entries.
OtResult wasserstein2(const WeightedCloud& a, const WeightedCloud& b, const OtOptions& opt = {});

/// Exact transportation LP by successive shortest paths.
OtResult exact_transport(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a, const Eigen::VectorXd& b);
/// Log-domain Sinkhorn with epsilon scaling from the median cost down to eps.
OtResult sinkhorn_transport(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                            double eps, double tolerance, int max_iterations);

}  // namespace kprox
