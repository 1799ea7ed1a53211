#pragma once

#include <Eigen/Dense>

namespace kprox {

enum class Coords { Original, Transformed };

/// Probability-weighted point cloud. Row i of `states` is particle i laid out
/// as (angles, velocities): (theta, omega) or (xi, eta). Angles are unwrapped.
///
/// Density values are kept as logarithms so that values spanning hundreds of
/// orders of magnitude (large n pushforwards) stay representable; positivity
/// holds by construction.
struct Ensemble {
  Coords coords = Coords::Original;
  int n = 0;
  Eigen::MatrixXd states;      // N x 2n
  Eigen::VectorXd log_values;  // N
  long step = 0;
  double t = 0.0;

  Eigen::Index size() const { return states.rows(); }
  auto angles() { return states.leftCols(n); }
  auto angles() const { return states.leftCols(n); }
  auto velocities() { return states.rightCols(n); }
  auto velocities() const { return states.rightCols(n); }
  Eigen::VectorXd values() const { return log_values.array().exp().matrix(); }
};

}  // namespace kprox
