#pragma once

// Euler-Maruyama stepping of the swing SDE in original (theta, omega) and
// transformed (xi, eta) coordinates.

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "kprox/ensemble.hpp"
#include "kprox/network.hpp"
#include "kprox/rng.hpp"
#include "kprox/transform.hpp"

namespace kprox {

/// Step k of particle p uses CounterRng(seed, purpose, p, k), so a trajectory
/// is fixed by (seed, purpose) whatever the worker count.
struct NoiseStream {
  std::uint64_t seed = 0;
  StreamPurpose purpose = StreamPurpose::Noise;
  bool enabled = true;  // false gives zeta = 0 (noiseless Euler)
};

/// Standard normal increments zeta for step `step`, N x n.
Eigen::MatrixXd noise_block(Eigen::Index N, int n, const NoiseStream& noise, long step);

/// theta+ = theta + h omega
/// omega+ = omega + h M^-1 (-grad V(theta) - Gamma omega) + M^-1 Sigma sqrt(h) zeta
/// Advances step/t; values untouched. Error{NonFinite} names the first bad particle.
void em_step_original(Ensemble& ens, const ReducedNetwork& net, double h, const NoiseStream& noise);

/// Upsilon grad U evaluated on a batch of xi (N x n).
using TransformedForce = std::function<void(const Eigen::MatrixXd& xi, Eigen::MatrixXd& out)>;

/// xi+ = xi + h eta
/// eta+ = eta + h (-Upsilon grad U(xi) - grad F(eta)) + sqrt(h) zeta
void em_step_transformed(Ensemble& ens, const ReducedNetwork& net, const TransformSpec& spec, double h,
                         const NoiseStream& noise);
/// Same step with an injected force field in place of the network potential.
void em_step_transformed(Ensemble& ens, const TransformedForce& force, const TransformSpec& spec,
                         double h, const NoiseStream& noise);

/// Throws Error{NonFinite} if any state is NaN or infinite.
void check_finite(const Ensemble& ens);

}  // namespace kprox
