#pragma once

// Finite-volume solver of the single-machine kinetic Fokker-Planck equation
//   d rho/dt = -w d_t rho + d_w(rho (gamma w + V'(t)) / m) + sigma^2 / (2 m^2) d_ww rho
// on [0, 2pi) x [-W, W], periodic in the angle and with zero flux at +-W.

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "kprox/network.hpp"

namespace kprox {

struct GridDensity {
  Eigen::VectorXd theta;  // cell centres on [0, 2pi)
  Eigen::VectorXd omega;  // cell centres on [-W, W]
  Eigen::MatrixXd values; // G_theta x G_omega cell averages
  double dtheta = 0.0;
  double domega = 0.0;
  double t = 0.0;

  double mass() const { return values.sum() * dtheta * domega; }
  Eigen::VectorXd theta_marginal() const { return values.rowwise().sum() * domega; }
  Eigen::VectorXd omega_marginal() const { return values.colwise().sum().transpose() * dtheta; }
};

struct FpkOptions {
  double omega_max = 5.0;
  int g_theta = 256;
  int g_omega = 256;
  /// Time step; 0 picks 0.9 of the stability bound.
  double h_pde = 0.0;
};

/// Empty grid with the option's geometry.
GridDensity make_grid(const FpkOptions& opt);

/// Cell averages of a density given pointwise, by s x s midpoint sub-sampling,
/// renormalised to unit mass.
GridDensity project_density(const std::function<double(double theta, double omega)>& rho0,
                            const FpkOptions& opt, int subsamples = 8);

/// Largest stable explicit step: 1 / (max|w|/dt + max|a|/dw + 2D/dw^2).
double fpk_stability_bound(const ReducedNetwork& net, const FpkOptions& opt);

/// Advances rho0 and returns snapshots at each requested time (ascending).
/// Error{Config} unless n = 1 and sigma > 0; Error{UnstableStep} for a step
/// above the bound; Error{MassLeak} when more than 1e-4 mass is lost.
std::vector<GridDensity> fd_fpk_oracle_n1(const ReducedNetwork& net, const GridDensity& rho0,
                                          const FpkOptions& opt, const std::vector<double>& times);

/// Boltzmann density exp(-beta H) / Z with H = V(t) + m w^2 / 2, beta = 2 gamma / sigma^2.
GridDensity boltzmann_density(const ReducedNetwork& net, const FpkOptions& opt);

/// Integral of a grid marginal over [lo, hi], by exact cell overlap.
double integrate_marginal(const Eigen::VectorXd& marginal, double start, double width, double lo, double hi);

}  // namespace kprox
