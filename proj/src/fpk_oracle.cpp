#include "kprox/fpk_oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "kprox/errors.hpp"

namespace kprox {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMassLeakLimit = 1e-4;

double force_term(const ReducedNetwork& net, double theta) {
  std::array<double, 1> th{theta};
  std::array<double, 1> g{};
  grad_V(th, net, g);
  return g[0];
}

void check_oracle_network(const ReducedNetwork& net) {
  if (net.n != 1) throw Error(Errc::Config, "the grid oracle needs n = 1");
  if (!(net.sigma(0) > 0.0)) throw Error(Errc::Config, "the grid oracle needs sigma > 0");
}

}  // namespace

GridDensity make_grid(const FpkOptions& opt) {
  if (opt.g_theta < 4 || opt.g_omega < 4 || !(opt.omega_max > 0.0)) {
    throw Error(Errc::Config, "grid needs at least 4 cells per axis and omega_max > 0");
  }
  GridDensity g;
  g.dtheta = kTwoPi / opt.g_theta;
  g.domega = 2.0 * opt.omega_max / opt.g_omega;
  g.theta.resize(opt.g_theta);
  g.omega.resize(opt.g_omega);
  for (int i = 0; i < opt.g_theta; ++i) g.theta(i) = (i + 0.5) * g.dtheta;
  for (int j = 0; j < opt.g_omega; ++j) g.omega(j) = -opt.omega_max + (j + 0.5) * g.domega;
  g.values = Eigen::MatrixXd::Zero(opt.g_theta, opt.g_omega);
  return g;
}

GridDensity project_density(const std::function<double(double, double)>& rho0, const FpkOptions& opt,
                            int subsamples) {
  GridDensity g = make_grid(opt);
  const int s = std::max(1, subsamples);
  for (int i = 0; i < opt.g_theta; ++i) {
    for (int j = 0; j < opt.g_omega; ++j) {
      double acc = 0.0;
      for (int a = 0; a < s; ++a) {
        const double th = i * g.dtheta + (a + 0.5) * g.dtheta / s;
        for (int b = 0; b < s; ++b) {
          const double w = -opt.omega_max + j * g.domega + (b + 0.5) * g.domega / s;
          acc += rho0(th, w);
        }
      }
      g.values(i, j) = acc / (s * s);
    }
  }
  const double m = g.mass();
  if (!(m > 0.0)) throw Error(Errc::Config, "initial density has no mass on the grid");
  g.values /= m;
  return g;
}

double fpk_stability_bound(const ReducedNetwork& net, const FpkOptions& opt) {
  check_oracle_network(net);
  const GridDensity g = make_grid(opt);
  const double m = net.m(0);
  const double diff = net.sigma(0) * net.sigma(0) / (2.0 * m * m);
  double vmax = 0.0;
  for (int i = 0; i < opt.g_theta; ++i) vmax = std::max(vmax, std::abs(force_term(net, g.theta(i))));
  const double amax = (net.gamma(0) * opt.omega_max + vmax) / m;
  return 1.0 / (opt.omega_max / g.dtheta + amax / g.domega + 2.0 * diff / (g.domega * g.domega));
}

std::vector<GridDensity> fd_fpk_oracle_n1(const ReducedNetwork& net, const GridDensity& rho0,
                                          const FpkOptions& opt, const std::vector<double>& times) {
  check_oracle_network(net);
  const double bound = fpk_stability_bound(net, opt);
  const double dt_max = opt.h_pde > 0.0 ? opt.h_pde : 0.9 * bound;
  if (dt_max > bound) {
    throw Error(Errc::UnstableStep, "h_pde " + std::to_string(dt_max) + " exceeds the bound " + std::to_string(bound));
  }
  const int gt = opt.g_theta;
  const int gw = opt.g_omega;
  if (rho0.values.rows() != gt || rho0.values.cols() != gw) throw Error(Errc::Config, "initial grid shape mismatch");

  const double m = net.m(0);
  const double gamma = net.gamma(0);
  const double diff = net.sigma(0) * net.sigma(0) / (2.0 * m * m);
  GridDensity g = rho0;
  const double dth = g.dtheta;
  const double dw = g.domega;
  const double mass0 = g.mass();

  Eigen::VectorXd vprime(gt);
  for (int i = 0; i < gt; ++i) vprime(i) = force_term(net, g.theta(i));
  // Velocity-face accelerations a = -(gamma w + V') / m at faces j + 1/2, j = 0..gw-2.
  Eigen::MatrixXd accel(gt, std::max(gw - 1, 0));
  for (int i = 0; i < gt; ++i) {
    for (int j = 0; j + 1 < gw; ++j) {
      const double wf = -opt.omega_max + (j + 1) * dw;
      accel(i, j) = -(gamma * wf + vprime(i)) / m;
    }
  }
  Eigen::MatrixXd next(gt, gw);
  Eigen::MatrixXd ftheta(gt, gw);  // flux through the face between cell i and i+1 (periodic)
  Eigen::MatrixXd fomega(gt, std::max(gw - 1, 0));

  std::vector<GridDensity> out;
  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  for (double target : sorted) {
    while (g.t < target - 1e-12) {
      const double dt = std::min(dt_max, target - g.t);
      for (int i = 0; i < gt; ++i) {
        const int ip = (i + 1) % gt;
        for (int j = 0; j < gw; ++j) {
          const double w = g.omega(j);
          ftheta(i, j) = w * (w > 0.0 ? g.values(i, j) : g.values(ip, j));
        }
        for (int j = 0; j + 1 < gw; ++j) {
          const double a = accel(i, j);
          const double up = a > 0.0 ? g.values(i, j) : g.values(i, j + 1);
          fomega(i, j) = a * up - diff * (g.values(i, j + 1) - g.values(i, j)) / dw;
        }
      }
      for (int i = 0; i < gt; ++i) {
        const int im = (i + gt - 1) % gt;
        for (int j = 0; j < gw; ++j) {
          const double fw_hi = j + 1 < gw ? fomega(i, j) : 0.0;
          const double fw_lo = j > 0 ? fomega(i, j - 1) : 0.0;
          next(i, j) = g.values(i, j) - dt / dth * (ftheta(i, j) - ftheta(im, j)) - dt / dw * (fw_hi - fw_lo);
        }
      }
      g.values.swap(next);
      g.t += dt;
    }
    if (std::abs(g.mass() - mass0) > kMassLeakLimit) {
      throw Error(Errc::MassLeak, "mass drifted to " + std::to_string(g.mass()));
    }
    out.push_back(g);
  }
  return out;
}

GridDensity boltzmann_density(const ReducedNetwork& net, const FpkOptions& opt) {
  check_oracle_network(net);
  const double beta = 2.0 * net.gamma(0) / (net.sigma(0) * net.sigma(0));
  const double m = net.m(0);
  return project_density(
      [&](double th, double w) {
        std::array<double, 1> x{th};
        return std::exp(-beta * (potential_V(x, net) + 0.5 * m * w * w));
      },
      opt);
}

double integrate_marginal(const Eigen::VectorXd& marginal, double start, double width, double lo, double hi) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < marginal.size(); ++k) {
    const double a = start + static_cast<double>(k) * width;
    const double b = a + width;
    const double overlap = std::min(b, hi) - std::max(a, lo);
    if (overlap > 0.0) acc += marginal(k) * overlap;
  }
  return acc;
}

}  // namespace kprox
