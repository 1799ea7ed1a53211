#include "kprox/dynamics.hpp"

#include <cmath>
#include <string>

#include "kprox/errors.hpp"
#include "kprox/parallel.hpp"

namespace kprox {

Eigen::MatrixXd noise_block(Eigen::Index N, int n, const NoiseStream& noise, long step) {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(N, n);
  if (!noise.enabled) return z;
  parallel_for(static_cast<std::size_t>(N), [&](std::size_t p) {
    CounterRng rng(noise.seed, noise.purpose, p, static_cast<std::uint64_t>(step));
    for (int i = 0; i < n; ++i) z(static_cast<Eigen::Index>(p), i) = rng.normal();
  });
  return z;
}

void check_finite(const Ensemble& ens) {
  for (Eigen::Index p = 0; p < ens.size(); ++p) {
    if (!ens.states.row(p).allFinite()) {
      throw Error(Errc::NonFinite, "particle " + std::to_string(p) + " at step " + std::to_string(ens.step));
    }
  }
}

void em_step_original(Ensemble& ens, const ReducedNetwork& net, double h, const NoiseStream& noise) {
  if (ens.coords != Coords::Original) throw Error(Errc::Config, "em_step_original expects original coordinates");
  const Eigen::MatrixXd zeta = noise_block(ens.size(), ens.n, noise, ens.step);
  Eigen::MatrixXd g;
  grad_V_batch(ens.angles(), net, g);
  const Eigen::MatrixXd omega = ens.velocities();
  const Eigen::RowVectorXd inv_m = net.m.cwiseInverse().transpose();
  const Eigen::RowVectorXd gamma = net.gamma.transpose();
  const Eigen::RowVectorXd diff = (net.sigma.cwiseQuotient(net.m) * std::sqrt(h)).transpose();
  ens.angles() += h * omega;
  ens.velocities() +=
      ((h * (-g - (omega.array().rowwise() * gamma.array()).matrix())).array().rowwise() * inv_m.array() +
       zeta.array().rowwise() * diff.array())
          .matrix();
  ++ens.step;
  ens.t = static_cast<double>(ens.step) * h;
  check_finite(ens);
}

void em_step_transformed(Ensemble& ens, const TransformedForce& force, const TransformSpec& spec,
                         double h, const NoiseStream& noise) {
  if (ens.coords != Coords::Transformed) {
    throw Error(Errc::Config, "em_step_transformed expects transformed coordinates");
  }
  const Eigen::MatrixXd zeta = noise_block(ens.size(), ens.n, noise, ens.step);
  Eigen::MatrixXd g;
  force(ens.angles(), g);
  const Eigen::MatrixXd eta = ens.velocities();
  const Eigen::RowVectorXd fc = spec.f_coeff.transpose();
  ens.angles() += h * eta;
  ens.velocities() += h * (-g - (eta.array().rowwise() * fc.array()).matrix()) + std::sqrt(h) * zeta;
  ++ens.step;
  ens.t = static_cast<double>(ens.step) * h;
  check_finite(ens);
}

void em_step_transformed(Ensemble& ens, const ReducedNetwork& net, const TransformSpec& spec, double h,
                         const NoiseStream& noise) {
  em_step_transformed(
      ens, [&](const Eigen::MatrixXd& xi, Eigen::MatrixXd& out) { upsilon_grad_U_batch(xi, net, spec, out); },
      spec, h, noise);
}

}  // namespace kprox
