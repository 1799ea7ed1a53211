#pragma once

// Initial joint laws on T^n x R^n: product von Mises (or uniform) angles times
// a uniform box of velocities, with exact sampling.

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>

#include <Eigen/Dense>

#include "kprox/ensemble.hpp"
#include "kprox/rng.hpp"

namespace kprox {

/// I0(k) = sum_r (k^2/4)^r / (r!)^2; series to k = 15, asymptotic beyond.
double bessel_i0(double kappa);
/// exp(-k) I0(k), finite for every k >= 0.
double bessel_i0e(double kappa);

/// Doubled: exp(k cos(2t - mu)) / (2 pi I0(k)), bimodal with period pi.
/// Standard: exp(k cos(t - mu)) / (2 pi I0(k)).
enum class VmConvention { Doubled, Standard };

std::string_view to_string(VmConvention c) noexcept;
VmConvention parse_vm_convention(std::string_view text);

double von_mises_pdf(double theta, double mu, double kappa, VmConvention c);
double von_mises_log_pdf(double theta, double mu, double kappa, VmConvention c);

/// Best-Fisher rejection sampler for the standard law; result in [0, 2pi).
double sample_von_mises(double mu, double kappa, CounterRng& rng);
/// Samples the given convention; the doubled law draws phi ~ VM(mu, k) and
/// returns phi/2 or phi/2 + pi with equal probability.
double sample_von_mises(double mu, double kappa, VmConvention c, CounterRng& rng);

struct VonMisesProduct {
  Eigen::VectorXd mu;
  Eigen::VectorXd kappa;
  VmConvention convention = VmConvention::Doubled;
};
struct UniformCircle {};
struct UniformBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct InitialPdf {
  int n = 0;
  std::variant<VonMisesProduct, UniformCircle> theta_law;
  UniformBox omega_law;

  /// Throws Error{Config} on inconsistent sizes, negative kappa or lo >= hi.
  void validate() const;
  /// Angles are wrapped to [0, 2pi) first; -inf outside the velocity box.
  double log_density(std::span<const double> x) const;
  double density(std::span<const double> x) const;
};

/// Particle i draws from CounterRng(seed, InitialSample, i), so the ensemble
/// does not depend on the worker count. Values hold the exact joint density.
Ensemble sample_initial(const InitialPdf& pdf, long N, std::uint64_t seed,
                        StreamPurpose purpose = StreamPurpose::InitialSample);

}  // namespace kprox
