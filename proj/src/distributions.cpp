#include "kprox/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "kprox/errors.hpp"
#include "kprox/parallel.hpp"

namespace kprox {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSeriesLimit = 15.0;

double i0_series(double k) {
  const double q = 0.25 * k * k;
  double term = 1.0;
  double sum = 1.0;
  for (int r = 1; r < 500; ++r) {
    term *= q / (static_cast<double>(r) * r);
    sum += term;
    if (term < 1e-16 * sum) break;
  }
  return sum;
}

// sum_k ((2k-1)!!)^2 / (k! (8x)^k), truncated at the smallest term.
double i0_asymptotic_tail(double k) {
  double term = 1.0;
  double sum = 1.0;
  for (int j = 1; j < 60; ++j) {
    const double next = term * (2.0 * j - 1.0) * (2.0 * j - 1.0) / (8.0 * j * k);
    if (next > term) break;
    term = next;
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

double wrap_2pi(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

}  // namespace

double bessel_i0(double kappa) {
  const double k = std::abs(kappa);
  if (k <= kSeriesLimit) return i0_series(k);
  return std::exp(k) / std::sqrt(kTwoPi * k) * i0_asymptotic_tail(k);
}

double bessel_i0e(double kappa) {
  const double k = std::abs(kappa);
  if (k <= kSeriesLimit) return i0_series(k) * std::exp(-k);
  return i0_asymptotic_tail(k) / std::sqrt(kTwoPi * k);
}

std::string_view to_string(VmConvention c) noexcept {
  return c == VmConvention::Doubled ? "doubled" : "standard";
}

VmConvention parse_vm_convention(std::string_view text) {
  if (text == "doubled") return VmConvention::Doubled;
  if (text == "standard") return VmConvention::Standard;
  throw Error(Errc::Config, "convention must be doubled or standard, got '" + std::string(text) + "'");
}

double von_mises_log_pdf(double theta, double mu, double kappa, VmConvention c) {
  const double arg = c == VmConvention::Doubled ? 2.0 * theta - mu : theta - mu;
  return kappa * (std::cos(arg) - 1.0) - std::log(kTwoPi * bessel_i0e(kappa));
}

double von_mises_pdf(double theta, double mu, double kappa, VmConvention c) {
  return std::exp(von_mises_log_pdf(theta, mu, kappa, c));
}

double sample_von_mises(double mu, double kappa, CounterRng& rng) {
  if (kappa < 1e-8) return wrap_2pi(kTwoPi * rng.uniform());
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  double f = 0.0;
  for (;;) {
    const double z = std::cos(std::numbers::pi * rng.uniform());
    f = (1.0 + r * z) / (r + z);
    const double c = kappa * (r - f);
    const double u2 = rng.uniform();
    if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) break;
  }
  const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
  return wrap_2pi(mu + sign * std::acos(std::clamp(f, -1.0, 1.0)));
}

double sample_von_mises(double mu, double kappa, VmConvention c, CounterRng& rng) {
  if (c == VmConvention::Standard) return sample_von_mises(mu, kappa, rng);
  const double phi = sample_von_mises(mu, kappa, rng);
  const double branch = rng.uniform() < 0.5 ? 0.0 : std::numbers::pi;
  return wrap_2pi(0.5 * phi + branch);
}

void InitialPdf::validate() const {
  if (n < 1) throw Error(Errc::Config, "initial pdf needs n >= 1");
  if (const auto* vm = std::get_if<VonMisesProduct>(&theta_law)) {
    if (vm->mu.size() != n || vm->kappa.size() != n) {
      throw Error(Errc::Config, "von Mises mu/kappa must have n entries");
    }
    if ((vm->kappa.array() < 0.0).any()) throw Error(Errc::Config, "kappa must be >= 0");
  }
  if (omega_law.lo.size() != n || omega_law.hi.size() != n) {
    throw Error(Errc::Config, "omega box bounds must have n entries");
  }
  if ((omega_law.lo.array() >= omega_law.hi.array()).any()) {
    throw Error(Errc::Config, "omega box needs lo < hi");
  }
}

double InitialPdf::log_density(std::span<const double> x) const {
  double lp = 0.0;
  const auto* vm = std::get_if<VonMisesProduct>(&theta_law);
  for (int i = 0; i < n; ++i) {
    const double w = x[static_cast<std::size_t>(n + i)];
    if (w < omega_law.lo(i) || w > omega_law.hi(i)) return -std::numeric_limits<double>::infinity();
    lp -= std::log(omega_law.hi(i) - omega_law.lo(i));
    const double th = wrap_2pi(x[static_cast<std::size_t>(i)]);
    lp += vm ? von_mises_log_pdf(th, vm->mu(i), vm->kappa(i), vm->convention) : -std::log(kTwoPi);
  }
  return lp;
}

double InitialPdf::density(std::span<const double> x) const { return std::exp(log_density(x)); }

Ensemble sample_initial(const InitialPdf& pdf, long N, std::uint64_t seed, StreamPurpose purpose) {
  pdf.validate();
  if (N < 1) throw Error(Errc::Config, "sample count must be >= 1");
  Ensemble ens;
  ens.coords = Coords::Original;
  ens.n = pdf.n;
  // Row-major scratch keeps each particle's draw contiguous for log_density.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(N, 2 * pdf.n);
  ens.log_values.resize(N);
  const auto* vm = std::get_if<VonMisesProduct>(&pdf.theta_law);
  parallel_for(static_cast<std::size_t>(N), [&](std::size_t p) {
    CounterRng rng(seed, purpose, p);
    double* x = rows.data() + p * static_cast<std::size_t>(2 * pdf.n);
    for (int i = 0; i < pdf.n; ++i) {
      x[i] = vm ? sample_von_mises(vm->mu(i), vm->kappa(i), vm->convention, rng) : kTwoPi * rng.uniform();
    }
    for (int i = 0; i < pdf.n; ++i) x[pdf.n + i] = rng.uniform(pdf.omega_law.lo(i), pdf.omega_law.hi(i));
    ens.log_values(static_cast<Eigen::Index>(p)) =
        pdf.log_density(std::span<const double>(x, static_cast<std::size_t>(2 * pdf.n)));
  });
  ens.states = rows;
  return ens;
}

}  // namespace kprox
