#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <limits>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "kprox/distributions.hpp"
#include "kprox/rng.hpp"
#include "test_support.hpp"

using namespace kprox;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Composite Simpson on [0, 2pi).
double integrate_pdf(double mu, double kappa, VmConvention c, double upto, int panels = 20000) {
  const double h = upto / panels;
  double s = von_mises_pdf(0.0, mu, kappa, c) + von_mises_pdf(upto, mu, kappa, c);
  for (int k = 1; k < panels; ++k) s += (k % 2 ? 4.0 : 2.0) * von_mises_pdf(k * h, mu, kappa, c);
  return s * h / 3.0;
}

/// Kolmogorov-Smirnov distance of samples in [0, 2pi) against a tabulated CDF.
double ks_distance(std::vector<double> x, double mu, double kappa) {
  std::sort(x.begin(), x.end());
  const int grid = 4096;
  std::vector<double> cdf(grid + 1, 0.0);
  const double h = kTwoPi / grid;
  for (int k = 0; k < grid; ++k) {
    const double a = k * h;
    const double f = von_mises_pdf(a, mu, kappa, VmConvention::Standard);
    const double m = von_mises_pdf(a + h / 2, mu, kappa, VmConvention::Standard);
    const double b = von_mises_pdf(a + h, mu, kappa, VmConvention::Standard);
    cdf[static_cast<std::size_t>(k + 1)] = cdf[static_cast<std::size_t>(k)] + h * (f + 4 * m + b) / 6.0;
  }
  auto F = [&](double t) {
    const double u = t / h;
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(u), grid - 1);
    const double frac = u - static_cast<double>(k);
    return cdf[k] + frac * (cdf[k + 1] - cdf[k]);
  };
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = F(x[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
  }
  return d;
}

std::vector<double> draw(double mu, double kappa, int count, std::uint64_t seed) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    CounterRng rng(seed, StreamPurpose::Test, static_cast<std::uint64_t>(i));
    out.push_back(sample_von_mises(mu, kappa, rng));
  }
  return out;
}

}  // namespace

TEST_SUITE("distributions") {

TEST_CASE("philox known answers") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        A4{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("counter streams are addressable and distinct") {
  CounterRng a(5, StreamPurpose::Noise, 3, 7), b(5, StreamPurpose::Noise, 3, 7), c(5, StreamPurpose::Noise, 3, 8);
  for (int i = 0; i < 10; ++i) {
    const std::uint64_t va = a.next_u64();
    CHECK(va == b.next_u64());
    CHECK(va != c.next_u64());
  }
  CounterRng u(1, StreamPurpose::Test);
  double mean = 0.0, var = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = u.uniform();
    CHECK_FALSE((x <= 0.0 || x >= 1.0));
    mean += x;
  }
  mean /= n;
  CHECK(std::abs(mean - 0.5) < 5 * std::sqrt(1.0 / 12.0 / n));
  CounterRng g(2, StreamPurpose::Test);
  mean = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = g.normal();
    mean += x;
    var += x * x;
  }
  mean /= n;
  var = var / n - mean * mean;
  CHECK(std::abs(mean) < 5 / std::sqrt(double(n)));
  CHECK(std::abs(var - 1.0) < 5 * std::sqrt(2.0 / n));
}

TEST_CASE("Bessel I0 against the standard library and reference values") {
  CHECK(bessel_i0(0.0) == 1.0);
  CHECK(std::abs(bessel_i0(1.0) - 1.2660658777520) < 1e-12);
  CHECK(std::abs(bessel_i0(2.0) - 2.2795853023360) < 1e-12);
  for (double k = 0.0; k <= 40.0; k += 0.37) {
    const double ref = std::cyl_bessel_i(0.0, k);
    CHECK(std::abs(bessel_i0(k) - ref) <= 1e-13 * ref);
    CHECK(std::abs(bessel_i0e(k) - std::exp(-k) * ref) <= 1e-13 * std::exp(-k) * ref);
  }
  CHECK(std::isfinite(bessel_i0e(1e6)));
  double prev = 0.0;
  for (double k = 0.0; k <= 30.0; k += 0.05) {
    const double v = bessel_i0(k);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("von Mises density values and normalisation") {
  CHECK(von_mises_pdf(1.3, 0.4, 0.0, VmConvention::Standard) == doctest::Approx(1.0 / kTwoPi).epsilon(1e-15));
  CHECK(von_mises_pdf(1.0, 1.0, 1.0, VmConvention::Standard) ==
        doctest::Approx(std::exp(1.0) / (kTwoPi * 1.2660658777520)).epsilon(1e-12));
  CHECK(von_mises_pdf(1.0, 1.0, 1.0, VmConvention::Standard) == doctest::Approx(0.341710).epsilon(1e-5));
  for (const double kappa : {0.0, 1.0, 5.0, 7.0}) {
    for (const VmConvention c : {VmConvention::Standard, VmConvention::Doubled}) {
      CHECK(std::abs(integrate_pdf(0.7, kappa, c, kTwoPi) - 1.0) < 1e-10);
    }
  }
  for (double t = 0.0; t < kTwoPi; t += 0.1) {
    CHECK(von_mises_pdf(t, 6.1963, 6.0, VmConvention::Doubled) ==
          doctest::Approx(von_mises_pdf(t + std::numbers::pi, 6.1963, 6.0, VmConvention::Doubled)).epsilon(1e-12));
    CHECK(std::exp(von_mises_log_pdf(t, 2.0, 700.0, VmConvention::Standard)) ==
          doctest::Approx(von_mises_pdf(t, 2.0, 700.0, VmConvention::Standard)).epsilon(1e-12));
  }
  CHECK(std::isfinite(von_mises_log_pdf(2.0, 2.0, 1e5, VmConvention::Standard)));
}

TEST_CASE("sampler: uniform limit") {
  const std::vector<double> x = draw(0.0, 0.0, 100000, 3);
  // KS critical value at p = 0.01 is 1.63 / sqrt(N).
  CHECK(ks_distance(x, 0.0, 0.0) < 1.63 / std::sqrt(1e5));
}

TEST_CASE("sampler: circular mean and CDF agreement") {
  const std::vector<double> x = draw(1.0, 5.0, 100000, 4);
  double s = 0.0, c = 0.0;
  for (double t : x) {
    CHECK(t >= 0.0);
    CHECK(t < kTwoPi);
    s += std::sin(t);
    c += std::cos(t);
  }
  CHECK(std::abs(std::atan2(s, c) - 1.0) < 0.05);
  for (const double kappa : {1.0, 4.0, 7.0}) {
    CHECK(ks_distance(draw(2.5, kappa, 100000, 5 + static_cast<std::uint64_t>(kappa)), 2.5, kappa) <= 0.01);
  }
}

TEST_CASE("sampler: doubled convention is bimodal") {
  int near = 0, far = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    CounterRng rng(6, StreamPurpose::Test, static_cast<std::uint64_t>(i));
    const double t = sample_von_mises(1.0, 8.0, VmConvention::Doubled, rng);
    const double d0 = std::abs(std::remainder(t - 0.5, kTwoPi));
    const double d1 = std::abs(std::remainder(t - 0.5 - std::numbers::pi, kTwoPi));
    if (d0 < 0.5) ++near;
    if (d1 < 0.5) ++far;
  }
  CHECK(near + far > 0.95 * n);
  CHECK(std::abs(near - far) < 4 * std::sqrt(double(n)));
}

TEST_CASE("initial ensembles") {
  InitialPdf pdf;
  pdf.n = 5;
  VonMisesProduct vm;
  vm.mu = Eigen::VectorXd(5);
  vm.mu << 0, 6.1963, 6.0612, 6.0350, 6.0500;
  vm.kappa = Eigen::VectorXd(5);
  vm.kappa << 5, 6, 7, 4, 5;
  pdf.theta_law = vm;
  pdf.omega_law = {Eigen::VectorXd::Constant(5, -0.1), Eigen::VectorXd::Constant(5, 0.1)};
  pdf.validate();
  const Ensemble a = sample_initial(pdf, 500, 9);
  const Ensemble b = sample_initial(pdf, 500, 9);
  CHECK(a.states == b.states);
  CHECK(a.log_values == b.log_values);
  CHECK(a.velocities().minCoeff() >= -0.1);
  CHECK(a.velocities().maxCoeff() <= 0.1);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const Eigen::VectorXd x = a.states.row(i).transpose();
    CHECK(a.log_values(i) == doctest::Approx(pdf.log_density(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())))).epsilon(1e-14));
    CHECK(std::isfinite(a.log_values(i)));
  }

  InitialPdf flat;
  flat.n = 3;
  flat.theta_law = UniformCircle{};
  flat.omega_law = {Eigen::VectorXd::Constant(3, -0.1), Eigen::VectorXd::Constant(3, 0.1)};
  const Ensemble u = sample_initial(flat, 100, 1);
  const double want = 3.0 * std::log(5.0 / kTwoPi);
  for (Eigen::Index i = 0; i < u.size(); ++i) CHECK(u.log_values(i) == doctest::Approx(want).epsilon(1e-14));
  const std::vector<double> outside{1.0, 1.0, 1.0, 0.2, 0.0, 0.0};
  CHECK(flat.log_density(outside) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("initial law validation") {
  InitialPdf pdf;
  pdf.n = 2;
  pdf.theta_law = UniformCircle{};
  pdf.omega_law = {Eigen::VectorXd::Constant(2, 0.1), Eigen::VectorXd::Constant(2, -0.1)};
  CHECK(test::error_code_of([&] { pdf.validate(); }) == Errc::Config);
  pdf.omega_law = {Eigen::VectorXd::Constant(1, -0.1), Eigen::VectorXd::Constant(2, 0.1)};
  CHECK(test::error_code_of([&] { pdf.validate(); }) == Errc::Config);
  VonMisesProduct vm{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Constant(2, -1.0), VmConvention::Standard};
  pdf.omega_law = {Eigen::VectorXd::Constant(2, -0.1), Eigen::VectorXd::Constant(2, 0.1)};
  pdf.theta_law = vm;
  CHECK(test::error_code_of([&] { pdf.validate(); }) == Errc::Config);
}

TEST_CASE("weighted MC estimate of the total mass") {
  // Uniform proposal on the support, importance weight pdf / q.
  InitialPdf pdf;
  pdf.n = 2;
  pdf.theta_law = VonMisesProduct{Eigen::Vector2d(0.3, 5.0), Eigen::Vector2d(4.0, 2.0), VmConvention::Doubled};
  pdf.omega_law = {Eigen::Vector2d(-0.1, -0.2), Eigen::Vector2d(0.1, 0.3)};
  const double vol = kTwoPi * kTwoPi * 0.2 * 0.5;
  CounterRng rng(12, StreamPurpose::Test);
  const int n = 100000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const std::vector<double> x{rng.uniform(0, kTwoPi), rng.uniform(0, kTwoPi), rng.uniform(-0.1, 0.1),
                                rng.uniform(-0.2, 0.3)};
    const double w = pdf.density(x) * vol;
    s += w;
    s2 += w * w;
  }
  const double mean = s / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::abs(mean - 1.0) < 3 * se);
}

}  // TEST_SUITE
