#include <cmath>
#include <numbers>
#include <variant>

#include "doctest.h"
#include "kprox/distributions.hpp"
#include "kprox/transform.hpp"
#include "test_support.hpp"

using namespace kprox;

namespace {

ReducedNetwork scalar_network(double m, double gamma, double sigma) {
  ReducedNetwork net;
  net.n = 1;
  net.P = Eigen::VectorXd::Constant(1, 0.3);
  net.m = Eigen::VectorXd::Constant(1, m);
  net.gamma = Eigen::VectorXd::Constant(1, gamma);
  net.sigma = Eigen::VectorXd::Constant(1, sigma);
  net.K = Eigen::MatrixXd::Zero(1, 1);
  net.phi = Eigen::MatrixXd::Zero(1, 1);
  net.k_inf = Eigen::VectorXd::Constant(1, 1.0);
  finalize(net);
  return net;
}

}  // namespace

TEST_SUITE("transform") {

TEST_CASE("linear map examples") {
  const TransformSpec spec = make_transform(scalar_network(2.0, 1.0, 1.0));
  const std::vector<double> x{1.0, 3.0};
  std::vector<double> y(2), back(2);
  to_xi_eta(x, spec, y);
  CHECK(y[0] == 2.0);
  CHECK(y[1] == 6.0);
  to_theta_omega(y, spec, back);
  CHECK(back == x);
  CHECK(spec.jac() == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("M = Sigma is the identity and collapses U to V") {
  ReducedNetwork net = test::synthetic_network(4, 3);
  net.sigma = net.m;
  finalize(net);
  const TransformSpec spec = make_transform(net);
  CHECK(std::abs(spec.log_jac) < 1e-15);
  CounterRng rng(3, StreamPurpose::Test, 5);
  std::vector<double> th(4), g_u(4), g_v(4);
  for (double& t : th) t = rng.uniform(-2.0, 2.0);
  CHECK(potential_U(th, net, spec) == doctest::Approx(potential_V(th, net)).epsilon(1e-14));
  grad_U(th, net, spec, g_u);
  grad_V(th, net, g_v);
  for (int i = 0; i < 4; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    CHECK(g_u[ui] == doctest::Approx(g_v[ui]).epsilon(1e-14));
  }
}

TEST_CASE("drift identity Upsilon grad U(Psi theta) = Sigma^-1 grad V(theta)") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const int n = 1 + static_cast<int>(seed % 8);
    const ReducedNetwork net = make_reduced_network(sample_table1_params(n, seed));
    const TransformSpec spec = make_transform(net);
    CounterRng rng(seed, StreamPurpose::Test, 6);
    std::vector<double> th(static_cast<std::size_t>(n)), xi(th.size()), gu(th.size()), gv(th.size()),
        fused(th.size());
    for (double& t : th) t = rng.uniform(-std::numbers::pi, std::numbers::pi);
    for (int i = 0; i < n; ++i) xi[static_cast<std::size_t>(i)] = net.m(i) / net.sigma(i) * th[static_cast<std::size_t>(i)];
    grad_U(xi, net, spec, gu);
    grad_V(th, net, gv);
    upsilon_grad_U(xi, net, spec, fused);
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const double want = gv[ui] / net.sigma(i);
      CHECK(std::abs(spec.upsilon_diag(i) * gu[ui] - want) <= 1e-12 * std::max(1.0, std::abs(want)));
      CHECK(std::abs(fused[ui] - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("grad U matches finite differences of U") {
  ReducedNetwork net = test::synthetic_network(3, 7, false);
  const TransformSpec spec = make_transform(net);
  std::vector<double> xi{0.4, -1.1, 2.0}, g(3);
  grad_U(xi, net, spec, g);
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> hi = xi, lo = xi;
    hi[i] += 1e-6;
    lo[i] -= 1e-6;
    const double fd = (potential_U(hi, net, spec) - potential_U(lo, net, spec)) / 2e-6;
    CHECK(std::abs(fd - g[i]) < 1e-6 * std::max(1.0, std::abs(g[i])));
  }
}

TEST_CASE("batched fused force equals the per-row force") {
  const ReducedNetwork net = test::synthetic_network(4, 8);
  const TransformSpec spec = make_transform(net);
  CounterRng rng(8, StreamPurpose::Test, 3);
  Eigen::MatrixXd xi(5, 4), out;
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi.data()[i] = rng.uniform(-3.0, 3.0);
  upsilon_grad_U_batch(xi, net, spec, out);
  for (Eigen::Index r = 0; r < 5; ++r) {
    const Eigen::VectorXd row = xi.row(r).transpose();
    std::vector<double> g(4);
    upsilon_grad_U(std::span<const double>(row.data(), 4), net, spec, g);
    for (int i = 0; i < 4; ++i) CHECK(out(r, i) == doctest::Approx(g[static_cast<std::size_t>(i)]).epsilon(1e-14));
  }
}

TEST_CASE("dissipative potential in both modes") {
  const ReducedNetwork net = scalar_network(4.0, 2.0, 1.0);
  const TransformSpec paper = make_transform(net, FMode::Paper);
  const TransformSpec derived = make_transform(net, FMode::Derived);
  const std::vector<double> eta{3.0};
  std::vector<double> g(1);
  CHECK(potential_F(eta, paper) == doctest::Approx(9.0).epsilon(1e-15));
  grad_F(eta, paper, g);
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(potential_F(eta, derived) == doctest::Approx(0.5 * 9.0 * 2.0 / 4.0).epsilon(1e-15));
  grad_F(eta, derived, g);
  CHECK(g[0] == doctest::Approx(1.5).epsilon(1e-15));
  const std::vector<double> zero{0.0};
  CHECK(potential_F(zero, paper) == 0.0);

  const std::vector<double> e2{0.7};
  const double fd = (potential_F(std::vector<double>{0.7 + 1e-6}, derived) -
                     potential_F(std::vector<double>{0.7 - 1e-6}, derived)) / 2e-6;
  grad_F(e2, derived, g);
  CHECK(std::abs(fd - g[0]) < 1e-6);

  CHECK(parse_f_mode("paper") == FMode::Paper);
  CHECK(test::error_code_of([] { parse_f_mode("other"); }) == Errc::Config);
}

TEST_CASE("pushforward density and weights") {
  const ReducedNetwork net = scalar_network(2.0, 1.0, 1.0);
  const TransformSpec spec = make_transform(net);
  const LogDensity rho0 = [](std::span<const double> x) { return -0.5 * (x[0] * x[0] + x[1] * x[1]); };
  const LogDensity pushed = pushforward_log_density(rho0, spec);
  const std::vector<double> y{1.2, -0.4};
  const std::vector<double> half{0.6, -0.2};
  CHECK(std::exp(pushed(y)) == doctest::Approx(std::exp(rho0(half)) / 4.0).epsilon(1e-14));

  Ensemble ens;
  ens.coords = Coords::Transformed;
  ens.n = 1;
  ens.states = Eigen::MatrixXd(1, 2);
  ens.states << 1.0, 2.0;
  ens.log_values = Eigen::VectorXd::Constant(1, std::log(0.1));
  const Ensemble back = pushback_weights(ens, spec);
  CHECK(back.values()(0) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(back.states(0, 0) == 0.5);
  CHECK(back.states(0, 1) == 1.0);
  const Ensemble again = pushforward(back, spec);
  CHECK(std::abs(again.log_values(0) - ens.log_values(0)) < 1e-15);
  CHECK(again.states == ens.states);
}

TEST_CASE("log Jacobian stays finite at n = 50") {
  const ReducedNetwork net = make_reduced_network(sample_table1_params(50, 2));
  const TransformSpec spec = make_transform(net);
  CHECK(std::isfinite(spec.log_jac));
  double want = 0.0;
  for (int i = 0; i < 50; ++i) want += 2.0 * std::log(net.m(i) / net.sigma(i));
  CHECK(spec.log_jac == doctest::Approx(want).epsilon(1e-13));
}

TEST_CASE("Einstein relation") {
  ReducedNetwork net = test::synthetic_network(2, 1);
  net.gamma << 1.0, 2.0;
  net.sigma << std::sqrt(2.0), 2.0;
  finalize(net);
  const EinsteinResult r = check_einstein(net);
  REQUIRE(std::holds_alternative<EinsteinBeta>(r));
  CHECK(std::get<EinsteinBeta>(r).beta == doctest::Approx(1.0).epsilon(1e-15));

  const EinsteinResult single = check_einstein(scalar_network(1.0, 3.0, 2.0));
  REQUIRE(std::holds_alternative<EinsteinBeta>(single));
  CHECK(std::get<EinsteinBeta>(single).beta == doctest::Approx(1.5).epsilon(1e-15));

  net.sigma(1) = 3.0;
  CHECK(std::holds_alternative<EinsteinViolation>(check_einstein(net)));
}

}  // TEST_SUITE
