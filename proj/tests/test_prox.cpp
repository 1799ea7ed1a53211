#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "kprox/prox.hpp"
#include "test_support.hpp"

using namespace kprox;
using kprox::test::error_code_of;

namespace {

double lse(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

/// Dense log-domain fixed point run to tight convergence.
Eigen::VectorXd oracle_prox(const Eigen::VectorXd& log_rho, const RowMatrix& c, const Eigen::VectorXd& log_zeta,
                            double eps, double h) {
  const Eigen::Index N = c.rows();
  const double a = 1.0 / (1.0 + 2.0 * eps / h);
  const Eigen::MatrixXd lg = -c / (2.0 * eps);
  Eigen::VectorXd lz = Eigen::VectorXd::Zero(N), ly(N);
  auto update_y = [&] {
    for (Eigen::Index i = 0; i < N; ++i) ly(i) = log_rho(i) - lse(lg.row(i).transpose() + lz);
  };
  update_y();
  for (int it = 0; it < 2000; ++it) {
    Eigen::VectorXd lz_new(N);
    for (Eigen::Index j = 0; j < N; ++j) lz_new(j) = a * (log_zeta(j) - lse(lg.col(j) + ly));
    const double change = (lz_new - lz).cwiseAbs().maxCoeff();
    lz = lz_new;
    update_y();
    if (change < 1e-14) break;
  }
  Eigen::VectorXd out(N);
  for (Eigen::Index j = 0; j < N; ++j) out(j) = lz(j) + lse(lg.col(j) + ly);
  return out;
}

struct Instance {
  Eigen::VectorXd log_rho;
  RowMatrix cost;
  Eigen::VectorXd log_zeta;
};

/// Squared distances between two jittered copies of one cloud, scaled by `scale`.
Instance cloud_instance(long N, double scale, double jitter, std::uint64_t seed) {
  CounterRng rng(seed, StreamPurpose::Test, 300);
  Eigen::MatrixXd p(N, 3), q(N, 3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform(-1.0, 1.0);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = p.data()[i] + jitter * rng.normal();
  Instance in;
  in.cost = RowMatrix(N, N);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < N; ++j) in.cost(i, j) = scale * (p.row(i) - q.row(j)).squaredNorm();
  in.log_rho = Eigen::VectorXd(N);
  in.log_zeta = Eigen::VectorXd(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    in.log_rho(i) = rng.uniform(-3.0, 3.0);
    in.log_zeta(i) = -1.0 - rng.uniform(0.0, 2.0);
  }
  return in;
}

ProxConfig tight(double eps = 0.05, double h = 1e-3) {
  ProxConfig c;
  c.epsilon = eps;
  c.h = h;
  c.delta = 1e-13;
  c.l_max = 5000;
  return c;
}

Ensemble cloud(int n, long N, std::uint64_t seed, Coords coords = Coords::Transformed) {
  Ensemble e;
  e.coords = coords;
  e.n = n;
  e.states = Eigen::MatrixXd(N, 2 * n);
  CounterRng rng(seed, StreamPurpose::Test, 301);
  for (Eigen::Index i = 0; i < e.states.size(); ++i) e.states.data()[i] = rng.uniform(-1.0, 1.0);
  e.log_values = Eigen::VectorXd::Constant(N, -1.0);
  return e;
}

}  // namespace

TEST_SUITE("prox") {

TEST_CASE("ground cost examples") {
  const std::vector<double> zero{0.0}, one{1.0}, two{2.0};
  const std::vector<double> upsilon1{1.0}, upsilon2{2.0};
  CHECK(ground_cost(one, two, one, two, zero, upsilon1, 1e-3) == 0.0);
  // xi_bar - xi = 1, eta_bar = eta
  CHECK(ground_cost(zero, one, one, one, zero, upsilon1, 1.0) == doctest::Approx(12.0).epsilon(1e-15));
  // eta_bar - eta = 1 and xi_bar - xi = 1
  CHECK(ground_cost(zero, zero, one, one, zero, upsilon2, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(kGroundCostCoupling == 12.0);
}

TEST_CASE("cost matrix: hand-computed 2 x 2 fixture") {
  ReducedNetwork net = test::synthetic_network(1, 2);
  net.m.setConstant(2.0);
  net.sigma.setConstant(1.0);
  finalize(net);
  const TransformSpec spec = make_transform(net);
  const double h = 0.1;
  Ensemble prev = cloud(1, 2, 1), next = cloud(1, 2, 2);
  prev.states << 0.2, 0.5, -0.4, 1.0;
  next.states << 0.3, 0.1, -0.2, 0.9;
  const RowMatrix c = build_cost_matrix(prev, next, net, spec, h);
  for (int i = 0; i < 2; ++i) {
    // Upsilon grad U(xi) by hand: sigma^-1 V'(theta) with theta = xi / 2.
    const double theta = prev.states(i, 0) / 2.0;
    const double vprime = -net.P(0) + net.k_inf(0) * std::sin(theta - net.phi_inf(0));
    const double ugu = vprime / net.sigma(0);
    const double ups = spec.upsilon_diag(0);
    for (int j = 0; j < 2; ++j) {
      const double dxi = next.states(j, 0) - prev.states(i, 0);
      const double deta = next.states(j, 1) - prev.states(i, 1);
      const double av = deta + h * ugu;
      const double bv = (dxi - deta) / h;
      const double want = av * av / ups + 12.0 * bv * bv / ups;
      CHECK(std::abs(c(i, j) - want) <= 1e-14 * want);
    }
  }
}

TEST_CASE("cost matrix: embedding, zero diagonal and nonnegativity") {
  ReducedNetwork net = test::synthetic_network(3, 4);
  net.P.setZero();
  net.K.setZero();
  finalize(net);
  const TransformSpec spec = make_transform(net);
  const Ensemble prev = cloud(3, 20, 3);
  const RowMatrix self = build_cost_matrix(prev, prev, net, spec, 1e-2);
  // V = 0 gives grad U = 0, so s(x, x) = 0.
  for (int i = 0; i < 20; ++i) CHECK(self(i, i) == 0.0);

  const ReducedNetwork full = test::synthetic_network(3, 5);
  const TransformSpec fspec = make_transform(full);
  const Ensemble next = cloud(3, 20, 6);
  const RowMatrix c = build_cost_matrix(prev, next, full, fspec, 1e-2);
  CHECK(c.minCoeff() >= 0.0);
  const CostEmbedding emb = embed_cost(prev, next, full, fspec, 1e-2);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> gu(3);
    const Eigen::VectorXd xi = prev.states.row(i).head(3).transpose();
    upsilon_grad_U(std::span<const double>(xi.data(), 3), full, fspec, gu);
    for (int j = 0; j < 20; ++j) {
      std::vector<double> xi_i(3), eta_i(3), xi_j(3), eta_j(3), ups(3);
      for (int d = 0; d < 3; ++d) {
        xi_i[static_cast<std::size_t>(d)] = prev.states(i, d);
        eta_i[static_cast<std::size_t>(d)] = prev.states(i, 3 + d);
        xi_j[static_cast<std::size_t>(d)] = next.states(j, d);
        eta_j[static_cast<std::size_t>(d)] = next.states(j, 3 + d);
        ups[static_cast<std::size_t>(d)] = fspec.upsilon_diag(d);
      }
      std::vector<double> grad(3);
      for (std::size_t d = 0; d < 3; ++d) grad[d] = gu[d] / ups[d];
      const double direct = ground_cost(xi_i, eta_i, xi_j, eta_j, grad, ups, 1e-2);
      CHECK(std::abs(c(i, j) - direct) <= 1e-12 * std::max(1.0, direct));
      double d2 = 0.0;
      for (int d = 0; d < emb.dim; ++d) {
        const double diff = emb.rows(i, d) - emb.cols[static_cast<std::size_t>(d * 20 + j)];
        d2 += diff * diff;
      }
      CHECK(std::abs(d2 - direct) <= 1e-9 * std::max(1.0, direct));
    }
  }
}

TEST_CASE("config contract") {
  ProxConfig c;
  c.validate();
  CHECK(c.exponent() == doctest::Approx(1.0 / 101.0).epsilon(1e-15));
  c.epsilon = 0.0;
  CHECK(error_code_of([&] { c.validate(); }) == Errc::Config);
  c = ProxConfig{};
  c.l_max = 0;
  CHECK(error_code_of([&] { c.validate(); }) == Errc::Config);
  CHECK(step_count(1.0, 1e-3) == 1000);
  CHECK(step_count(0.0, 1e-3) == 0);
  CHECK(error_code_of([] { step_count(1.0, 0.3); }) == Errc::Config);
  CHECK(parse_z0("ones").kind == Z0::Kind::Ones);
  const Z0 r = parse_z0("random:42");
  CHECK(r.kind == Z0::Kind::Random);
  CHECK(r.seed == 42);
  CHECK(to_string(r) == "random:42");
  CHECK(error_code_of([] { parse_z0("random:"); }) == Errc::Config);
  CHECK(parse_log_domain("always") == LogDomain::Always);
}

TEST_CASE("N = 1 is the identity") {
  for (const LogDomain mode : {LogDomain::Never, LogDomain::Always}) {
    ProxConfig cfg;
    cfg.log_domain = mode;
    RowMatrix c(1, 1);
    c(0, 0) = 3.7;
    const Eigen::VectorXd lr = Eigen::VectorXd::Constant(1, -2.5);
    const ProxResult r = prox_from_cost(lr, c, Eigen::VectorXd::Constant(1, -1.3), cfg);
    CHECK(r.log_values(0) == doctest::Approx(-2.5).epsilon(1e-14));
  }
}

TEST_CASE("auto mode leaves the plain iteration when its iterates overflow") {
  // A constant cost makes every kernel entry 1, so the fixed point is
  // rho_j = zeta_j^a sum(rho) / sum(zeta^a), while y and z scale like
  // (sum zeta^a)^(1 / (1 - a)).
  ProxConfig cfg;
  cfg.h = 0.075;
  cfg.epsilon = 1.3e-3;
  cfg.l_max = 20000;
  cfg.delta = 1e-12;
  const RowMatrix c = RowMatrix::Constant(3, 3, 2e-6);
  const Eigen::VectorXd lr = (Eigen::VectorXd(3) << -0.5, 0.0, -2.0).finished();
  const Eigen::VectorXd lz = (Eigen::VectorXd(3) << -60.0, -61.0, -59.5).finished();
  const double a = cfg.exponent();
  const double log_mass = std::log(lr.array().exp().sum());
  const double log_norm = std::log((a * lz.array()).exp().sum());

  cfg.log_domain = LogDomain::Auto;
  const ProxResult r = prox_from_cost(lr, c, lz, cfg);
  CHECK(r.report.log_domain);
  CHECK(r.report.converged);
  for (int j = 0; j < 3; ++j) CHECK(r.log_values(j) == doctest::Approx(a * lz(j) + log_mass - log_norm).epsilon(1e-9));

  cfg.log_domain = LogDomain::Never;
  CHECK(test::error_code_of([&] { prox_from_cost(lr, c, lz, cfg); }) == Errc::NumericalUnderflow);
}

TEST_CASE("plain and log-domain iterations match the dense oracle") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const Instance in = cloud_instance(40, 0.05, 0.05, seed);
    const Eigen::VectorXd want = oracle_prox(in.log_rho, in.cost, in.log_zeta, 0.05, 1e-3);
    for (const LogDomain mode : {LogDomain::Never, LogDomain::Always}) {
      ProxConfig cfg = tight();
      cfg.log_domain = mode;
      const ProxResult r = prox_from_cost(in.log_rho, in.cost, in.log_zeta, cfg);
      CHECK(r.report.converged);
      CHECK(r.report.log_domain == (mode == LogDomain::Always));
      CHECK((r.log_values - want).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("truncated log kernel is exact on wide costs") {
  // Spreads of 1e3 .. 1e7 over 2 epsilon drive every tier of the sparse reduction.
  for (const double scale : {50.0, 5e3, 5e5}) {
    for (const double jitter : {0.0, 0.02, 0.3}) {
      const Instance in = cloud_instance(300, scale, jitter, static_cast<std::uint64_t>(scale + jitter * 100));
      const Eigen::VectorXd want = oracle_prox(in.log_rho, in.cost, in.log_zeta, 0.05, 1e-3);
      ProxConfig cfg = tight();
      cfg.log_domain = LogDomain::Always;
      const ProxResult r = prox_from_cost(in.log_rho, in.cost, in.log_zeta, cfg);
      CHECK(r.report.converged);
      const double err = (r.log_values - want).cwiseAbs().maxCoeff();
      INFO("scale " << scale << " jitter " << jitter);
      CHECK(err < 1e-9);
    }
  }
}

TEST_CASE("automatic switch and underflow detection") {
  const Instance wide = cloud_instance(30, 1e4, 0.1, 9);
  ProxConfig cfg;
  CHECK(prox_from_cost(wide.log_rho, wide.cost, wide.log_zeta, cfg).report.log_domain);
  cfg.log_domain = LogDomain::Never;
  CHECK(error_code_of([&] { prox_from_cost(wide.log_rho, wide.cost, wide.log_zeta, cfg); }) ==
        Errc::NumericalUnderflow);
  const Instance narrow = cloud_instance(30, 0.01, 0.1, 9);
  cfg.log_domain = LogDomain::Auto;
  CHECK_FALSE(prox_from_cost(narrow.log_rho, narrow.cost, narrow.log_zeta, cfg).report.log_domain);
}

TEST_CASE("exit iterates satisfy both stationarity identities") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Instance in = cloud_instance(8, 0.5, 0.2, seed);
    ProxConfig cfg;
    cfg.log_domain = seed % 2 ? LogDomain::Never : LogDomain::Always;
    const ProxResult r = prox_from_cost(in.log_rho, in.cost, in.log_zeta, cfg);
    REQUIRE(r.report.converged);
    const double a = cfg.exponent();
    const Eigen::MatrixXd lg = -in.cost / (2.0 * cfg.epsilon);
    for (int i = 0; i < 8; ++i) {
      const double lhs = r.log_y(i) + lse(lg.row(i).transpose() + r.log_z);
      CHECK(std::abs(std::expm1(lhs - in.log_rho(i))) <= 10 * cfg.delta);
      const double lhs2 = r.log_z(i) / a + lse(lg.col(i) + r.log_y);
      CHECK(std::abs(std::expm1(lhs2 - in.log_zeta(i))) <= 10 * cfg.delta);
      CHECK(std::abs(r.log_values(i) - (r.log_z(i) + lse(lg.col(i) + r.log_y))) < 1e-9);
    }
  }
}

TEST_CASE("output does not depend on the initial z") {
  const Instance in = cloud_instance(50, 1.0, 0.1, 3);
  ProxConfig ones = tight();
  ProxConfig rnd = tight();
  rnd.z0 = parse_z0("random:7");
  const ProxResult a = prox_from_cost(in.log_rho, in.cost, in.log_zeta, ones);
  const ProxResult b = prox_from_cost(in.log_rho, in.cost, in.log_zeta, rnd, 5);
  CHECK((a.log_values - b.log_values).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("kernel depends only on C / 2 epsilon") {
  const Instance in = cloud_instance(30, 0.3, 0.1, 4);
  const ProxResult a = prox_from_cost(in.log_rho, in.cost, in.log_zeta, tight(0.05, 1e-3));
  const RowMatrix scaled = in.cost * 3.0;
  const ProxResult b = prox_from_cost(in.log_rho, scaled, in.log_zeta, tight(0.15, 3e-3));
  CHECK((a.log_values - b.log_values).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("output scales with the input values") {
  const Instance in = cloud_instance(30, 0.3, 0.1, 5);
  const ProxResult a = prox_from_cost(in.log_rho, in.cost, in.log_zeta, tight());
  const Eigen::VectorXd shifted = in.log_rho.array() + 400.0;
  const Eigen::VectorXd want = oracle_prox(shifted, in.cost, in.log_zeta, 0.05, 1e-3);
  const ProxResult b = prox_from_cost(shifted, in.cost, in.log_zeta, tight());
  CHECK((b.log_values - want).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(std::isfinite(a.log_values.sum()));
}

TEST_CASE("residuals contract after a short burn-in") {
  int monotone = 0;
  const int trials = 40;
  for (int t = 0; t < trials; ++t) {
    const Instance in = cloud_instance(25, 2.0, 0.2, 500 + static_cast<std::uint64_t>(t));
    ProxConfig cfg = tight(0.05, 0.02);
    cfg.l_max = 200;
    const ProxResult r = prox_from_cost(in.log_rho, in.cost, in.log_zeta, cfg);
    bool ok = true;
    const auto& hy = r.report.history_y;
    for (std::size_t k = 6; k < hy.size(); ++k) {
      if (hy[k] > 1e-12 && hy[k] > hy[k - 1] * (1 + 1e-9)) ok = false;
    }
    monotone += ok;
  }
  CHECK(monotone >= trials * 9 / 10);
}

TEST_CASE("non-convergence is reported, or thrown when strict") {
  const Instance in = cloud_instance(30, 2.0, 0.2, 6);
  ProxConfig cfg = tight(0.05, 1.0);
  cfg.l_max = 1;
  const ProxResult r = prox_from_cost(in.log_rho, in.cost, in.log_zeta, cfg);
  CHECK_FALSE(r.report.converged);
  CHECK(r.report.iterations == 1);
  CHECK((r.log_values.array() > -std::numeric_limits<double>::infinity()).all());
  cfg.strict = true;
  CHECK(error_code_of([&] { prox_from_cost(in.log_rho, in.cost, in.log_zeta, cfg); }) == Errc::NonConvergence);
}

TEST_CASE("randomized positivity") {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    CounterRng rng(seed, StreamPurpose::Test, 310);
    const long N = 1 + static_cast<long>(rng.uniform() * 12);
    const Instance in = cloud_instance(N, std::pow(10.0, rng.uniform(-2.0, 6.0)), rng.uniform(0.0, 0.5), seed);
    ProxConfig cfg;
    cfg.epsilon = std::pow(10.0, rng.uniform(-3.0, 0.0));
    cfg.h = std::pow(10.0, rng.uniform(-4.0, -1.0));
    const ProxResult r = prox_from_cost(in.log_rho, in.cost, in.log_zeta, cfg);
    CHECK(r.log_values.allFinite());
    if (N == 1) CHECK(r.log_values(0) == doctest::Approx(in.log_rho(0)).epsilon(1e-12));
  }
}

TEST_CASE("full step composes the dynamics and the prox update") {
  const ReducedNetwork net = test::synthetic_network(2, 8);
  const TransformSpec spec = make_transform(net);
  const Ensemble start = cloud(2, 16, 8);
  ProxConfig cfg;
  cfg.h = 1e-2;
  const NoiseStream noise{4, StreamPurpose::Noise, true};
  const StepResult s = full_step(start, net, spec, cfg, noise);
  Ensemble moved = start;
  em_step_transformed(moved, net, spec, cfg.h, noise);
  CHECK(s.ensemble.states == moved.states);
  const ProxResult r = prox_step(start.log_values, start, moved, net, spec, cfg, moved.step);
  CHECK(s.ensemble.log_values == r.log_values);
  CHECK(s.ensemble.step == 1);

  int calls = 0;
  const Ensemble out = propagate(start, net, spec, cfg, 3, noise,
                                 PropagateHooks{[&](const Ensemble&, const ProxReport&) { ++calls; }});
  CHECK(calls == 3);
  CHECK(out.step == 3);
  const Ensemble same = propagate(start, net, spec, cfg, 0, noise);
  CHECK(same.states == start.states);
  CHECK(same.log_values == start.log_values);
}

}  // TEST_SUITE
