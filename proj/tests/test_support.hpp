#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kprox/casefile.hpp"
#include "kprox/errors.hpp"
#include "kprox/network.hpp"
#include "kprox/rng.hpp"

namespace kprox::test {

inline std::string data_path(const std::string& name) { return std::string(KPROX_DATA_DIR) + "/" + name; }

inline UnreducedCase case14() { return load_case_file(data_path("case14.m")); }
inline DynamicParams case14_dynamics(const UnreducedCase& c) {
  return parse_dynamic_params(read_text_file(data_path("case14_dynamics.json")), c);
}

/// Errc of the exception thrown by f, or nullopt when nothing is thrown.
template <class F>
std::optional<Errc> error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double x = a.data()[i];
    const double y = b.data()[i];
    m = std::max(m, std::abs(x - y) / std::max(1.0, std::max(std::abs(x), std::abs(y))));
  }
  return m;
}

/// Network with every member set, built directly (no reduction).
inline ReducedNetwork synthetic_network(int n, std::uint64_t seed, bool with_phase = true) {
  CounterRng rng(seed, StreamPurpose::Test, 17);
  ReducedNetwork net;
  net.n = n;
  net.P = Eigen::VectorXd(n);
  net.m = Eigen::VectorXd(n);
  net.gamma = Eigen::VectorXd(n);
  net.sigma = Eigen::VectorXd(n);
  net.K = Eigen::MatrixXd::Zero(n, n);
  net.phi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    net.P(i) = rng.uniform(-1.0, 1.0);
    net.m(i) = rng.uniform(0.5, 2.0);
    net.gamma(i) = rng.uniform(0.5, 2.0);
    net.sigma(i) = rng.uniform(0.5, 2.0);
    for (int j = 0; j < i; ++j) {
      net.K(i, j) = net.K(j, i) = rng.uniform(0.5, 1.5);
      if (with_phase) net.phi(i, j) = net.phi(j, i) = std::atan(rng.uniform(0.0, 0.25));
    }
  }
  finalize(net);
  return net;
}

}  // namespace kprox::test
