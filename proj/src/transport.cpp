#include "kprox/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "kprox/errors.hpp"

namespace kprox {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMassEps = 1e-15;

double median_of(const Eigen::MatrixXd& c) {
  std::vector<double> v(c.data(), c.data() + c.size());
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// candidate < current by more than `tol`; any finite value improves on +inf
bool improves(double candidate, double current, double tol) {
  if (current == kInf) return candidate < kInf;
  return candidate < current - tol;
}

double lse(const Eigen::ArrayXd& x) {
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((x - m).exp().sum());
}

}  // namespace

Eigen::MatrixXd squared_distance_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd c(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) c(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  }
  return c;
}

OtResult exact_transport(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::Index na = cost.rows();
  const Eigen::Index nb = cost.cols();
  Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(na, nb);
  Eigen::VectorXd supply = a;
  Eigen::VectorXd demand = b;
  // Node ids: a-side 0..na-1, b-side na..na+nb-1.
  const Eigen::Index nodes = na + nb;
  std::vector<double> dist(static_cast<std::size_t>(nodes));
  std::vector<Eigen::Index> pred(static_cast<std::size_t>(nodes));
  // Rounding on zero-cost residual cycles must not count as an improvement.
  const double tol = 1e-12 * std::max(cost.cwiseAbs().maxCoeff(), 1e-300);
  int augmentations = 0;
  while (supply.sum() > kMassEps && demand.sum() > kMassEps) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(pred.begin(), pred.end(), -1);
    for (Eigen::Index i = 0; i < na; ++i) {
      if (supply(i) > kMassEps) dist[static_cast<std::size_t>(i)] = 0.0;
    }
    // Bellman-Ford on the residual graph: a_i -> b_j always, b_j -> a_i where flow > 0.
    for (Eigen::Index round = 0; round < nodes; ++round) {
      bool changed = false;
      for (Eigen::Index i = 0; i < na; ++i) {
        const double di = dist[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < nb; ++j) {
          const auto bj = static_cast<std::size_t>(na + j);
          if (di < kInf && improves(di + cost(i, j), dist[bj], tol)) {
            dist[bj] = di + cost(i, j);
            pred[bj] = i;
            changed = true;
          }
          if (flow(i, j) > kMassEps && dist[bj] < kInf && improves(dist[bj] - cost(i, j), di, tol)) {
            dist[static_cast<std::size_t>(i)] = dist[bj] - cost(i, j);
            pred[static_cast<std::size_t>(i)] = na + j;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    Eigen::Index target = -1;
    for (Eigen::Index j = 0; j < nb; ++j) {
      const auto bj = static_cast<std::size_t>(na + j);
      if (demand(j) > kMassEps && dist[bj] < kInf && (target < 0 || dist[bj] < dist[static_cast<std::size_t>(na + target)])) {
        target = j;
      }
    }
    if (target < 0) break;
    if (augmentations > 4 * (na * nb + nodes)) {
      throw Error(Errc::NonConvergence, "exact transport did not terminate");
    }
    // Bottleneck along the path.
    double amount = demand(target);
    Eigen::Index node = na + target;
    while (true) {
      const Eigen::Index p = pred[static_cast<std::size_t>(node)];
      if (p < 0) {
        amount = std::min(amount, supply(node));
        break;
      }
      if (node < na) amount = std::min(amount, flow(node, p - na));
      node = p;
    }
    node = na + target;
    while (true) {
      const Eigen::Index p = pred[static_cast<std::size_t>(node)];
      if (p < 0) {
        supply(node) -= amount;
        break;
      }
      if (node >= na) {
        flow(p, node - na) += amount;
      } else {
        flow(node, p - na) -= amount;
        if (flow(node, p - na) < kMassEps) flow(node, p - na) = 0.0;
      }
      node = p;
    }
    demand(target) -= amount;
    ++augmentations;
  }
  OtResult r;
  r.plan = flow;
  r.cost = flow.cwiseProduct(cost).sum();
  r.w2 = std::sqrt(std::max(r.cost, 0.0));
  r.iterations = augmentations;
  return r;
}

OtResult sinkhorn_transport(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                            double eps, double tolerance, int max_iterations) {
  const Eigen::Index na = cost.rows();
  const Eigen::Index nb = cost.cols();
  const Eigen::ArrayXd log_a = a.array().log();
  const Eigen::ArrayXd log_b = b.array().log();
  Eigen::ArrayXd f = Eigen::ArrayXd::Zero(na);
  Eigen::ArrayXd g = Eigen::ArrayXd::Zero(nb);
  double e = std::max(median_of(cost), eps);
  OtResult r;
  r.converged = false;
  int it = 0;
  for (;;) {
    const bool final_stage = e <= eps;
    for (; it < max_iterations; ++it) {
      for (Eigen::Index i = 0; i < na; ++i) {
        f(i) = -e * lse((g - cost.row(i).transpose().array()) / e + log_b);
      }
      for (Eigen::Index j = 0; j < nb; ++j) {
        g(j) = -e * lse((f - cost.col(j).array()) / e + log_a);
      }
      if (it % 10 == 0 || final_stage) {
        // Column marginals are exact after the g update; check the rows.
        double err = 0.0;
        for (Eigen::Index i = 0; i < na; ++i) {
          const double row = std::exp(log_a(i) + lse((f(i) + g - cost.row(i).transpose().array()) / e + log_b));
          err += std::abs(row - a(i));
        }
        if (err < (final_stage ? tolerance : 1e-3)) {
          if (final_stage) r.converged = true;
          ++it;
          break;
        }
      }
    }
    if (final_stage || it >= max_iterations) break;
    e = std::max(e * 0.5, eps);
  }
  r.iterations = it;
  r.plan.resize(na, nb);
  for (Eigen::Index i = 0; i < na; ++i) {
    for (Eigen::Index j = 0; j < nb; ++j) {
      r.plan(i, j) = std::exp((f(i) + g(j) - cost(i, j)) / e + log_a(i) + log_b(j));
    }
  }
  r.cost = r.plan.cwiseProduct(cost).sum();
  r.w2 = std::sqrt(std::max(r.cost, 0.0));
  return r;
}

OtResult wasserstein2(const WeightedCloud& a, const WeightedCloud& b, const OtOptions& opt) {
  if (a.points.rows() != a.weights.size() || b.points.rows() != b.weights.size() ||
      a.points.cols() != b.points.cols()) {
    throw Error(Errc::Config, "cloud shapes are inconsistent");
  }
  if (std::abs(a.weights.sum() - b.weights.sum()) > 1e-9) {
    throw Error(Errc::WeightMismatch, "weight sums " + std::to_string(a.weights.sum()) + " vs " +
                                          std::to_string(b.weights.sum()));
  }
  if ((a.weights.array() < 0.0).any() || (b.weights.array() < 0.0).any()) {
    throw Error(Errc::Config, "weights must be nonnegative");
  }
  const Eigen::MatrixXd c = squared_distance_matrix(a.points, b.points);
  if (opt.mode == OtMode::Exact) {
    if (c.size() > kExactOtMaxEntries) {
      throw Error(Errc::Config, "exact transport is limited to " + std::to_string(kExactOtMaxEntries) + " cost entries");
    }
    return exact_transport(c, a.weights, b.weights);
  }
  const double med = median_of(c);
  const double eps = opt.epsilon_rel * (med > 0.0 ? med : 1.0);
  return sinkhorn_transport(c, a.weights, b.weights, eps, opt.tolerance, opt.max_iterations);
}

}  // namespace kprox
