#include "kprox/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "kprox/errors.hpp"

namespace kprox {

SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& input, int max_sweeps) {
  const Eigen::Index n = input.rows();
  if (input.cols() != n) throw Error(Errc::NotPSD, "matrix must be square");
  Eigen::MatrixXd a = input.selfadjointView<Eigen::Upper>();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = std::max(a.norm(), 1e-300);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (std::sqrt(off) <= 1e-17 * scale) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

SingularDecomposition jacobi_svd(const Eigen::MatrixXd& a, int max_sweeps) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw Error(Errc::NotPSD, "matrix must be square");
  Eigen::MatrixXd y = a;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double alpha = y.col(p).squaredNorm();
        const double beta = y.col(q).squaredNorm();
        const double gamma = y.col(p).dot(y.col(q));
        if (gamma == 0.0 || std::abs(gamma) <= 1e-16 * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double yp = y(k, p);
          const double yq = y(k, q);
          y(k, p) = c * yp - s * yq;
          y(k, q) = s * yp + c * yq;
          const double vp = v(k, p);
          const double vq = v(k, q);
          v(k, p) = c * vp - s * vq;
          v(k, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }
  SingularDecomposition out;
  out.v = v;
  out.values.resize(n);
  out.u = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) out.values(k) = y.col(k).norm();
  const double floor = 1e-15 * static_cast<double>(n) * std::max(out.values.maxCoeff(), 1e-300);
  std::vector<Eigen::Index> missing;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (out.values(k) > floor) {
      out.u.col(k) = y.col(k) / out.values(k);
    } else {
      missing.push_back(k);
    }
  }
  // Gram-Schmidt over the unit vectors fills the remaining columns.
  Eigen::Index e = 0;
  for (const Eigen::Index k : missing) {
    for (; e < n; ++e) {
      Eigen::VectorXd c = Eigen::VectorXd::Unit(n, e);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index j = 0; j < n; ++j) c -= out.u.col(j).dot(c) * out.u.col(j);
      }
      if (c.norm() > 0.5) {
        out.u.col(k) = c.normalized();
        ++e;
        break;
      }
    }
  }
  return out;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a, double neg_tol) {
  SymmetricEigen e = jacobi_eigen(a);
  const double floor = static_cast<double>(a.rows()) * std::numeric_limits<double>::epsilon() *
                       (e.values.size() == 0 ? 0.0 : e.values.cwiseAbs().maxCoeff());
  for (Eigen::Index k = 0; k < e.values.size(); ++k) {
    if (e.values(k) < -neg_tol) {
      throw Error(Errc::NotPSD, "eigenvalue " + std::to_string(e.values(k)));
    }
    e.values(k) = e.values(k) <= floor ? 0.0 : std::sqrt(e.values(k));
  }
  return e.vectors * e.values.asDiagonal() * e.vectors.transpose();
}

}  // namespace kprox
