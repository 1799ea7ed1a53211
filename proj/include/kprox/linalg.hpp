#pragma once

#include <Eigen/Dense>

namespace kprox {

struct SymmetricEigen {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns
};

/// Cyclic Jacobi rotations on a symmetric matrix (only the upper triangle is read).
SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& a, int max_sweeps = 100);

struct SingularDecomposition {
  Eigen::MatrixXd u;       // a * v = u * diag(values), orthonormal columns
  Eigen::VectorXd values;  // nonnegative, unsorted
  Eigen::MatrixXd v;
};

/// One-sided (Hestenes) Jacobi SVD of a square matrix. Columns of u belonging to
/// negligible singular values are completed to an orthonormal basis.
SingularDecomposition jacobi_svd(const Eigen::MatrixXd& a, int max_sweeps = 100);

/// Principal square root of a symmetric PSD matrix. Eigenvalues below
/// -neg_tol raise Error{NotPSD}; eigenvalues up to n eps max|lambda| are taken as 0.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a, double neg_tol = 1e-10);

}  // namespace kprox
