#pragma once

// Moment summaries of weighted clouds, covariance distances and marginals.

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kprox/ensemble.hpp"
#include "kprox/errors.hpp"

namespace kprox {

enum class MomentSource { MC, Prox };

/// Population (1/N or weight-sum) covariance convention throughout.
struct MomentSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  MomentSource source = MomentSource::MC;
  double ess = 0.0;
  std::optional<Diagnostic> diagnostic;  // DegenerateWeights when ess < 0.01 N
};

MomentSummary mc_moments(const Ensemble& ens);

/// Self-normalized importance weights w_i proportional to rho_i / q_i, where
/// q_i is the leave-one-out Gaussian KDE of the cloud at particle i (full
/// covariance, Scott factor N^(-1/(d+4))).
struct ImportanceWeights {
  Eigen::VectorXd w;  // sums to 1
  double ess = 0.0;   // 1 / sum w_i^2
};
ImportanceWeights importance_weights(const Ensemble& ens);
/// log q_i (leave-one-out KDE) for an N x d point set, N >= 2.
Eigen::VectorXd loo_kde_log_density(const Eigen::MatrixXd& points);

MomentSummary weighted_moments(const Eigen::MatrixXd& states, const Eigen::VectorXd& w);
MomentSummary prox_moments(const Ensemble& ens);

/// d^2 = tr(A + B) - 2 tr((A^1/2 B A^1/2)^1/2), returns d. Error{NotPSD}.
/// Evaluated as a Frobenius residual, so d(A, A) carries no cancellation error.
double bures_wasserstein(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct Histogram {
  std::vector<double> edges;    // bins + 1
  std::vector<double> density;  // bins; sum density * width = mass inside the range
};

/// Weighted histogram density of one coordinate. Angle coordinates (index < n)
/// are wrapped to [0, 2pi) and binned on that range; other coordinates use
/// [lo, hi] when given, else the data range.
Histogram marginal_univariate(const Ensemble& ens, int coord, int bins,
                              std::optional<std::pair<double, double>> range = std::nullopt);
Histogram weighted_histogram(std::span<const double> x, std::span<const double> w, int bins, double lo,
                             double hi);

struct ScatterRecord {
  double theta;  // wrapped to [0, 2pi)
  double omega;
  double value;  // joint density value, not a marginal
};
/// i is 1-based.
std::vector<ScatterRecord> marginal_bivariate_scatter(const Ensemble& ens, int i);

struct BoxStats {
  double min, q1, median, q3, max, mean;
};
/// Type-7 quantiles (linear interpolation).
BoxStats box_stats(std::span<const double> values);
std::vector<BoxStats> boxplot_stats(const std::vector<Ensemble>& trajectory, int coord);

double wrap_angle(double a);

}  // namespace kprox
