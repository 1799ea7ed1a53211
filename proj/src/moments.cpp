#include "kprox/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <numbers>
#include <string>

#include "kprox/linalg.hpp"
#include "kprox/parallel.hpp"
#include "kprox/simd/kernels.hpp"

namespace kprox {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kDegenerateEssFraction = 0.01;

void require_original(const Ensemble& ens) {
  if (ens.coords != Coords::Original) throw Error(Errc::Config, "marginals need original coordinates");
}

}  // namespace

double wrap_angle(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

MomentSummary weighted_moments(const Eigen::MatrixXd& states, const Eigen::VectorXd& w) {
  MomentSummary s;
  s.mean = states.transpose() * w;
  const Eigen::MatrixXd centered = states.rowwise() - s.mean.transpose();
  s.cov = centered.transpose() * w.asDiagonal() * centered;
  s.cov = (0.5 * (s.cov + s.cov.transpose())).eval();
  if (!s.mean.allFinite() || !s.cov.allFinite()) throw Error(Errc::NonFinite, "moments are not finite");
  return s;
}

MomentSummary mc_moments(const Ensemble& ens) {
  const Eigen::Index N = ens.size();
  if (N < 2) throw Error(Errc::Config, "moments need N >= 2");
  MomentSummary s = weighted_moments(ens.states, Eigen::VectorXd::Constant(N, 1.0 / static_cast<double>(N)));
  s.source = MomentSource::MC;
  s.ess = static_cast<double>(N);
  return s;
}

Eigen::VectorXd loo_kde_log_density(const Eigen::MatrixXd& points) {
  const Eigen::Index N = points.rows();
  const Eigen::Index d = points.cols();
  if (N < 2) throw Error(Errc::Config, "kde needs N >= 2");
  const Eigen::VectorXd mean = points.colwise().mean().transpose();
  const Eigen::MatrixXd centered = points.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(N);
  const double factor = std::pow(static_cast<double>(N), -1.0 / (static_cast<double>(d) + 4.0));
  Eigen::MatrixXd bw = cov * factor * factor;

  double jitter = std::max(bw.trace() / static_cast<double>(d), 1e-300) * 1e-12;
  Eigen::LLT<Eigen::MatrixXd> llt(bw);
  while (llt.info() != Eigen::Success || (llt.matrixL().toDenseMatrix().diagonal().array() <= 0.0).any()) {
    bw.diagonal().array() += jitter;
    jitter *= 10.0;
    llt.compute(bw);
  }
  const Eigen::MatrixXd lower = llt.matrixL();
  // Whitened points z = L^-1 x; soa_t holds them as d rows of N columns.
  const Eigen::MatrixXd z = lower.triangularView<Eigen::Lower>().solve(centered.transpose());
  const Eigen::MatrixXd zt = z.transpose();  // N x d
  std::vector<double> soa_t(static_cast<std::size_t>(N * d));
  for (Eigen::Index k = 0; k < d; ++k) {
    for (Eigen::Index j = 0; j < N; ++j) soa_t[static_cast<std::size_t>(k * N + j)] = zt(j, k);
  }
  const double log_norm = -0.5 * static_cast<double>(d) * std::log(kTwoPi) -
                          lower.diagonal().array().log().sum() - std::log(static_cast<double>(N - 1));
  Eigen::VectorXd out(N);
  const simd::KernelTable& kern = simd::active();
  parallel_for(static_cast<std::size_t>(N), [&](std::size_t i) {
    std::vector<double> dist(static_cast<std::size_t>(N));
    const Eigen::VectorXd zi = zt.row(static_cast<Eigen::Index>(i)).transpose();
    kern.sqdist_row(zi.data(), soa_t.data(), static_cast<std::size_t>(N), static_cast<std::size_t>(d),
                    dist.data());
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < dist.size(); ++j) {
      if (j != i) m = std::min(m, dist[j]);
    }
    double s = 0.0;
    for (std::size_t j = 0; j < dist.size(); ++j) {
      if (j != i) s += std::exp(-0.5 * (dist[j] - m));
    }
    out(static_cast<Eigen::Index>(i)) = log_norm - 0.5 * m + std::log(s);
  });
  return out;
}

ImportanceWeights importance_weights(const Ensemble& ens) {
  const Eigen::VectorXd log_q = loo_kde_log_density(ens.states);
  Eigen::VectorXd lw = ens.log_values - log_q;
  const double m = lw.maxCoeff();
  ImportanceWeights iw;
  iw.w = (lw.array() - m).exp();
  iw.w /= iw.w.sum();
  iw.ess = 1.0 / iw.w.squaredNorm();
  return iw;
}

MomentSummary prox_moments(const Ensemble& ens) {
  if (ens.size() < 2) throw Error(Errc::Config, "moments need N >= 2");
  const ImportanceWeights iw = importance_weights(ens);
  MomentSummary s = weighted_moments(ens.states, iw.w);
  s.source = MomentSource::Prox;
  s.ess = iw.ess;
  if (iw.ess < kDegenerateEssFraction * static_cast<double>(ens.size())) {
    s.diagnostic = Diagnostic{Errc::DegenerateWeights, "effective sample size " + std::to_string(iw.ess)};
  }
  return s;
}

double bures_wasserstein(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(Errc::NotPSD, "shape mismatch");
  const Eigen::MatrixXd ra = psd_sqrt(a);
  const Eigen::MatrixXd rb = psd_sqrt(b);
  // With ra rb = W S V^T, d^2 = |ra W - rb V|_F^2 = tr A + tr B - 2 tr S.
  const SingularDecomposition svd = jacobi_svd(ra * rb);
  return (ra * svd.u - rb * svd.v).norm();
}

Histogram weighted_histogram(std::span<const double> x, std::span<const double> w, int bins, double lo,
                             double hi) {
  if (bins < 2) throw Error(Errc::Config, "histogram needs bins >= 2");
  if (!(hi > lo)) throw Error(Errc::Config, "histogram needs hi > lo");
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  h.density.assign(static_cast<std::size_t>(bins), 0.0);
  const double width = (hi - lo) / bins;
  for (int b = 0; b <= bins; ++b) h.edges[static_cast<std::size_t>(b)] = lo + width * b;
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    total += w[i];
    if (x[i] < lo || x[i] > hi) continue;
    const int b = std::min(bins - 1, static_cast<int>((x[i] - lo) / width));
    h.density[static_cast<std::size_t>(b)] += w[i];
  }
  for (double& d : h.density) d /= total * width;
  return h;
}

Histogram marginal_univariate(const Ensemble& ens, int coord, int bins,
                              std::optional<std::pair<double, double>> range) {
  require_original(ens);
  if (coord < 0 || coord >= 2 * ens.n) throw Error(Errc::Config, "coordinate out of range");
  const ImportanceWeights iw = importance_weights(ens);
  std::vector<double> x(static_cast<std::size_t>(ens.size()));
  for (Eigen::Index p = 0; p < ens.size(); ++p) {
    const double v = ens.states(p, coord);
    x[static_cast<std::size_t>(p)] = coord < ens.n ? wrap_angle(v) : v;
  }
  double lo = 0.0;
  double hi = kTwoPi;
  if (coord >= ens.n) {
    if (range) {
      std::tie(lo, hi) = *range;
    } else {
      const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
      lo = *mn;
      hi = *mx > *mn ? *mx : *mn + 1.0;
    }
  }
  return weighted_histogram(x, std::span<const double>(iw.w.data(), x.size()), bins, lo, hi);
}

std::vector<ScatterRecord> marginal_bivariate_scatter(const Ensemble& ens, int i) {
  require_original(ens);
  if (i < 1 || i > ens.n) throw Error(Errc::Config, "generator index out of range");
  std::vector<ScatterRecord> out;
  out.reserve(static_cast<std::size_t>(ens.size()));
  for (Eigen::Index p = 0; p < ens.size(); ++p) {
    out.push_back({wrap_angle(ens.states(p, i - 1)), ens.states(p, ens.n + i - 1), std::exp(ens.log_values(p))});
  }
  return out;
}

BoxStats box_stats(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::Config, "box stats need data");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  auto quantile = [&](double p) {
    const double hpos = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(hpos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (hpos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  double sum = 0.0;
  for (double x : v) sum += x;
  return {v.front(), quantile(0.25), quantile(0.5), quantile(0.75), v.back(), sum / static_cast<double>(v.size())};
}

std::vector<BoxStats> boxplot_stats(const std::vector<Ensemble>& trajectory, int coord) {
  if (trajectory.empty()) throw Error(Errc::Config, "trajectory is empty");
  std::vector<BoxStats> out;
  for (const Ensemble& e : trajectory) {
    const Eigen::VectorXd col = e.states.col(coord);
    out.push_back(box_stats(std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))));
  }
  return out;
}

}  // namespace kprox
