#include "kprox/prox.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "kprox/errors.hpp"
#include "kprox/parallel.hpp"
#include "kprox/rng.hpp"
#include "kprox/simd/kernels.hpp"

namespace kprox {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// exp(-x) stays normal for x below this
constexpr double kLogDomainSwitch = 700.0;
// exp(-x) is exactly zero above this
constexpr double kExpUnderflow = 745.2;

double l2_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double r = (a - b).norm();
  return std::isfinite(r) ? r : kInf;
}

// ||exp(a) - exp(b)||_2 computed from logs; inf when the iterates are not representable.
double l2_diff_from_logs(const Eigen::VectorXd& la, const Eigen::VectorXd& lb) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < la.size(); ++i) {
    if (la(i) == lb(i)) continue;
    const double d = std::exp(la(i)) - std::exp(lb(i));
    if (!std::isfinite(d)) return kInf;
    s += d * d;
  }
  const double r = std::sqrt(s);
  return std::isfinite(r) ? r : kInf;
}

// Every entry finite and strictly positive.
bool in_range(const Eigen::VectorXd& v) { return v.allFinite() && (v.array() > 0.0).all(); }

Eigen::VectorXd initial_z(const Z0& z0, Eigen::Index N, long step) {
  Eigen::VectorXd z = Eigen::VectorXd::Ones(N);
  if (z0.kind == Z0::Kind::Random) {
    for (Eigen::Index i = 0; i < N; ++i) {
      CounterRng rng(z0.seed, StreamPurpose::ProxInit, static_cast<std::uint64_t>(i),
                     static_cast<std::uint64_t>(step));
      z(i) = 1.0 - rng.uniform() * (1.0 - 1e-300);  // (0, 1]
    }
  }
  return z;
}

// out = A x for a row-major N x N matrix.
void matvec(const RowMatrix& a, const Eigen::VectorXd& x, Eigen::VectorXd& out) {
  const auto n = static_cast<std::size_t>(a.cols());
  const simd::KernelTable& k = simd::active();
  parallel_for(static_cast<std::size_t>(a.rows()), [&](std::size_t i) {
    out(static_cast<Eigen::Index>(i)) = k.dot(a.data() + i * n, x.data(), n);
  });
}

// Log kernel L_ij = (rowmin_i - C_ij) / 2 eps, evaluated from the cost matrix
// on the fly, with row and column log-sum-exp products.
//
// Each line of L (row or column) also has a truncated copy keeping the
// entries within kWindow of the line maximum top_i. A dropped term is below
// top_i - kWindow + max(x); when that is under the kept maximum plus
// kExpLowest the dropped terms round to zero and the truncated sum is exact.
// A line failing the test is retried with the largest arguments summed
// exactly, then recomputed densely; a side with many dense lines goes dense.
class LogKernel {
 public:
  static constexpr double kWindow = 8192.0;

  struct Line {
    std::vector<std::size_t> start;
    std::vector<Eigen::Index> col;
    std::vector<double> val;
  };

  LogKernel(const RowMatrix& cost, Eigen::VectorXd row_min, double inv2eps)
      : cost_(cost), scale_(-inv2eps), offset_(row_min * inv2eps) {
    scan();
  }

  /// max_ij (C_ij - rowmin_i) / 2 eps
  double spread() const { return spread_; }

  /// out = log(G exp(x))
  void rows(const Eigen::VectorXd& x, Eigen::VectorXd& out) { product(rows_, false, x, out); }

  /// out = log(G^T exp(x))
  void cols(const Eigen::VectorXd& x, Eigen::VectorXd& out) { product(cols_, true, x, out); }

 private:
  struct Side {
    Line k;
    bool dense = false;
  };

  double entry(Eigen::Index i, Eigen::Index j) const { return std::fma(cost_(i, j), scale_, offset_(i)); }
  double top(bool transposed, Eigen::Index i) const { return transposed ? top_col_(i) : 0.0; }

  static void pack(Line& k, std::vector<std::vector<std::pair<Eigen::Index, double>>>& lines) {
    const std::size_t n = lines.size();
    k.start.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) k.start[i + 1] = k.start[i] + lines[i].size();
    k.col.resize(k.start[n]);
    k.val.resize(k.start[n]);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t e = 0; e < lines[i].size(); ++e) {
        k.col[k.start[i] + e] = lines[i][e].first;
        k.val[k.start[i] + e] = lines[i][e].second;
      }
    }
  }

  // One pass over C: spread, column maxima and both truncated copies. Column
  // candidates are screened against the running maximum, which only grows, and
  // filtered against the final one afterwards.
  void scan() {
    const Eigen::Index N = cost_.rows();
    const auto n = static_cast<std::size_t>(N);
    top_col_ = Eigen::VectorXd::Constant(N, -kInf);
    std::vector<std::vector<std::pair<Eigen::Index, double>>> by_row(n), by_col(n);
    for (Eigen::Index i = 0; i < N; ++i) {
      for (Eigen::Index j = 0; j < N; ++j) {
        const double v = entry(i, j);
        spread_ = std::max(spread_, -v);
        if (v >= -kWindow) by_row[static_cast<std::size_t>(i)].emplace_back(j, v);
        double& t = top_col_(j);
        if (v > t) t = v;
        if (v >= t - kWindow) by_col[static_cast<std::size_t>(j)].emplace_back(i, v);
      }
    }
    for (Eigen::Index j = 0; j < N; ++j) {
      auto& c = by_col[static_cast<std::size_t>(j)];
      const double floor = top_col_(j) - kWindow;
      c.erase(std::remove_if(c.begin(), c.end(), [floor](const auto& e) { return e.second < floor; }), c.end());
    }
    pack(rows_.k, by_row);
    pack(cols_.k, by_col);
  }

  void dense_row(const Eigen::VectorXd& x, Eigen::Index i, Eigen::VectorXd& out) const {
    const simd::KernelTable& k = simd::active();
    const auto n = static_cast<std::size_t>(cost_.cols());
    const double* c = cost_.data() + static_cast<std::size_t>(i) * n;
    const double m = k.max_affine(c, scale_, x.data(), n);
    out(i) = std::isfinite(m) ? offset_(i) + m + std::log(k.sum_exp_affine(c, scale_, x.data(), m, n)) : m;
  }

  void dense_col(const Eigen::VectorXd& x, Eigen::Index j, std::vector<double>& scratch, Eigen::VectorXd& out) const {
    const Eigen::Index N = cost_.rows();
    for (Eigen::Index r = 0; r < N; ++r) scratch[static_cast<std::size_t>(r)] = entry(r, j);
    out(j) = simd::log_sum_exp_sum(scratch.data(), x.data(), static_cast<std::size_t>(N));
  }

  // Column products streamed over the rows of C, parallel over column blocks.
  void dense_cols(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    const simd::KernelTable& k = simd::active();
    const Eigen::Index N = cost_.rows();
    const auto n = static_cast<std::size_t>(N);
    constexpr std::size_t kBlock = 512;
    const Eigen::VectorXd o = offset_ + x;
    Eigen::VectorXd m = Eigen::VectorXd::Constant(N, -kInf);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(N);
    parallel_for((n + kBlock - 1) / kBlock, [&](std::size_t b) {
      const std::size_t j0 = b * kBlock;
      const std::size_t len = std::min(kBlock, n - j0);
      for (Eigen::Index i = 0; i < N; ++i) {
        k.max_affine_update(cost_.data() + static_cast<std::size_t>(i) * n + j0, scale_, o(i), m.data() + j0, len);
      }
      for (Eigen::Index i = 0; i < N; ++i) {
        k.sum_exp_affine_update(cost_.data() + static_cast<std::size_t>(i) * n + j0, scale_, o(i), m.data() + j0,
                                s.data() + j0, len);
      }
    });
    for (Eigen::Index j = 0; j < N; ++j) out(j) = std::isfinite(m(j)) ? m(j) + std::log(s(j)) : m(j);
  }

  void dense(bool transposed, const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    if (transposed) return dense_cols(x, out);
    parallel_for(static_cast<std::size_t>(cost_.rows()),
                 [&](std::size_t i) { dense_row(x, static_cast<Eigen::Index>(i), out); });
  }

  // Truncated log-sum-exp of one line; false when exactness cannot be certified.
  // Arguments flagged in `head` are skipped here and summed over the full line.
  bool truncated(const Line& k, bool transposed, Eigen::Index line, const Eigen::VectorXd& x, double x_bound,
                 const std::vector<Eigen::Index>& head, const std::vector<char>& is_head, double& result) const {
    const auto si = static_cast<std::size_t>(line);
    auto head_term = [&](Eigen::Index h) { return (transposed ? entry(h, line) : entry(line, h)) + x(h); };
    auto skip = [&](Eigen::Index c) { return !is_head.empty() && is_head[static_cast<std::size_t>(c)]; };
    double m = -kInf;
    for (std::size_t e = k.start[si]; e < k.start[si + 1]; ++e) {
      if (!skip(k.col[e])) m = std::max(m, k.val[e] + x(k.col[e]));
    }
    for (const Eigen::Index h : head) m = std::max(m, head_term(h));
    // one unit of slack absorbs the rounding of top_i
    if (!std::isfinite(m) || !(top(transposed, line) + 1.0 - kWindow + x_bound < m + simd::kExpLowest)) return false;
    double s = 0.0;
    for (std::size_t e = k.start[si]; e < k.start[si + 1]; ++e) {
      if (skip(k.col[e])) continue;
      const double v = k.val[e] + x(k.col[e]) - m;
      if (!(v < simd::kExpLowest)) s += std::exp(v);
    }
    for (const Eigen::Index h : head) {
      const double v = head_term(h) - m;
      if (!(v < simd::kExpLowest)) s += std::exp(v);
    }
    result = m + std::log(s);
    return true;
  }

  void product(Side& side, bool transposed, const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    if (side.dense || !x.allFinite()) return dense(transposed, x, out);
    const Eigen::Index N = cost_.rows();
    const auto n = static_cast<std::size_t>(N);
    const double x_max = x.maxCoeff();
    const std::vector<Eigen::Index> none;
    const std::vector<char> no_flags;
    std::vector<char> redo(n, 0);
    parallel_for(n, [&](std::size_t si) {
      const auto line = static_cast<Eigen::Index>(si);
      if (!truncated(side.k, transposed, line, x, x_max, none, no_flags, out(line))) redo[si] = 1;
    });
    if (std::find(redo.begin(), redo.end(), char{1}) == redo.end()) return;

    // Retry with the top 1/32 of the arguments summed exactly; the rest are
    // bounded by tau, the largest argument left out.
    std::vector<double> sorted(x.data(), x.data() + N);
    const std::size_t heads = std::min<std::size_t>(n - 1, n / 32);
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(heads), sorted.end(),
                     std::greater<>());
    const double tau = sorted[heads];
    std::vector<Eigen::Index> head;
    std::vector<char> is_head(n, 0);
    for (Eigen::Index i = 0; i < N; ++i) {
      if (x(i) > tau) {
        head.push_back(i);
        is_head[static_cast<std::size_t>(i)] = 1;
      }
    }
    long failed = 0;
    for (std::size_t si = 0; si < n; ++si) {
      if (!redo[si]) continue;
      const auto line = static_cast<Eigen::Index>(si);
      if (truncated(side.k, transposed, line, x, tau, head, is_head, out(line))) {
        redo[si] = 0;
      } else {
        ++failed;
      }
    }
    if (failed == 0) return;
    if (failed * 16 > N) {
      side.dense = true;
      Eigen::VectorXd full(N);
      dense(transposed, x, full);
      for (Eigen::Index i = 0; i < N; ++i) {
        if (redo[static_cast<std::size_t>(i)]) out(i) = full(i);
      }
      return;
    }
    std::vector<double> scratch(n);
    for (Eigen::Index i = 0; i < N; ++i) {
      if (!redo[static_cast<std::size_t>(i)]) continue;
      if (transposed) {
        dense_col(x, i, scratch, out);
      } else {
        dense_row(x, i, out);
      }
    }
  }

  const RowMatrix& cost_;
  double scale_;
  Eigen::VectorXd offset_;
  Eigen::VectorXd top_col_;
  double spread_ = 0.0;
  Side rows_, cols_;
};

}  // namespace

std::string_view to_string(LogDomain mode) noexcept {
  switch (mode) {
    case LogDomain::Auto: return "auto";
    case LogDomain::Never: return "never";
    case LogDomain::Always: return "always";
  }
  return "auto";
}

LogDomain parse_log_domain(std::string_view text) {
  if (text == "auto") return LogDomain::Auto;
  if (text == "never") return LogDomain::Never;
  if (text == "always") return LogDomain::Always;
  throw Error(Errc::Config, "log_domain must be auto, never or always, got '" + std::string(text) + "'");
}

Z0 parse_z0(std::string_view text) {
  if (text == "ones") return {};
  constexpr std::string_view prefix = "random:";
  if (text.substr(0, prefix.size()) == prefix) {
    const std::string digits(text.substr(prefix.size()));
    try {
      std::size_t used = 0;
      const unsigned long long seed = std::stoull(digits, &used);
      if (used == digits.size() && !digits.empty()) return {Z0::Kind::Random, seed};
    } catch (const std::exception&) {
    }
  }
  throw Error(Errc::Config, "z0 must be ones or random:<seed>, got '" + std::string(text) + "'");
}

std::string to_string(const Z0& z0) {
  return z0.kind == Z0::Kind::Ones ? std::string("ones") : "random:" + std::to_string(z0.seed);
}

void ProxConfig::validate() const {
  if (!(h > 0.0) || !(epsilon > 0.0) || !(delta > 0.0)) {
    throw Error(Errc::Config, "prox h, epsilon and delta must be positive");
  }
  if (l_max < 1) throw Error(Errc::Config, "prox l_max must be >= 1");
  if (N < 1) throw Error(Errc::Config, "prox N must be >= 1");
}

double ground_cost(std::span<const double> xi, std::span<const double> eta, std::span<const double> xi_bar,
                   std::span<const double> eta_bar, std::span<const double> grad_u,
                   std::span<const double> upsilon, double h) {
  double first = 0.0;
  double second = 0.0;
  for (std::size_t d = 0; d < xi.size(); ++d) {
    const double a = eta_bar[d] - eta[d] + h * upsilon[d] * grad_u[d];
    const double b = (xi_bar[d] - xi[d]) / h - (eta_bar[d] - eta[d]) / h;
    first += a * a / upsilon[d];
    second += b * b / upsilon[d];
  }
  return first + kGroundCostCoupling * second;
}

CostEmbedding embed_cost(const Ensemble& prev, const Ensemble& next, const ReducedNetwork& net,
                         const TransformSpec& spec, double h) {
  if (prev.coords != Coords::Transformed || next.coords != Coords::Transformed) {
    throw Error(Errc::Config, "cost matrix needs transformed coordinates");
  }
  if (prev.size() != next.size() || prev.n != next.n) {
    throw Error(Errc::Config, "cost matrix needs equally sized ensembles");
  }
  const int n = prev.n;
  const Eigen::Index N = prev.size();
  Eigen::MatrixXd force;
  upsilon_grad_U_batch(prev.angles(), net, spec, force);

  const Eigen::ArrayXd s = (-0.5 * spec.log_upsilon.array()).exp();
  const Eigen::ArrayXd sd = s * std::sqrt(kGroundCostCoupling) / h;
  CostEmbedding e;
  e.dim = 2 * n;
  e.rows.resize(N, 2 * n);
  e.cols.resize(static_cast<std::size_t>(2 * n * N));
  for (Eigen::Index p = 0; p < N; ++p) {
    for (int d = 0; d < n; ++d) {
      const double xi = prev.states(p, d);
      const double eta = prev.states(p, n + d);
      e.rows(p, d) = (eta - h * force(p, d)) * s(d);
      e.rows(p, n + d) = (xi - eta) * sd(d);
      const double xb = next.states(p, d);
      const double eb = next.states(p, n + d);
      e.cols[static_cast<std::size_t>(d * N + p)] = eb * s(d);
      e.cols[static_cast<std::size_t>((n + d) * N + p)] = (xb - eb) * sd(d);
    }
  }
  return e;
}

RowMatrix build_cost_matrix(const Ensemble& prev, const Ensemble& next, const ReducedNetwork& net,
                            const TransformSpec& spec, double h) {
  const CostEmbedding e = embed_cost(prev, next, net, spec, h);
  const Eigen::Index N = prev.size();
  RowMatrix c(N, N);
  const simd::KernelTable& k = simd::active();
  const auto n = static_cast<std::size_t>(N);
  parallel_for(n, [&](std::size_t i) {
    k.sqdist_row(e.rows.data() + i * static_cast<std::size_t>(e.dim), e.cols.data(), n,
                 static_cast<std::size_t>(e.dim), c.data() + i * n);
  });
  return c;
}

ProxResult prox_from_cost(const Eigen::VectorXd& log_values_prev, const RowMatrix& cost,
                          const Eigen::VectorXd& log_zeta, const ProxConfig& cfg, long step) {
  cfg.validate();
  const Eigen::Index N = cost.rows();
  if (cost.cols() != N || log_values_prev.size() != N || log_zeta.size() != N) {
    throw Error(Errc::Config, "prox inputs must share the particle count");
  }
  if (!log_values_prev.allFinite()) throw Error(Errc::NonFinite, "prox input values must be positive and finite");
  const double a = cfg.exponent();
  const double inv2eps = 1.0 / (2.0 * cfg.epsilon);

  const double shift = log_values_prev.maxCoeff();
  const Eigen::VectorXd log_rho = log_values_prev.array() - shift;
  const Eigen::VectorXd row_min = cost.rowwise().minCoeff();

  const auto n = static_cast<std::size_t>(N);
  double spread = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) spread = std::max(spread, (cost.row(i).maxCoeff() - row_min(i)) * inv2eps);
  const bool wide = spread > kLogDomainSwitch || (row_min.array() * inv2eps).maxCoeff() > kLogDomainSwitch ||
                    (-log_zeta.array()).maxCoeff() > kLogDomainSwitch ||
                    (-log_rho.array()).maxCoeff() > kLogDomainSwitch;
  bool use_log = cfg.log_domain == LogDomain::Always || (cfg.log_domain == LogDomain::Auto && wide);

  ProxReport rep;
  rep.log_domain = use_log;
  Eigen::VectorXd log_y(N), log_z(N), log_gz(N), log_gty(N);
  const auto start = std::chrono::steady_clock::now();

  if (!use_log) {
    if ((row_min.array() * inv2eps).maxCoeff() > kExpUnderflow) {
      throw Error(Errc::NumericalUnderflow, "a kernel row underflows to zero; epsilon is small for this cost scale");
    }
    RowMatrix g(N, N);
    for (Eigen::Index i = 0; i < N; ++i) g.row(i) = (cost.row(i).array() - row_min(i)) * -inv2eps;
    const simd::KernelTable& k = simd::active();
    parallel_for(n, [&](std::size_t i) { k.exp_scaled(g.data() + i * n, 1.0, g.data() + i * n, n); });
    const RowMatrix gt = g.transpose();
    if ((gt.rowwise().maxCoeff().array() <= 0.0).any()) {
      throw Error(Errc::NumericalUnderflow, "a kernel column underflows to zero; epsilon is small for this cost scale");
    }
    const Eigen::VectorXd rho = log_rho.array().exp();
    const Eigen::VectorXd zeta = log_zeta.array().exp();
    Eigen::VectorXd z = initial_z(cfg.z0, N, step);
    Eigen::VectorXd gz(N), gty(N);
    matvec(g, z, gz);
    Eigen::VectorXd y = rho.cwiseQuotient(gz);
    for (int it = 1; it <= cfg.l_max; ++it) {
      matvec(gt, y, gty);
      const Eigen::VectorXd z_new = zeta.cwiseQuotient(gty).array().pow(a).matrix();
      matvec(g, z_new, gz);
      const Eigen::VectorXd y_new = rho.cwiseQuotient(gz);
      rep.residual_y = l2_diff(y_new, y);
      rep.residual_z = l2_diff(z_new, z);
      rep.history_y.push_back(rep.residual_y);
      rep.history_z.push_back(rep.residual_z);
      rep.iterations = it;
      y = y_new;
      z = z_new;
      if (!in_range(y) || !in_range(z)) break;
      if (rep.residual_y < cfg.delta && rep.residual_z < cfg.delta) {
        rep.converged = true;
        break;
      }
    }
    matvec(gt, y, gty);
    if (in_range(y) && in_range(z) && in_range(gty)) {
      log_y = y.array().log();
      log_z = z.array().log();
      log_gty = gty.array().log();
    } else if (cfg.log_domain == LogDomain::Auto) {
      // The fixed point can sit outside double range even for a narrow kernel.
      use_log = true;
      rep = ProxReport{};
      rep.log_domain = true;
    } else {
      throw Error(Errc::NumericalUnderflow, "plain iterates left the double range; use the log domain");
    }
  }
  if (use_log) {
    LogKernel kernel(cost, row_min, inv2eps);
    log_z = initial_z(cfg.z0, N, step).array().log();
    kernel.rows(log_z, log_gz);
    log_y = log_rho - log_gz;
    Eigen::VectorXd log_z_new(N), log_y_new(N);
    for (int it = 1; it <= cfg.l_max; ++it) {
      kernel.cols(log_y, log_gty);
      log_z_new = a * (log_zeta - log_gty);
      kernel.rows(log_z_new, log_gz);
      log_y_new = log_rho - log_gz;
      rep.residual_y = l2_diff_from_logs(log_y_new, log_y);
      rep.residual_z = l2_diff_from_logs(log_z_new, log_z);
      rep.history_y.push_back(rep.residual_y);
      rep.history_z.push_back(rep.residual_z);
      rep.iterations = it;
      log_y.swap(log_y_new);
      log_z.swap(log_z_new);
      if (rep.residual_y < cfg.delta && rep.residual_z < cfg.delta) {
        rep.converged = true;
        break;
      }
    }
    kernel.cols(log_y, log_gty);
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  ProxResult out;
  out.log_values = (log_z + log_gty).array() + shift;
  if (!out.log_values.allFinite()) {
    throw Error(Errc::NumericalUnderflow, "prox output left the representable range");
  }
  // Undo the normalizations: y scales with rho^(1/(1-a)) and the row gauge,
  // z with rho^(-a/(1-a)).
  out.log_y = (log_y + row_min * inv2eps).array() + shift / (1.0 - a);
  out.log_z = log_z.array() - a * shift / (1.0 - a);
  out.report = std::move(rep);
  if (!out.report.converged && cfg.strict) {
    throw Error(Errc::NonConvergence, "fixed point not reached after " + std::to_string(cfg.l_max) +
                                          " iterations (residuals " + std::to_string(out.report.residual_y) +
                                          ", " + std::to_string(out.report.residual_z) + ")");
  }
  return out;
}

ProxResult prox_step(const Eigen::VectorXd& log_values_prev, const Ensemble& prev, const Ensemble& next,
                     const ReducedNetwork& net, const TransformSpec& spec, const ProxConfig& cfg, long step) {
  const auto start = std::chrono::steady_clock::now();
  const RowMatrix cost = build_cost_matrix(prev, next, net, spec, cfg.h);
  Eigen::VectorXd log_zeta(prev.size());
  for (Eigen::Index i = 0; i < prev.size(); ++i) {
    const Eigen::VectorXd eta = prev.states.row(i).tail(prev.n).transpose();
    log_zeta(i) = -potential_F(std::span<const double>(eta.data(), static_cast<std::size_t>(eta.size())), spec) - 1.0;
  }
  ProxResult r = prox_from_cost(log_values_prev, cost, log_zeta, cfg, step);
  r.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

StepResult full_step(const Ensemble& ens, const ReducedNetwork& net, const TransformSpec& spec,
                     const ProxConfig& cfg, const NoiseStream& noise) {
  Ensemble next = ens;
  em_step_transformed(next, net, spec, cfg.h, noise);
  ProxResult r = prox_step(ens.log_values, ens, next, net, spec, cfg, next.step);
  next.log_values = std::move(r.log_values);
  return {std::move(next), std::move(r.report)};
}

Ensemble propagate(Ensemble ens, const ReducedNetwork& net, const TransformSpec& spec,
                   const ProxConfig& cfg, long steps, const NoiseStream& noise, const PropagateHooks& hooks) {
  for (long k = 0; k < steps; ++k) {
    StepResult s = full_step(ens, net, spec, cfg, noise);
    ens = std::move(s.ensemble);
    if (hooks.on_step) hooks.on_step(ens, s.report);
  }
  return ens;
}

long step_count(double t_final, double h) {
  if (!(h > 0.0) || !(t_final >= 0.0)) throw Error(Errc::Config, "t_final must be >= 0 and h > 0");
  const double k = t_final / h;
  const double r = std::round(k);
  if (std::abs(k - r) > 1e-9 * std::max(1.0, k)) {
    throw Error(Errc::Config, "t_final / h = " + std::to_string(k) + " is not an integer");
  }
  return static_cast<long>(r);
}

}  // namespace kprox
