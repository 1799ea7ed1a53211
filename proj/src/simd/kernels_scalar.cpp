#include <algorithm>
#include <cmath>
#include <limits>

#include "kprox/simd/kernels.hpp"

namespace kprox::simd {

namespace {

void sqdist_row_scalar(const double* a, const double* soa, std::size_t n, std::size_t dim,
                       double* out) {
  for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double ad = a[d];
    const double* col = soa + d * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double diff = col[j] - ad;
      out[j] += diff * diff;
    }
  }
}

void exp_scaled_scalar(const double* in, double scale, double* out, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) out[j] = std::exp(scale * in[j]);
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += a[j] * b[j];
  return s;
}

double max_sum_scalar(const double* a, const double* b, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    const double v = a[j] + b[j];
    if (v > m) m = v;
  }
  return m;
}

double sum_exp_shifted_scalar(const double* a, const double* b, double shift, std::size_t n) {
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double v = a[j] + b[j] - shift;
    if (!(v < kExpLowest)) s += std::exp(v);
  }
  return s;
}

double max_affine_scalar(const double* c, double scale, const double* b, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) m = std::max(m, std::fma(c[j], scale, b[j]));
  return m;
}

double sum_exp_affine_scalar(const double* c, double scale, const double* b, double shift, std::size_t n) {
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double v = std::fma(c[j], scale, b[j]) - shift;
    if (!(v < kExpLowest)) s += std::exp(v);
  }
  return s;
}

void max_affine_update_scalar(const double* c, double scale, double offset, double* m, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) m[j] = std::max(m[j], std::fma(c[j], scale, offset));
}

void sum_exp_affine_update_scalar(const double* c, double scale, double offset, const double* m, double* s,
                                  std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const double v = std::fma(c[j], scale, offset) - m[j];
    if (!(v < kExpLowest)) s[j] += std::exp(v);
  }
}

constexpr KernelTable kScalar{Backend::Scalar,
                              "scalar",
                              &sqdist_row_scalar,
                              &exp_scaled_scalar,
                              &dot_scalar,
                              &max_sum_scalar,
                              &sum_exp_shifted_scalar,
                              &max_affine_scalar,
                              &sum_exp_affine_scalar,
                              &max_affine_update_scalar,
                              &sum_exp_affine_update_scalar};

}  // namespace

const KernelTable& scalar_kernels() noexcept { return kScalar; }

}  // namespace kprox::simd
