#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference
// implementation; vector variants are picked at runtime from CPU features and
// must agree with the reference to a few ulps (see tests/test_simd.cpp).
//
// Layout conventions: "soa" arrays hold `dim` rows of `n` contiguous columns,
// i.e. soa[d * n + j] is coordinate d of point j.

#include <cstddef>
#include <string_view>

namespace kprox::simd {

enum class Backend { Scalar, Avx2 };

/// exp(x) rounds to zero below this.
inline constexpr double kExpLowest = -745.1332191019412;

struct KernelTable {
  Backend backend;
  std::string_view name;

  /// out[j] = sum_d (soa[d*n + j] - a[d])^2
  void (*sqdist_row)(const double* a, const double* soa, std::size_t n, std::size_t dim,
                     double* out);
  /// out[j] = exp(scale * in[j]); in and out may alias
  void (*exp_scaled)(const double* in, double scale, double* out, std::size_t n);
  /// sum_j a[j] * b[j]
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// max_j (a[j] + b[j])
  double (*max_sum)(const double* a, const double* b, std::size_t n);
  /// sum_j exp(a[j] + b[j] - shift)
  double (*sum_exp_shifted)(const double* a, const double* b, double shift, std::size_t n);
  /// max_j fma(c[j], scale, b[j])
  double (*max_affine)(const double* c, double scale, const double* b, std::size_t n);
  /// sum_j exp(fma(c[j], scale, b[j]) - shift)
  double (*sum_exp_affine)(const double* c, double scale, const double* b, double shift, std::size_t n);
  /// m[j] = max(m[j], fma(c[j], scale, offset))
  void (*max_affine_update)(const double* c, double scale, double offset, double* m, std::size_t n);
  /// s[j] += exp(fma(c[j], scale, offset) - m[j])
  void (*sum_exp_affine_update)(const double* c, double scale, double offset, const double* m, double* s,
                                std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;
/// nullptr when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels() noexcept;

/// The table used by the library. Chosen once from CPU features, overridable
/// via KPROX_SIMD={scalar,avx2} or select_backend().
const KernelTable& active() noexcept;
/// Returns false (and leaves the selection unchanged) if the backend is unavailable.
bool select_backend(Backend b) noexcept;

/// log(sum_j exp(a[j] + b[j])) via the active table; -inf for an all -inf row.
double log_sum_exp_sum(const double* a, const double* b, std::size_t n) noexcept;

}  // namespace kprox::simd
