// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "kprox/simd/kernels.hpp"

namespace kprox::simd {

namespace {

// Cephes-style exp: range reduction by ln 2 and a (2,3) Pade approximant on
// [-ln2/2, ln2/2]. The 2^n scaling is split in two so subnormal results are
// produced instead of flushed.
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.782712893384);
  const __m256d lo = _mm256_set1_pd(kExpLowest);
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
  const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
  const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
  const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
  const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
  const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
  const __m256d q3 = _mm256_set1_pd(2.00000000000000000009e0);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d two = _mm256_set1_pd(2.0);

  const __m256d overflow = _mm256_cmp_pd(x, hi, _CMP_GT_OQ);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  const __m256d nan = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);

  // Lanes that over- or underflow are evaluated at 0 and blended afterwards,
  // keeping subnormal intermediates off the common path.
  __m256d v = _mm256_blendv_pd(x, _mm256_setzero_pd(), _mm256_or_pd(_mm256_or_pd(overflow, underflow), nan));
  const __m256d fx = _mm256_round_pd(_mm256_mul_pd(v, log2e),
                                     _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  v = _mm256_fnmadd_pd(fx, c1, v);
  v = _mm256_fnmadd_pd(fx, c2, v);
  const __m256d xx = _mm256_mul_pd(v, v);
  const __m256d px = _mm256_mul_pd(v, _mm256_fmadd_pd(_mm256_fmadd_pd(p0, xx, p1), xx, p2));
  const __m256d qx = _mm256_fmadd_pd(_mm256_fmadd_pd(_mm256_fmadd_pd(q0, xx, q1), xx, q2), xx, q3);
  __m256d r = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  r = _mm256_fmadd_pd(two, r, one);

  const __m256d e1 = _mm256_floor_pd(_mm256_mul_pd(fx, _mm256_set1_pd(0.5)));
  const __m256d e2 = _mm256_sub_pd(fx, e1);
  const __m256i bias = _mm256_set1_epi64x(1023);
  const __m256i i1 = _mm256_add_epi64(_mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(e1)), bias);
  const __m256i i2 = _mm256_add_epi64(_mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(e2)), bias);
  r = _mm256_mul_pd(r, _mm256_castsi256_pd(_mm256_slli_epi64(i1, 52)));
  r = _mm256_mul_pd(r, _mm256_castsi256_pd(_mm256_slli_epi64(i2, 52)));

  r = _mm256_blendv_pd(r, _mm256_set1_pd(std::numeric_limits<double>::infinity()), overflow);
  r = _mm256_blendv_pd(r, _mm256_setzero_pd(), underflow);
  r = _mm256_blendv_pd(r, x, nan);
  return r;
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d m = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(m, _mm_unpackhi_pd(m, m)));
}

void sqdist_row_avx2(const double* a, const double* soa, std::size_t n, std::size_t dim,
                     double* out) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    for (std::size_t d = 0; d < dim; ++d) {
      const __m256d ad = _mm256_set1_pd(a[d]);
      const double* col = soa + d * n + j;
      const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(col), ad);
      const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(col + 4), ad);
      acc0 = _mm256_fmadd_pd(d0, d0, acc0);
      acc1 = _mm256_fmadd_pd(d1, d1, acc1);
    }
    _mm256_storeu_pd(out + j, acc0);
    _mm256_storeu_pd(out + j + 4, acc1);
  }
  for (; j < n; ++j) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = soa[d * n + j] - a[d];
      s = std::fma(diff, diff, s);
    }
    out[j] = s;
  }
}

void exp_scaled_avx2(const double* in, double scale, double* out, std::size_t n) {
  const __m256d s = _mm256_set1_pd(scale);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    _mm256_storeu_pd(out + j, exp_pd(_mm256_mul_pd(s, _mm256_loadu_pd(in + j))));
  }
  for (; j < n; ++j) out[j] = std::exp(scale * in[j]);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + j), _mm256_loadu_pd(b + j), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + j + 4), _mm256_loadu_pd(b + j + 4), acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; j < n; ++j) s += a[j] * b[j];
  return s;
}

double max_sum_avx2(const double* a, const double* b, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  std::size_t j = 0;
  if (n >= 4) {
    __m256d acc = _mm256_set1_pd(m);
    for (; j + 4 <= n; j += 4) {
      acc = _mm256_max_pd(acc, _mm256_add_pd(_mm256_loadu_pd(a + j), _mm256_loadu_pd(b + j)));
    }
    m = hmax(acc);
  }
  for (; j < n; ++j) {
    const double v = a[j] + b[j];
    if (v > m) m = v;
  }
  return m;
}

double sum_exp_shifted_avx2(const double* a, const double* b, double shift, std::size_t n) {
  const __m256d sh = _mm256_set1_pd(shift);
  const __m256d lo = _mm256_set1_pd(kExpLowest);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    const __m256d v0 = _mm256_sub_pd(_mm256_add_pd(_mm256_loadu_pd(a + j), _mm256_loadu_pd(b + j)), sh);
    const __m256d v1 =
        _mm256_sub_pd(_mm256_add_pd(_mm256_loadu_pd(a + j + 4), _mm256_loadu_pd(b + j + 4)), sh);
    // a block whose exponents all underflow contributes exactly zero
    const __m256d live = _mm256_or_pd(_mm256_cmp_pd(v0, lo, _CMP_NLT_UQ), _mm256_cmp_pd(v1, lo, _CMP_NLT_UQ));
    if (_mm256_movemask_pd(live) == 0) continue;
    acc0 = _mm256_add_pd(acc0, exp_pd(v0));
    acc1 = _mm256_add_pd(acc1, exp_pd(v1));
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; j < n; ++j) s += std::exp(a[j] + b[j] - shift);
  return s;
}

double max_affine_avx2(const double* c, double scale, const double* b, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  const __m256d sc = _mm256_set1_pd(scale);
  std::size_t j = 0;
  if (n >= 4) {
    __m256d acc = _mm256_set1_pd(m);
    for (; j + 4 <= n; j += 4) {
      acc = _mm256_max_pd(acc, _mm256_fmadd_pd(_mm256_loadu_pd(c + j), sc, _mm256_loadu_pd(b + j)));
    }
    m = hmax(acc);
  }
  for (; j < n; ++j) m = std::max(m, std::fma(c[j], scale, b[j]));
  return m;
}

double sum_exp_affine_avx2(const double* c, double scale, const double* b, double shift, std::size_t n) {
  const __m256d sc = _mm256_set1_pd(scale);
  const __m256d sh = _mm256_set1_pd(shift);
  const __m256d lo = _mm256_set1_pd(kExpLowest);
  __m256d acc = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d v = _mm256_sub_pd(_mm256_fmadd_pd(_mm256_loadu_pd(c + j), sc, _mm256_loadu_pd(b + j)), sh);
    if (_mm256_movemask_pd(_mm256_cmp_pd(v, lo, _CMP_NLT_UQ)) == 0) continue;
    acc = _mm256_add_pd(acc, exp_pd(v));
  }
  double s = hsum(acc);
  for (; j < n; ++j) {
    const double v = std::fma(c[j], scale, b[j]) - shift;
    if (!(v < kExpLowest)) s += std::exp(v);
  }
  return s;
}

void max_affine_update_avx2(const double* c, double scale, double offset, double* m, std::size_t n) {
  const __m256d sc = _mm256_set1_pd(scale);
  const __m256d off = _mm256_set1_pd(offset);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d v = _mm256_fmadd_pd(_mm256_loadu_pd(c + j), sc, off);
    _mm256_storeu_pd(m + j, _mm256_max_pd(v, _mm256_loadu_pd(m + j)));
  }
  for (; j < n; ++j) m[j] = std::max(m[j], std::fma(c[j], scale, offset));
}

void sum_exp_affine_update_avx2(const double* c, double scale, double offset, const double* m, double* s,
                                std::size_t n) {
  const __m256d sc = _mm256_set1_pd(scale);
  const __m256d off = _mm256_set1_pd(offset);
  const __m256d lo = _mm256_set1_pd(kExpLowest);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d v = _mm256_sub_pd(_mm256_fmadd_pd(_mm256_loadu_pd(c + j), sc, off), _mm256_loadu_pd(m + j));
    if (_mm256_movemask_pd(_mm256_cmp_pd(v, lo, _CMP_NLT_UQ)) == 0) continue;
    _mm256_storeu_pd(s + j, _mm256_add_pd(_mm256_loadu_pd(s + j), exp_pd(v)));
  }
  for (; j < n; ++j) {
    const double v = std::fma(c[j], scale, offset) - m[j];
    if (!(v < kExpLowest)) s[j] += std::exp(v);
  }
}

constexpr KernelTable kAvx2{Backend::Avx2,
                            "avx2",
                            &sqdist_row_avx2,
                            &exp_scaled_avx2,
                            &dot_avx2,
                            &max_sum_avx2,
                            &sum_exp_shifted_avx2,
                            &max_affine_avx2,
                            &sum_exp_affine_avx2,
                            &max_affine_update_avx2,
                            &sum_exp_affine_update_avx2};

}  // namespace

const KernelTable* avx2_table_unchecked() noexcept { return &kAvx2; }

}  // namespace kprox::simd
