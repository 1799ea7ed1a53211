#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string_view>

#include "kprox/simd/kernels.hpp"

namespace kprox::simd {

#if defined(KPROX_HAVE_AVX2)
const KernelTable* avx2_table_unchecked() noexcept;
#endif

const KernelTable* avx2_kernels() noexcept {
#if defined(KPROX_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* initial_table() noexcept {
  if (const char* env = std::getenv("KPROX_SIMD")) {
    const std::string_view v(env);
    if (v == "scalar") return &scalar_kernels();
    if (v == "avx2" && avx2_kernels() != nullptr) return avx2_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& active() noexcept { return *current().load(std::memory_order_relaxed); }

bool select_backend(Backend b) noexcept {
  const KernelTable* t = b == Backend::Scalar ? &scalar_kernels() : avx2_kernels();
  if (t == nullptr) return false;
  current().store(t, std::memory_order_relaxed);
  return true;
}

double log_sum_exp_sum(const double* a, const double* b, std::size_t n) noexcept {
  const KernelTable& k = active();
  const double m = k.max_sum(a, b, n);
  if (!std::isfinite(m)) return m;
  return m + std::log(k.sum_exp_shifted(a, b, m, n));
}

}  // namespace kprox::simd
