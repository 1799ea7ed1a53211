#include "kprox/parallel.hpp"

#include <cstdlib>
#include <thread>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace kprox {

namespace {

int hardware_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

int& configured() {
  static int n = [] {
    if (const char* env = std::getenv("KPROX_THREADS")) {
      const int v = std::atoi(env);
      if (v > 0) return v;
    }
    return hardware_threads();
  }();
  return n;
}

}  // namespace

void set_thread_count(int n) { configured() = n > 0 ? n : hardware_threads(); }

int thread_count() { return configured(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
#if defined(_OPENMP)
  const int threads = thread_count();
  if (threads > 1 && n > 1) {
    const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(static) num_threads(threads)
    for (long long i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace kprox
