#pragma once

#include <cstddef>
#include <functional>

namespace kprox {

/// 0 selects hardware parallelism. KPROX_THREADS is read once at startup.
void set_thread_count(int n);
int thread_count();

/// Runs body(i) for i in [0, n) with a static partition. Each index is handled
/// by exactly one worker, so results do not depend on the thread count as long
/// as body(i) only writes its own outputs.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace kprox
