#pragma once

// Counter-based random streams (Philox4x32-10). A stream is addressed by
// (seed, purpose, a, b), e.g. (seed, Noise, particle, step), so any draw can be
// reproduced without replaying the ones before it.

#include <array>
#include <cstdint>

namespace kprox {

enum class StreamPurpose : std::uint32_t {
  InitialSample = 1,
  Noise = 2,
  ReferenceNoise = 3,  // independent plain Monte Carlo ensemble
  ProxInit = 4,
  Table1 = 5,
  ReferenceInitial = 6,  // initial draw of the plain Monte Carlo ensemble
  Test = 99,
};

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, StreamPurpose purpose, std::uint64_t a = 0,
             std::uint64_t b = 0) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; caches the second variate.
  double normal() noexcept;

 private:
  void refill() noexcept;

  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace kprox
