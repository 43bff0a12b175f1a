#pragma once

#include <cstdint>

namespace gridrl {

// SplitMix64 finalizer. Full-avalanche 64-bit mix.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Purpose tags so independently keyed streams never collide across subsystems.
enum class StreamId : std::uint64_t {
  scenario = 1,
  episode = 2,
  policy_init = 3,
  batch_shuffle = 4,
  sampler_shuffle = 5,
  sft_shuffle = 6,
};

// Counter-based random stream. Output depends only on the key tuple and the
// number of values drawn so far, never on thread or call-site state, so any
// two streams with distinct keys are independent and replayable.
class RngStream {
 public:
  RngStream(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
            std::uint64_t d = 0)
      : key_(mix64(mix64(mix64(mix64(a) ^ b) ^ c) ^ d)) {}

  RngStream(StreamId id, std::uint64_t b, std::uint64_t c = 0,
            std::uint64_t d = 0)
      : RngStream(static_cast<std::uint64_t>(id), b, c, d) {}

  std::uint64_t next_u64() { return mix64(mix64(counter_++) ^ key_); }

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n), unbiased via rejection.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t u = next_u64();
    while (u >= limit) u = next_u64();
    return u % n;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace gridrl
