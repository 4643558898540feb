#pragma once

#include <cstdint>

namespace retire {

// Counter-based SplitMix64 streams. A stream is keyed by the tuple
// (seed, replication, purpose); the value at counter i is the SplitMix64
// finalizer applied to key + (i+1)*golden. Draw order therefore never
// matters: replications and purposes are independent streams and any
// counter can be evaluated in isolation, which is what makes parallel
// Monte Carlo replications bitwise-reproducible.
enum class StreamPurpose : std::uint64_t {
  Predictors = 1,
  Noise = 2,
  FoldShuffle = 3,
  Generic = 4,
};

namespace detail {
inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t replication, std::uint64_t purpose) {
    std::uint64_t k = detail::mix64(seed + detail::kGolden);
    k = detail::mix64(k + replication + detail::kGolden);
    k = detail::mix64(k + purpose + detail::kGolden);
    key_ = k;
  }
  CounterStream(std::uint64_t seed, std::uint64_t replication, StreamPurpose purpose)
      : CounterStream(seed, replication, static_cast<std::uint64_t>(purpose)) {}

  std::uint64_t bits(std::uint64_t counter) const {
    return detail::mix64(key_ + (counter + 1) * detail::kGolden);
  }

  // Uniform strictly inside (0,1): 53-bit mantissa offset by half an ulp.
  double uniform(std::uint64_t counter) const {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  std::uint64_t key_;
};

// Sequential cursor over a stream, for consumers that just want next().
class StreamCursor {
 public:
  explicit StreamCursor(CounterStream stream) : stream_(stream) {}
  double next_uniform() { return stream_.uniform(counter_++); }
  std::uint64_t next_bits() { return stream_.bits(counter_++); }

 private:
  CounterStream stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace retire
