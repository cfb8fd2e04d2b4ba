#pragma once

#include <cstdint>
#include <limits>

namespace nvlink {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Purpose tags for derived streams. A shot's draws never share a stream with
// its block's environment or CRC draws, so toggling CRC does not perturb the
// per-shot sequence.
enum class Stream : std::uint64_t {
  kShot = 1,
  kBlock = 2,
  kCrc = 3,
  kRun = 4,
  kTest = 5,
};

// Counter-based generator: draw k of (root, stream, index) is a pure function
// of those four integers, so any shot is replayable in isolation and the
// result does not depend on which worker evaluates it.
// Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t root, Stream stream, std::uint64_t index,
             std::uint64_t sub = 0) noexcept
      : key_(derive_key(root, static_cast<std::uint64_t>(stream), index, sub)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    return splitmix64(key_ ^ (0xD1B54A32D192ED03ULL * ++counter_));
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  std::uint64_t draws() const noexcept { return counter_; }
  std::uint64_t key() const noexcept { return key_; }

  static constexpr std::uint64_t derive_key(std::uint64_t root,
                                            std::uint64_t stream,
                                            std::uint64_t index,
                                            std::uint64_t sub) noexcept {
    std::uint64_t k = splitmix64(root);
    k = splitmix64(k ^ (stream * 0xA24BAED4963EE407ULL));
    k = splitmix64(k ^ (index * 0x9FB21C651E98DF25ULL));
    return splitmix64(k ^ (sub * 0xC13FA9A902A6328FULL));
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Sub-seed for an independent run inside one invocation (e.g. one phase point
// of a sweep).
constexpr std::uint64_t derive_seed(std::uint64_t root,
                                    std::uint64_t run_index) noexcept {
  return CounterRng::derive_key(root, static_cast<std::uint64_t>(Stream::kRun),
                                run_index, 0);
}

}  // namespace nvlink
