#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace mest {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// A block cipher mapping a 128-bit counter and 64-bit key to 128 random
/// bits. Streams are cheap: any (key, counter) pair can be evaluated
/// independently, so per-row / per-task substreams need no state sharing.
struct Philox4x32 {
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 2> key,
                                            std::array<std::uint32_t, 4> ctr) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }
};

/// Substream tags keep unrelated draws from ever sharing a counter.
namespace stream {
constexpr std::uint32_t kDesignRow = 1;   // feature vector of one row
constexpr std::uint32_t kNoiseRow = 2;    // contamination flag + noise of one row
constexpr std::uint32_t kCorruptRow = 3;  // corrupt_responses noise of one row
constexpr std::uint32_t kSplit = 4;       // train/test permutation
constexpr std::uint32_t kStart = 5;       // solver random starts
}  // namespace stream

/// One deterministic stream of draws, identified by (seed, purpose, index).
///
/// Draw k of stream (s, p, i) is a pure function of those four integers, so
/// row-level generation is order-independent and parallelizable.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint32_t purpose, std::uint64_t index)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        prefix_{purpose, static_cast<std::uint32_t>(index),
                static_cast<std::uint32_t>(index >> 32)} {}

  std::uint64_t next_u64() {
    if (pos_ >= 2) refill();
    const std::uint64_t lo = buf_[2 * pos_];
    const std::uint64_t hi = buf_[2 * pos_ + 1];
    ++pos_;
    return lo | (hi << 32);
  }

  /// Uniform on [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1]; safe as a log() argument.
  double next_open_double() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * next_double(); }

  /// Standard normal via Box-Muller; consumes two uniforms per pair.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_open_double();
    const double u2 = next_double();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double stddev) { return mean + stddev * next_gaussian(); }

 private:
  void refill() {
    const auto out = Philox4x32::block(
        {key_[0], key_[1]}, {prefix_[0], prefix_[1], prefix_[2], block_});
    ++block_;
    buf_ = out;
    pos_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 3> prefix_;
  std::uint32_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 2;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// splitmix64 finalizer; used to derive child seeds for replicas/cells.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (a + 1) + 0xBF58476D1CE4E5B9ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace mest
