#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace pmrep {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Identifies one reproducible substream: master seed, purpose tag, index.
struct StreamId {
  std::uint64_t master = 0;
  std::uint64_t tag = 0;
  std::uint64_t index = 0;

  std::uint64_t key() const { return splitmix64(splitmix64(splitmix64(master) ^ tag) ^ index); }
};

/// Small-state SplitMix64 stream; one per particle so particles can be
/// advanced independently. Normals use Box-Muller with both outputs.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream() = default;
  explicit RandomStream(StreamId id) : state_(id.key()) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in the open interval (0, 1).
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t state_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

namespace stream_tag {
inline constexpr std::uint64_t kParticles = 1;
inline constexpr std::uint64_t kCounterexample = 2;
inline constexpr std::uint64_t kTestData = 3;
}  // namespace stream_tag

}  // namespace pmrep
