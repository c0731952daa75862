#pragma once

#include <cstdint>
#include <limits>

namespace bayesvpr {

/// SplitMix64 generator. Cheap to construct, which lets every particle own a
/// stream keyed by (seed, step, index) so results do not depend on evaluation
/// order or thread count.
class StreamRng {
 public:
  using result_type = std::uint64_t;

  explicit StreamRng(std::uint64_t state) : state_(state) {}

  /// Stream for (seed, step, index); distinct keys give decorrelated streams.
  static StreamRng for_key(std::uint64_t seed, std::uint64_t step, std::uint64_t index) {
    std::uint64_t s = mix(seed ^ 0x9E3779B97F4A7C15ull);
    s = mix(s ^ (step + 0xD1B54A32D192ED03ull));
    s = mix(s ^ (index + 0x8CB92BA72F3D8DD7ull));
    return StreamRng(s);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace bayesvpr
