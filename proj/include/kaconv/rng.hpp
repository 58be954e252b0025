#pragma once

// Seedable RNG with per-purpose streams. The generator is xoshiro256**
// (Blackman & Vigna), state expanded from the seed with SplitMix64. All
// derived quantities (uniforms, gaussians, bounded ints, shuffles) are
// built from raw bits here rather than <random> distributions, so the
// exact same seed reproduces the exact same draws on every platform.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace kaconv {

inline uint64_t splitmix64_next(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64_next(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller without a cached spare; two uniforms per draw.
  double normal(double mean, double stddev) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n) via the multiply-high reduction.
  uint64_t below(uint64_t n) {
    const unsigned __int128 product =
        static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<uint64_t>(product >> 64);
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& values) {
    for (size_t i = values.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<uint64_t, 4> state_;
};

// Independent streams so the consumption order of one purpose cannot
// perturb another. `salt` separates repeated uses within a stream
// (epoch number, class index, ...).
enum class RngStream : uint64_t {
  init = 1,
  dropout = 2,
  shuffle = 3,
  embed = 4,
  split = 5,
};

inline Rng make_rng(uint64_t seed, RngStream stream, uint64_t salt = 0) {
  uint64_t sm = seed;
  const uint64_t base = splitmix64_next(sm);
  uint64_t mix = base ^ (0x517cc1b727220a95ULL * static_cast<uint64_t>(stream)) ^
                 (0x2545f4914f6cdd1dULL * (salt + 1));
  return Rng(splitmix64_next(mix));
}

}  // namespace kaconv
