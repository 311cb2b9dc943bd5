#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace ctune {

// Deterministic generator with portable draw semantics. std::mt19937_64 is
// bit-stable across implementations, but the standard distributions are not,
// so the uniform/gaussian draws are spelled out here.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  uint64_t next_u64() {
    // splitmix64
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1), 53-bit resolution
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // unbiased uniform in [0, n)
  uint64_t next_below(uint64_t n) {
    if (n <= 1) {
      next_u64();
      return 0;
    }
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t value;
    do {
      value = next_u64();
    } while (value >= limit);
    return value % n;
  }

  bool next_bernoulli(double probability) { return next_unit() < probability; }

  // Box-Muller; consumes exactly two uniforms per draw
  double next_gaussian() {
    double u1 = next_unit();
    double u2 = next_unit();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  uint64_t state_;
};

// FNV-1a; used to derive RNG streams from string material
inline uint64_t hash64(std::string_view text) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace ctune
