#pragma once

#include <cmath>
#include <cstdint>

namespace ppl {

// Splittable 64-bit generator (SplitMix64 core). Every sampling path takes a
// RandomSource explicitly; independent streams are derived with split() or by
// keying on a name hash, so skipping one draw never shifts another stream.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (one value per pair of uniforms).
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    // Guard against log(0): shift u1 into (0, 1].
    u1 = 1.0 - u1;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  RandomSource split() { return RandomSource(next_u64()); }

 private:
  std::uint64_t state_;
};

// FNV-1a, used to key per-variable random streams on names.
inline std::uint64_t hash_name(const char* s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (; *s; ++s) h = (h ^ static_cast<unsigned char>(*s)) * 0x100000001b3ull;
  return h;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key) {
  std::uint64_t z = seed ^ (key + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  return z ^ (z >> 31);
}

}  // namespace ppl
