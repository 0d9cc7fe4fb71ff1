#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace peadv {

// SplitMix64-based generator. std::mt19937 engines are portable but the
// standard distributions are not; everything here is pinned down so runs
// reproduce bit-for-bit across platforms and library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Derives a generator from a seed and a string key (digest, tag, ...) so
  // adding samples to a run never reshuffles the randomness of others.
  static Rng from_key(std::uint64_t seed, std::string_view key) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
    for (char c : key) {
      h ^= static_cast<std::uint8_t>(c);
      h *= 1099511628211ull;
    }
    return Rng(seed ^ h);
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n); n == 0 yields 0.
  std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Box-Muller, no cached spare (keeps the draw sequence position-independent).
  double normal(double mean = 0.0, double sigma = 1.0) {
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
  }

  std::uint8_t next_byte() { return static_cast<std::uint8_t>(next_u64() & 0xFF); }

  // Independent child stream; does not advance this generator.
  Rng fork(std::uint64_t salt) const {
    std::uint64_t z = state_ ^ (salt * 0xD1B54A32D192ED03ull + 0x8CB92BA72F3D8DD7ull);
    z = (z ^ (z >> 29)) * 0xBF58476D1CE4E5B9ull;
    return Rng(z ^ (z >> 32));
  }

 private:
  std::uint64_t state_;
};

}  // namespace peadv
