#pragma once

#include <cmath>
#include <cstdint>

namespace nvae {

// Counter-based pseudo-random stream. Every stream is identified by a seed
// plus a (stream-id) triple, and produces an identical sequence of draws for
// identical identifiers. Substreams derived via substream() are statistically
// independent and have their own counters, so a consumer that draws a
// variable number of values (e.g. rejection sampling) cannot shift the
// sequence seen by anyone else.
class BaseNoise {
 public:
  explicit BaseNoise(std::uint64_t seed, std::uint64_t s0 = 0,
                     std::uint64_t s1 = 0, std::uint64_t s2 = 0)
      : key_(derive_key(seed, s0, s1, s2)) {}

  // Independent child stream; the child's counter starts at zero.
  BaseNoise substream(std::uint64_t a, std::uint64_t b = 0,
                      std::uint64_t c = 0) const {
    BaseNoise child;
    child.key_ = derive_key(key_, a, b, c);
    return child;
  }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(key_ + 0x9e3779b97f4a7c15ULL * counter_);
  }

  // Uniform draw strictly inside (0, 1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; consumes two uniforms.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) %
           n;
  }

 private:
  BaseNoise() = default;

  static std::uint64_t mix(std::uint64_t x) {
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
    return mix(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
  }

  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t s0,
                                  std::uint64_t s1, std::uint64_t s2) {
    std::uint64_t h = mix(seed + 0x9e3779b97f4a7c15ULL);
    h = combine(h, s0);
    h = combine(h, s1);
    h = combine(h, s2);
    return h;
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace nvae
