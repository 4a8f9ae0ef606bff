#pragma once

#include <cstdint>
#include <string_view>

namespace idrm {

// PRNG algorithm identifier recorded in run reports.
inline constexpr const char* kPrngId = "splitmix64";

// splitmix64: 64-bit counter-based generator (Steele, Lea, Flood 2014).
// Fully specified arithmetic, so streams are reproducible for a given seed
// on any platform.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on the open interval (0, 1): ((bits >> 11) + 0.5) * 2^-53.
  double uniform_open() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return next() % n; }

 private:
  uint64_t state_;
};

// Derives an independent stream seed from (seed, tag, index) by hashing the
// tag into the splitmix finalizer. Used for the documented seed-derivation
// scheme: init, batch-k, boundary-k, eval streams all hang off one master.
inline uint64_t derive_seed(uint64_t seed, std::string_view tag,
                            uint64_t index = 0) {
  uint64_t h = seed;
  for (char c : tag) h = (h ^ static_cast<uint64_t>(c)) * 0x100000001b3ULL;
  h ^= 0x9e3779b97f4a7c15ULL * (index + 1);
  SplitMix64 g(h);
  g.next();
  return g.next();
}

}  // namespace idrm
