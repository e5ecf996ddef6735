#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_set>
#include <vector>

namespace devinr {

// PCG64 (XSL-RR 128/64). All randomness in the project flows through this
// generator so that runs are reproducible bit-for-bit from a single seed.
//
// Stream derivation: every consumer draws from an independent generator
// constructed as Pcg64(mix(master_seed, purpose_tag, counter)). The purpose
// tags are fixed (see RngStream) and the counter is the training iteration,
// subject index, or scan index as appropriate. Because each (purpose, counter)
// pair gets its own generator, toggling a feature that consumes a variable
// amount of randomness cannot shift any other consumer's stream.
class Pcg64 {
 public:
  using u128 = unsigned __int128;

  explicit Pcg64(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t s = seed;
    const std::uint64_t lo = splitmix64(s);
    const std::uint64_t hi = splitmix64(s);
    std::uint64_t t = stream ^ 0x9e3779b97f4a7c15ULL;
    const std::uint64_t inc_lo = splitmix64(t);
    const std::uint64_t inc_hi = splitmix64(t);
    state_ = (u128(hi) << 64) | lo;
    inc_ = (((u128(inc_hi) << 64) | inc_lo) << 1) | 1;  // must be odd
    next_u64();
    next_u64();
  }

  std::uint64_t next_u64() {
    const u128 old = state_;
    state_ = old * kMult + inc_;
    const std::uint64_t xored =
        static_cast<std::uint64_t>(old >> 64) ^ static_cast<std::uint64_t>(old);
    const unsigned rot = static_cast<unsigned>(old >> 122);
    return (xored >> rot) | (xored << ((64u - rot) & 63u));
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) (Lemire's method).
  std::uint64_t below(std::uint64_t n) {
    u128 m = u128(next_u64()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (lo < threshold) {
        m = u128(next_u64()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Standard normal via Box-Muller; one value per call, the cosine branch.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr u128 kMult =
      (u128(2549297995355413924ULL) << 64) | 4865540595714422341ULL;

  u128 state_{};
  u128 inc_{};
};

enum class RngStream : std::uint64_t {
  kInit = 1,          // network weight initialization
  kScanSelect = 2,    // which scan trains this iteration
  kPixelSample = 3,   // pixel subset for the iteration
  kSgla = 4,          // global-latent replacement draw
  kSubjectParams = 5, // phantom subject parameter draws
  kHcNoise = 6,       // synthetic head-circumference measurement noise
  kScanTimes = 7,     // phantom scan ages
  kInversion = 8,     // pixel sampling during latent inversion
};

inline Pcg64 stream_rng(std::uint64_t master_seed, RngStream purpose,
                        std::uint64_t counter = 0) {
  std::uint64_t s = master_seed;
  Pcg64::splitmix64(s);
  s ^= static_cast<std::uint64_t>(purpose) * 0xd1342543de82ef95ULL;
  Pcg64::splitmix64(s);
  s ^= counter * 0x2545f4914f6cdd1dULL;
  return Pcg64(s, static_cast<std::uint64_t>(purpose));
}

// k distinct indices from [0, n), ascending. Floyd's algorithm: O(k) draws
// regardless of n, so consumers never perturb the generator by more than k.
inline std::vector<std::uint32_t> sample_without_replacement(std::uint64_t n,
                                                             std::uint64_t k,
                                                             Pcg64& rng) {
  std::vector<std::uint32_t> out;
  out.reserve(k);
  if (k == 0) return out;
  if (k > n) k = n;
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(k * 2);
  for (std::uint64_t i = n - k; i < n; ++i) {
    std::uint64_t j = rng.below(i + 1);
    if (!chosen.insert(j).second) {
      chosen.insert(i);
      j = i;
    }
    out.push_back(static_cast<std::uint32_t>(j));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace devinr
