#ifndef SHMM_RNG_HPP
#define SHMM_RNG_HPP

#include <cmath>
#include <cstdint>

namespace shmm {

// SplitMix64 (Steele/Lea/Flood splittable generator core, Vigna's mixing
// constants). All simulation in this library draws through this engine so
// that results are bit-reproducible across platforms; the standard-library
// distributions are implementation-defined and are not used.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += UINT64_C(0x9E3779B97F4A7C15));
    z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
    return z ^ (z >> 31);
  }

  std::uint64_t operator()() { return next(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (one value per two uniforms; no cache,
  // so the draw sequence is a pure function of the engine state).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  // Exponential with the given rate.
  double exponential(double rate) {
    double u = uniform();
    return -std::log1p(-u) / rate;
  }

  // Index into a discrete distribution given by `probs[0..n)` (sums to 1).
  template <typename Probs>
  int categorical(const Probs& probs, int n) {
    double u = uniform();
    double acc = 0.0;
    for (int k = 0; k + 1 < n; ++k) {
      acc += probs[k];
      if (u < acc) return k;
    }
    return n - 1;
  }

 private:
  std::uint64_t state_;
};

// Derives the seed of an independent child stream. Used to split one user
// seed into per-replicate / per-start streams: each index gets its own
// SplitMix64 whose seed is a bijective mix of (seed, index).
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed ^ (UINT64_C(0xBF58476D1CE4E5B9) * (index + 1));
  z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
  z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
  return z ^ (z >> 31);
}

}  // namespace shmm

#endif  // SHMM_RNG_HPP
