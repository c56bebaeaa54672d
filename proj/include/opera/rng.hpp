#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace opera {

// splitmix64 finalizer. Bijective on 64-bit ints.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

// Deterministic splittable random stream (splitmix64 core).
//
// Streams are value types. child(key) derives an independent stream as a pure
// function of (state, key), so a stream keyed by the same path always produces
// the same sequence no matter which thread runs it or in which order siblings
// are created. All sampling helpers are implemented here (no std::
// distributions) so sequences are identical across compilers and platforms.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(mix64(seed + kGamma)) {}

  // Derived stream; does not advance this stream.
  [[nodiscard]] RngStream child(std::uint64_t key) const {
    RngStream s(0);
    s.state_ = mix64(state_ ^ mix64(key + kChildTag));
    return s;
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix64(state_);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be >= 1.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool next_bernoulli(double p) { return next_double() < p; }

  // Standard normal via Box-Muller (one value per call, no cached state).
  double next_gaussian() {
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  // Index sampled from a probability vector summing to ~1.
  // Floating-point residue falls through to the last index.
  int sample_index(std::span<const double> probs) {
    double u = next_double();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  static constexpr std::uint64_t kChildTag = 0xd1b54a32d192ed03ULL;
  std::uint64_t state_;
};

}  // namespace opera
