#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace aopi {

// Philox4x32-10 counter-based generator. Every draw is a pure function of
// (seed, domain, stream, counter), so independent streams can be carved out
// per camera and per purpose (transmission, service, accuracy) without any
// shared mutable state, and replacing one consumer never perturbs another.
struct Philox4x32 {
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t prod0 = std::uint64_t(kMul0) * ctr[0];
      const std::uint64_t prod1 = std::uint64_t(kMul1) * ctr[2];
      const auto hi0 = std::uint32_t(prod0 >> 32);
      const auto lo0 = std::uint32_t(prod0);
      const auto hi1 = std::uint32_t(prod1 >> 32);
      const auto lo1 = std::uint32_t(prod1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

// One addressable stream of doubles. `domain` and `stream` select the
// substream (e.g. domain = camera index, stream = draw purpose); the draw
// index is the counter, so the i-th draw is reproducible in isolation.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint32_t domain, std::uint32_t stream)
      : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
        domain_(domain),
        stream_(stream) {}

  // Uniform double in [0, 1) with 53 random bits, addressed by draw index.
  double uniform_at(std::uint64_t index) const {
    const auto words = Philox4x32::block(
        {stream_, domain_, std::uint32_t(index), std::uint32_t(index >> 32)},
        key_);
    const std::uint64_t bits =
        (std::uint64_t(words[0]) << 32 | words[1]) >> 11;
    return double(bits) * 0x1.0p-53;
  }

  // Sequential convenience: advances an internal draw index.
  double next_uniform() { return uniform_at(next_++); }

  // Exponential with the given rate, addressed by draw index.
  double exponential_at(std::uint64_t index, double rate) const {
    return -std::log1p(-uniform_at(index)) / rate;
  }

  bool bernoulli_at(std::uint64_t index, double prob) const {
    return uniform_at(index) < prob;
  }

  // Standard normal via Box-Muller; consumes two lanes of one block.
  double normal_at(std::uint64_t index) const {
    const auto words = Philox4x32::block(
        {stream_, domain_, std::uint32_t(index), std::uint32_t(index >> 32)},
        key_);
    const std::uint64_t bits0 =
        (std::uint64_t(words[0]) << 32 | words[1]) >> 11;
    const std::uint64_t bits1 =
        (std::uint64_t(words[2]) << 32 | words[3]) >> 11;
    double u1 = double(bits0) * 0x1.0p-53;
    const double u2 = double(bits1) * 0x1.0p-53;
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint32_t domain_;
  std::uint32_t stream_;
  std::uint64_t next_ = 0;
};

// Folds an index into a seed to derive unrelated child seeds (splitmix64).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace aopi
