#pragma once

#include <array>
#include <cstdint>

namespace ones {

// xoshiro256** seeded through splitmix64. Streams are constructed per
// operator application, so construction has to be a handful of multiplies;
// satisfies UniformRandomBitGenerator for the <random> distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  Rng() : Rng(0) {}
  explicit Rng(std::uint64_t seed) {
    std::uint64_t z = seed;
    for (auto& s : state_) {
      z += 0x9e3779b97f4a7c15ULL;
      std::uint64_t w = z;
      w = (w ^ (w >> 30)) * 0xbf58476d1ce4e5b9ULL;
      w = (w ^ (w >> 27)) * 0x94d049bb133111ebULL;
      s = w ^ (w >> 31);
    }
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~static_cast<result_type>(0); }

  result_type operator()() {
    result_type result = rotl(state_[1] * 5, 7) * 9;
    result_type t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

 private:
  static constexpr result_type rotl(result_type x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::array<result_type, 4> state_;
};

}  // namespace ones
