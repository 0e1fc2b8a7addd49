#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace slt {

__extension__ typedef unsigned __int128 u128;
__extension__ typedef __int128 i128;

// SplitMix64 output function (Stafford variant 13). A bijection on 64-bit
// words; used for key derivation and hashing.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Per-replica random stream.
//
// Derivation, bit-exact on every platform:
//   key   = mix64(mix64(master_seed ^ 0x736c742d6c616221) + 0x9e3779b97f4a7c15 * (replica_index + 1))
//   s[j]  = mix64(key + 0x9e3779b97f4a7c15 * (j + 1))        for j = 0..3
// and the words are produced by xoshiro256** over the state s. Since mix64
// is a bijection, distinct replica indices under one master seed give
// distinct keys.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t master_seed, std::uint64_t replica_index) noexcept;

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  std::uint64_t operator()() noexcept { return next_u64(); }
  static constexpr std::uint64_t min() noexcept { return 0; }
  static constexpr std::uint64_t max() noexcept {
    return std::numeric_limits<std::uint64_t>::max();
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Exactly uniform on {0, ..., bound-1}; bound > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

  // Standard normal via the polar Box-Muller method.
  double normal() noexcept;

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t replica_index() const noexcept { return replica_index_; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
  std::uint64_t master_seed_ = 0;
  std::uint64_t replica_index_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

RngStream derive_rng_stream(std::uint64_t master_seed,
                            std::uint64_t replica_index) noexcept;

// Derives an unrelated master seed for an auxiliary run (for example the
// calibration sample of a standardized statistic) from a tag.
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view tag) noexcept;

}  // namespace slt
