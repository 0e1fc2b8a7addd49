#include "slt/rng.hpp"

#include <cmath>

namespace slt {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kDomain = 0x736c742d6c616221ULL;  // "slt-lab!"
}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t replica_index) noexcept
    : master_seed_(master_seed), replica_index_(replica_index) {
  const std::uint64_t key = mix64(mix64(master_seed ^ kDomain) + kGolden * (replica_index + 1));
  for (std::size_t j = 0; j < s_.size(); ++j) {
    s_[j] = mix64(key + kGolden * (j + 1));
  }
  // xoshiro must not start from the all-zero state.
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = kGolden;
}

std::uint64_t RngStream::below(std::uint64_t bound) noexcept {
  // Lemire's multiply-shift with rejection of the short interval.
  u128 m = static_cast<u128>(next_u64()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<u128>(next_u64()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double RngStream::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform01() - 1.0;
    v = 2.0 * uniform01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

RngStream derive_rng_stream(std::uint64_t master_seed, std::uint64_t replica_index) noexcept {
  return RngStream(master_seed, replica_index);
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view tag) noexcept {
  // FNV-1a over the tag, folded into the seed through mix64.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(master_seed ^ mix64(h));
}

}  // namespace slt
