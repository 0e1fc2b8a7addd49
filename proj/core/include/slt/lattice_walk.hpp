#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "slt/rng.hpp"

namespace slt {

using Coord = std::int64_t;

struct ResourceLimits {
  int max_dimension = 64;
  std::int64_t max_steps = std::int64_t{1} << 31;
};

class LatticePoint {
 public:
  LatticePoint() = default;
  // Origin of Z^d.
  explicit LatticePoint(int dimension);
  explicit LatticePoint(std::vector<Coord> coords);

  static LatticePoint unit(int dimension, int axis, int sign);

  int dimension() const noexcept { return static_cast<int>(coords_.size()); }
  std::span<const Coord> coords() const noexcept { return coords_; }
  Coord operator[](int axis) const { return coords_[static_cast<std::size_t>(axis)]; }
  Coord& operator[](int axis) { return coords_[static_cast<std::size_t>(axis)]; }

  LatticePoint& operator+=(const LatticePoint& other);
  LatticePoint& operator-=(const LatticePoint& other);
  friend LatticePoint operator+(LatticePoint a, const LatticePoint& b) { return a += b; }
  friend LatticePoint operator-(LatticePoint a, const LatticePoint& b) { return a -= b; }
  friend bool operator==(const LatticePoint&, const LatticePoint&) = default;

  Coord l1_norm() const noexcept;
  Coord squared_norm() const noexcept;

 private:
  std::vector<Coord> coords_;
};

// A step direction is encoded as c in [0, 2d): axis c/2, sign + for even c
// and - for odd c. So +e1, -e1, +e2, -e2, ...
constexpr int direction_axis(int code) noexcept { return code >> 1; }
constexpr int direction_sign(int code) noexcept { return (code & 1) ? -1 : 1; }
constexpr int direction_code(int axis, int sign) noexcept { return 2 * axis + (sign < 0 ? 1 : 0); }

class IncrementSequence {
 public:
  IncrementSequence() = default;
  IncrementSequence(int dimension, std::vector<std::uint8_t> codes);

  static IncrementSequence from_steps(int dimension, std::span<const LatticePoint> steps);

  int dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return codes_.size(); }
  bool empty() const noexcept { return codes_.empty(); }

  int code(std::size_t k) const { return codes_[k]; }
  int axis(std::size_t k) const { return direction_axis(codes_[k]); }
  int sign(std::size_t k) const { return direction_sign(codes_[k]); }
  LatticePoint step(std::size_t k) const;
  std::span<const std::uint8_t> codes() const noexcept { return codes_; }

  friend bool operator==(const IncrementSequence&, const IncrementSequence&) = default;

 private:
  int dimension_ = 1;
  std::vector<std::uint8_t> codes_;
};

// Maps uniform 64-bit words to direction codes. When 2d is a power of two
// the code is read from consecutive bit fields of a word. Otherwise each
// word is expanded into k base-2d digits by repeated multiply-high, with k
// the largest count such that (2d)^k <= 2^24, so every digit is within 2^-40
// of uniform in total variation and no modulo reduction is involved.
class DirectionSampler {
 public:
  explicit DirectionSampler(int dimension);

  int next(RngStream& rng) noexcept {
    if (left_ == 0) {
      word_ = rng.next_u64();
      left_ = per_word_;
    }
    --left_;
    if (pow2_) {
      const int c = static_cast<int>(word_ & mask_);
      word_ >>= shift_;
      return c;
    }
    const u128 p = static_cast<u128>(word_) * radix_;
    word_ = static_cast<std::uint64_t>(p);
    return static_cast<int>(p >> 64);
  }

  int dimension() const noexcept { return dimension_; }
  int digits_per_word() const noexcept { return per_word_; }

 private:
  int dimension_;
  std::uint64_t radix_;
  bool pow2_;
  int shift_ = 0;
  std::uint64_t mask_ = 0;
  int per_word_ = 0;
  int left_ = 0;
  std::uint64_t word_ = 0;
};

IncrementSequence generate_increments(int dimension, std::int64_t length, RngStream& rng,
                                      const ResourceLimits& limits = {});

// S(0) = 0, S(1), ..., S(n).
std::vector<LatticePoint> positions(const IncrementSequence& inc);

// Same positions, row-major (n+1) x d.
std::vector<Coord> flat_positions(const IncrementSequence& inc);

// Adds to `displacement` the sum of `steps` further i.i.d. uniform unit
// steps. Axis choices are drawn as bit-sliced ceil(log2 d)-bit symbols with
// rejection of symbols >= d and signs as independent bits, then tallied with
// popcounts; the result has exactly the law of `steps` walk steps.
void add_bulk_steps(RngStream& rng, int dimension, std::uint64_t steps,
                    std::span<Coord> displacement);

}  // namespace slt
