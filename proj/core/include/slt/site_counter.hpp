#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "slt/lattice_walk.hpp"

namespace slt {

// Occupancy counter for one walk started at the origin.
//
// Positions are packed into a 128-bit key, (coord_j + offset) in a bit field
// of `bits` bits per axis with offset = max_steps, so a unit step updates the
// key by a single addition. Visited sites get dense ids in first-visit order.
class WalkOccupancy {
 public:
  WalkOccupancy(int dimension, std::uint64_t max_steps);

  // Back to the origin with no visits recorded. Keeps allocated storage.
  void reset();

  // Back to the origin, keeping all recorded sites and counts.
  void rewind() noexcept { key_ = origin_key_; }

  void move(int code) noexcept { key_ += delta_[static_cast<std::size_t>(code)]; }

  // Records one visit to the current position; returns its site id.
  std::uint32_t visit();

  // Site id of the current position, inserting it with count 0 if new.
  std::uint32_t locate();

  int dimension() const noexcept { return dimension_; }
  std::size_t site_count() const noexcept { return counts_.size(); }
  std::span<const std::uint64_t> counts() const noexcept { return counts_; }
  std::uint64_t count(std::uint32_t site) const { return counts_[site]; }
  std::uint64_t total_visits() const noexcept { return total_; }

  // Coordinates of a site (written into `out`, size d).
  void coordinates(std::uint32_t site, std::span<Coord> out) const;
  // Coordinates of the current position.
  void current_position(std::span<Coord> out) const;

 private:
  using Key = u128;

  Key unpacked_origin() const;
  std::uint64_t hash(Key k) const noexcept {
    return mix64(static_cast<std::uint64_t>(k) ^ mix64(static_cast<std::uint64_t>(k >> 64)));
  }
  void grow();
  void decode(Key k, std::span<Coord> out) const;

  int dimension_;
  int bits_;
  std::uint64_t offset_;
  std::vector<Key> delta_;
  Key origin_key_ = 0;
  Key key_ = 0;

  std::vector<std::uint32_t> slots_;  // site id + 1, 0 = empty
  std::uint64_t slot_mask_ = 0;
  std::vector<Key> site_keys_;
  std::vector<std::uint32_t> site_slot_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

}  // namespace slt
