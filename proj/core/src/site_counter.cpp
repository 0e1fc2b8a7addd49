#include "slt/site_counter.hpp"

#include <bit>
#include <string>

#include "slt/errors.hpp"

namespace slt {

WalkOccupancy::WalkOccupancy(int dimension, std::uint64_t max_steps)
    : dimension_(dimension), offset_(max_steps) {
  detail::require(dimension >= 1, "WalkOccupancy: dimension must be >= 1");
  bits_ = std::bit_width(2 * max_steps + 1);
  if (static_cast<std::uint64_t>(bits_) * static_cast<std::uint64_t>(dimension) > 128) {
    throw CapacityError("WalkOccupancy: " + std::to_string(dimension) + " axes of " +
                        std::to_string(bits_) + " bits do not fit a 128-bit site key");
  }
  delta_.resize(2 * static_cast<std::size_t>(dimension));
  for (int j = 0; j < dimension; ++j) {
    const Key unit = Key{1} << (bits_ * j);
    delta_[static_cast<std::size_t>(direction_code(j, +1))] = unit;
    delta_[static_cast<std::size_t>(direction_code(j, -1))] = Key{0} - unit;
  }
  origin_key_ = unpacked_origin();
  key_ = origin_key_;
  slots_.assign(1024, 0);
  slot_mask_ = slots_.size() - 1;
}

WalkOccupancy::Key WalkOccupancy::unpacked_origin() const {
  Key k = 0;
  for (int j = 0; j < dimension_; ++j) k |= Key{offset_} << (bits_ * j);
  return k;
}

void WalkOccupancy::reset() {
  for (const auto s : site_slot_) slots_[s] = 0;
  site_keys_.clear();
  site_slot_.clear();
  counts_.clear();
  total_ = 0;
  key_ = origin_key_;
}

std::uint32_t WalkOccupancy::locate() {
  std::uint64_t pos = hash(key_) & slot_mask_;
  while (true) {
    const std::uint32_t entry = slots_[pos];
    if (entry == 0) break;
    if (site_keys_[entry - 1] == key_) return entry - 1;
    pos = (pos + 1) & slot_mask_;
  }
  const auto id = static_cast<std::uint32_t>(site_keys_.size());
  slots_[pos] = id + 1;
  site_keys_.push_back(key_);
  site_slot_.push_back(static_cast<std::uint32_t>(pos));
  counts_.push_back(0);
  if (2 * site_keys_.size() > slots_.size()) grow();
  return id;
}

std::uint32_t WalkOccupancy::visit() {
  const std::uint32_t id = locate();
  ++counts_[id];
  ++total_;
  return id;
}

void WalkOccupancy::grow() {
  slots_.assign(slots_.size() * 2, 0);
  slot_mask_ = slots_.size() - 1;
  for (std::size_t id = 0; id < site_keys_.size(); ++id) {
    std::uint64_t pos = hash(site_keys_[id]) & slot_mask_;
    while (slots_[pos] != 0) pos = (pos + 1) & slot_mask_;
    slots_[pos] = static_cast<std::uint32_t>(id + 1);
    site_slot_[id] = static_cast<std::uint32_t>(pos);
  }
}

void WalkOccupancy::decode(Key k, std::span<Coord> out) const {
  const Key field_mask = (Key{1} << bits_) - 1;
  for (int j = 0; j < dimension_; ++j) {
    const auto raw = static_cast<std::uint64_t>((k >> (bits_ * j)) & field_mask);
    out[static_cast<std::size_t>(j)] = static_cast<Coord>(raw) - static_cast<Coord>(offset_);
  }
}

void WalkOccupancy::coordinates(std::uint32_t site, std::span<Coord> out) const {
  decode(site_keys_[site], out);
}

void WalkOccupancy::current_position(std::span<Coord> out) const { decode(key_, out); }

}  // namespace slt
