#include "slt/lattice_walk.hpp"

#include <array>
#include <bit>
#include <cstdlib>
#include <string>

#include "slt/errors.hpp"

namespace slt {

LatticePoint::LatticePoint(int dimension) {
  detail::require(dimension >= 1, "LatticePoint: dimension must be >= 1");
  coords_.assign(static_cast<std::size_t>(dimension), 0);
}

LatticePoint::LatticePoint(std::vector<Coord> coords) : coords_(std::move(coords)) {
  detail::require(!coords_.empty(), "LatticePoint: dimension must be >= 1");
}

LatticePoint LatticePoint::unit(int dimension, int axis, int sign) {
  detail::require(axis >= 0 && axis < dimension, "LatticePoint::unit: axis out of range");
  detail::require(sign == 1 || sign == -1, "LatticePoint::unit: sign must be +1 or -1");
  LatticePoint p(dimension);
  p[axis] = sign;
  return p;
}

LatticePoint& LatticePoint::operator+=(const LatticePoint& other) {
  detail::require(other.dimension() == dimension(), "LatticePoint: dimension mismatch");
  for (std::size_t j = 0; j < coords_.size(); ++j) coords_[j] += other.coords_[j];
  return *this;
}

LatticePoint& LatticePoint::operator-=(const LatticePoint& other) {
  detail::require(other.dimension() == dimension(), "LatticePoint: dimension mismatch");
  for (std::size_t j = 0; j < coords_.size(); ++j) coords_[j] -= other.coords_[j];
  return *this;
}

Coord LatticePoint::l1_norm() const noexcept {
  Coord s = 0;
  for (const Coord c : coords_) s += c < 0 ? -c : c;
  return s;
}

Coord LatticePoint::squared_norm() const noexcept {
  Coord s = 0;
  for (const Coord c : coords_) s += c * c;
  return s;
}

IncrementSequence::IncrementSequence(int dimension, std::vector<std::uint8_t> codes)
    : dimension_(dimension), codes_(std::move(codes)) {
  detail::require(dimension >= 1 && dimension <= 127,
                  "IncrementSequence: dimension must lie in [1, 127]");
  for (const auto c : codes_) {
    detail::require(c < 2 * dimension, "IncrementSequence: direction code out of range");
  }
}

IncrementSequence IncrementSequence::from_steps(int dimension,
                                                std::span<const LatticePoint> steps) {
  std::vector<std::uint8_t> codes;
  codes.reserve(steps.size());
  for (const auto& s : steps) {
    detail::require(s.dimension() == dimension, "IncrementSequence: step dimension mismatch");
    int axis = -1;
    int sign = 0;
    for (int j = 0; j < dimension; ++j) {
      if (s[j] == 0) continue;
      detail::require(axis < 0 && (s[j] == 1 || s[j] == -1),
                      "IncrementSequence: every step must be a unit vector +-e_j");
      axis = j;
      sign = static_cast<int>(s[j]);
    }
    detail::require(axis >= 0, "IncrementSequence: zero step");
    codes.push_back(static_cast<std::uint8_t>(direction_code(axis, sign)));
  }
  return IncrementSequence(dimension, std::move(codes));
}

LatticePoint IncrementSequence::step(std::size_t k) const {
  return LatticePoint::unit(dimension_, axis(k), sign(k));
}

DirectionSampler::DirectionSampler(int dimension)
    : dimension_(dimension), radix_(2 * static_cast<std::uint64_t>(dimension)),
      pow2_(std::has_single_bit(radix_)) {
  detail::require(dimension >= 1, "DirectionSampler: dimension must be >= 1");
  if (pow2_) {
    shift_ = std::countr_zero(radix_);
    mask_ = radix_ - 1;
    per_word_ = 64 / shift_;
  } else {
    std::uint64_t power = 1;
    while (power <= (std::uint64_t{1} << 24) / radix_) {
      power *= radix_;
      ++per_word_;
    }
    if (per_word_ == 0) per_word_ = 1;
  }
}

IncrementSequence generate_increments(int dimension, std::int64_t length, RngStream& rng,
                                      const ResourceLimits& limits) {
  detail::require(dimension >= 1, "generate_increments: dimension must be >= 1");
  detail::require(length >= 0, "generate_increments: length must be >= 0");
  if (dimension > limits.max_dimension || dimension > 127) {
    throw CapacityError("generate_increments: dimension " + std::to_string(dimension) +
                        " exceeds the configured limit " + std::to_string(limits.max_dimension));
  }
  if (length > limits.max_steps) {
    throw CapacityError("generate_increments: length " + std::to_string(length) +
                        " exceeds the configured limit " + std::to_string(limits.max_steps));
  }
  DirectionSampler sampler(dimension);
  std::vector<std::uint8_t> codes(static_cast<std::size_t>(length));
  for (auto& c : codes) c = static_cast<std::uint8_t>(sampler.next(rng));
  return IncrementSequence(dimension, std::move(codes));
}

std::vector<Coord> flat_positions(const IncrementSequence& inc) {
  const auto d = static_cast<std::size_t>(inc.dimension());
  std::vector<Coord> out((inc.size() + 1) * d, 0);
  for (std::size_t k = 0; k < inc.size(); ++k) {
    const Coord* prev = &out[k * d];
    Coord* next = &out[(k + 1) * d];
    for (std::size_t j = 0; j < d; ++j) next[j] = prev[j];
    next[inc.axis(k)] += inc.sign(k);
  }
  return out;
}

std::vector<LatticePoint> positions(const IncrementSequence& inc) {
  const auto flat = flat_positions(inc);
  const auto d = static_cast<std::size_t>(inc.dimension());
  std::vector<LatticePoint> out;
  out.reserve(inc.size() + 1);
  for (std::size_t k = 0; k <= inc.size(); ++k) {
    out.emplace_back(std::vector<Coord>(flat.begin() + static_cast<std::ptrdiff_t>(k * d),
                                        flat.begin() + static_cast<std::ptrdiff_t>((k + 1) * d)));
  }
  return out;
}

void add_bulk_steps(RngStream& rng, int dimension, std::uint64_t steps,
                    std::span<Coord> displacement) {
  detail::require(dimension >= 1 && dimension <= 64, "add_bulk_steps: dimension must lie in [1, 64]");
  detail::require(displacement.size() == static_cast<std::size_t>(dimension),
                  "add_bulk_steps: displacement has the wrong dimension");
  const int bits = dimension == 1 ? 0 : std::bit_width(static_cast<unsigned>(dimension - 1));
  std::array<std::uint64_t, 7> slice{};
  std::array<std::uint64_t, 64> mask{};
  std::uint64_t remaining = steps;
  while (remaining > 0) {
    for (int b = 0; b < bits; ++b) slice[static_cast<std::size_t>(b)] = rng.next_u64();
    const std::uint64_t signs = rng.next_u64();
    std::uint64_t accepted = 0;
    for (int v = 0; v < dimension; ++v) {
      std::uint64_t m = ~std::uint64_t{0};
      for (int b = 0; b < bits; ++b) {
        const std::uint64_t w = slice[static_cast<std::size_t>(b)];
        m &= ((v >> b) & 1) ? w : ~w;
      }
      mask[static_cast<std::size_t>(v)] = m;
      accepted |= m;
    }
    std::uint64_t keep = ~std::uint64_t{0};
    const auto available = static_cast<std::uint64_t>(std::popcount(accepted));
    if (available > remaining) {
      // Keep only the lowest `remaining` accepted positions.
      std::uint64_t x = accepted;
      for (std::uint64_t i = 1; i < remaining; ++i) x &= x - 1;
      const int p = std::countr_zero(x);
      keep = p == 63 ? ~std::uint64_t{0} : ((std::uint64_t{1} << (p + 1)) - 1);
    }
    for (int v = 0; v < dimension; ++v) {
      const std::uint64_t m = mask[static_cast<std::size_t>(v)] & keep;
      const int minus = std::popcount(m & signs);
      const int plus = std::popcount(m) - minus;
      displacement[static_cast<std::size_t>(v)] += plus - minus;
    }
    remaining -= static_cast<std::uint64_t>(std::popcount(accepted & keep));
  }
}

}  // namespace slt
