#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "slt/lattice_walk.hpp"

namespace slt {

// Open-addressing map from d-dimensional coordinates to dense ids
// (first-insertion order). Coordinates are stored row-major.
class SiteIndex {
 public:
  explicit SiteIndex(int dimension = 1);

  int dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return size_; }

  // Id of `site`, inserting it if absent.
  std::uint32_t insert(std::span<const Coord> site);
  std::optional<std::uint32_t> find(std::span<const Coord> site) const;
  std::span<const Coord> coords(std::uint32_t id) const {
    return {coords_.data() + static_cast<std::size_t>(id) * static_cast<std::size_t>(dimension_),
            static_cast<std::size_t>(dimension_)};
  }
  void clear();

 private:
  std::uint64_t hash(std::span<const Coord> site) const noexcept;
  void grow();

  int dimension_;
  std::size_t size_ = 0;
  std::vector<Coord> coords_;
  std::vector<std::uint64_t> hashes_;
  std::vector<std::uint32_t> slots_;  // id + 1, 0 = empty
};

// Sparse local-time field: site -> number of visits in a window of length n.
// Only sites with a positive count are stored. Immutable once built.
class LocalTimeField {
 public:
  explicit LocalTimeField(int dimension = 1);

  class Builder;

  // From explicit (site, count) pairs; counts must be positive and sites distinct.
  static LocalTimeField from_counts(int dimension,
                                    std::span<const std::pair<LatticePoint, std::uint64_t>> entries);

  int dimension() const noexcept { return index_.dimension(); }
  std::uint64_t window_length() const noexcept { return total_; }
  std::size_t site_count() const noexcept { return counts_.size(); }
  std::span<const std::uint64_t> counts() const noexcept { return counts_; }
  std::uint64_t max_count() const noexcept { return max_count_; }

  std::span<const Coord> site_coords(std::size_t i) const {
    return index_.coords(static_cast<std::uint32_t>(i));
  }
  LatticePoint site(std::size_t i) const;

  // 0 for unvisited sites.
  std::uint64_t count_at(std::span<const Coord> site) const;
  std::uint64_t count_at(const LatticePoint& site) const { return count_at(site.coords()); }

  // One row per site: x1,...,xd,count, in first-visit order, with a header line.
  void write_csv(std::ostream& out) const;

 private:
  SiteIndex index_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
  std::uint64_t max_count_ = 0;
};

class LocalTimeField::Builder {
 public:
  explicit Builder(int dimension);
  void add(std::span<const Coord> site, std::uint64_t visits = 1);
  LocalTimeField build() &&;

 private:
  friend class LocalTimeField;
  LocalTimeField field_;
};

// counts[z] = #{0 <= k < n : S(k) = z}.
LocalTimeField accumulate(const IncrementSequence& inc);

// Sum of c^q. Integer q uses exact integer arithmetic when it fits.
double power_sum(std::span<const std::uint64_t> counts, double q);

double q_norm(const LocalTimeField& field, double q);

// Exact sum of l(z)^q for integer q >= 1; CapacityError past 128 bits.
u128 q_norm_exact(const LocalTimeField& field, unsigned q);
u128 power_sum_exact(std::span<const std::uint64_t> counts, unsigned q);

// Sum over sites with l(z) <= M of l(z)^q.
double truncated_q_norm(const LocalTimeField& field, double q, double M);

struct LevelSet {
  double b_lo = 1.0;
  double b_hi = 2.0;
  std::vector<LatticePoint> sites;
  std::size_t size() const noexcept { return sites.size(); }
};

// Sites with b_lo <= l(z) < b_hi. Counts are compared to the real bounds
// without rounding (counts are exactly representable as doubles).
LevelSet level_set(const LocalTimeField& field, double b_lo, double b_hi);

struct CountPredicate {
  enum class Kind { Above, Below, Between };
  Kind kind = Kind::Above;
  double a = 0.0;  // Above: count > a;  Between: b <= count < a
  double b = 0.0;  // Below: count < b

  static CountPredicate above(double a) { return {Kind::Above, a, 0.0}; }
  static CountPredicate below(double b) { return {Kind::Below, 0.0, b}; }
  static CountPredicate between(double b, double a) { return {Kind::Between, a, b}; }

  bool operator()(std::uint64_t count) const noexcept {
    const auto c = static_cast<double>(count);
    switch (kind) {
      case Kind::Above: return c > a;
      case Kind::Below: return c < b;
      case Kind::Between: return b <= c && c < a;
    }
    return false;
  }
};

double restricted_q_norm(const LocalTimeField& field, double q, const CountPredicate& pred);

inline std::size_t range_size(const LocalTimeField& field) { return field.site_count(); }

// c^q for a visit count; exact for q in {1, 2} and counts below 2^26.
double count_power(std::uint64_t c, double q) noexcept;

// Clean integer value of q, or nullopt.
std::optional<unsigned> integer_exponent(double q) noexcept;

}  // namespace slt
