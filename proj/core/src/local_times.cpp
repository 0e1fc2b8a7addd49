#include "slt/local_times.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <ostream>
#include <string>

#include "slt/errors.hpp"
#include "slt/stats.hpp"

namespace slt {

SiteIndex::SiteIndex(int dimension) : dimension_(dimension) {
  detail::require(dimension >= 1, "SiteIndex: dimension must be >= 1");
  slots_.assign(64, 0);
}

std::uint64_t SiteIndex::hash(std::span<const Coord> site) const noexcept {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (const Coord c : site) h = mix64(h ^ static_cast<std::uint64_t>(c));
  return h;
}

std::uint32_t SiteIndex::insert(std::span<const Coord> site) {
  const std::uint64_t h = hash(site);
  const std::uint64_t mask = slots_.size() - 1;
  std::uint64_t pos = h & mask;
  while (const std::uint32_t e = slots_[pos]) {
    if (hashes_[e - 1] == h && std::ranges::equal(coords(e - 1), site)) return e - 1;
    pos = (pos + 1) & mask;
  }
  const auto id = static_cast<std::uint32_t>(size_);
  slots_[pos] = id + 1;
  coords_.insert(coords_.end(), site.begin(), site.end());
  hashes_.push_back(h);
  ++size_;
  if (2 * size_ > slots_.size()) grow();
  return id;
}

std::optional<std::uint32_t> SiteIndex::find(std::span<const Coord> site) const {
  if (site.size() != static_cast<std::size_t>(dimension_)) return std::nullopt;
  const std::uint64_t h = hash(site);
  const std::uint64_t mask = slots_.size() - 1;
  std::uint64_t pos = h & mask;
  while (const std::uint32_t e = slots_[pos]) {
    if (hashes_[e - 1] == h && std::ranges::equal(coords(e - 1), site)) return e - 1;
    pos = (pos + 1) & mask;
  }
  return std::nullopt;
}

void SiteIndex::grow() {
  slots_.assign(slots_.size() * 2, 0);
  const std::uint64_t mask = slots_.size() - 1;
  for (std::size_t id = 0; id < size_; ++id) {
    std::uint64_t pos = hashes_[id] & mask;
    while (slots_[pos] != 0) pos = (pos + 1) & mask;
    slots_[pos] = static_cast<std::uint32_t>(id + 1);
  }
}

void SiteIndex::clear() {
  std::fill(slots_.begin(), slots_.end(), 0);
  coords_.clear();
  hashes_.clear();
  size_ = 0;
}

LocalTimeField::LocalTimeField(int dimension) : index_(dimension) {}

LocalTimeField::Builder::Builder(int dimension) : field_(dimension) {}

void LocalTimeField::Builder::add(std::span<const Coord> site, std::uint64_t visits) {
  detail::require(site.size() == static_cast<std::size_t>(field_.dimension()),
                  "LocalTimeField: site dimension mismatch");
  if (visits == 0) return;
  const auto id = field_.index_.insert(site);
  if (id == field_.counts_.size()) field_.counts_.push_back(0);
  field_.counts_[id] += visits;
  field_.total_ += visits;
  field_.max_count_ = std::max(field_.max_count_, field_.counts_[id]);
}

LocalTimeField LocalTimeField::Builder::build() && { return std::move(field_); }

LocalTimeField LocalTimeField::from_counts(
    int dimension, std::span<const std::pair<LatticePoint, std::uint64_t>> entries) {
  Builder b(dimension);
  for (const auto& [site, count] : entries) {
    detail::require(count >= 1, "LocalTimeField: stored counts must be positive");
    detail::require(b.field_.count_at(site.coords()) == 0, "LocalTimeField: duplicate site");
    b.add(site.coords(), count);
  }
  return std::move(b).build();
}

LatticePoint LocalTimeField::site(std::size_t i) const {
  const auto c = site_coords(i);
  return LatticePoint(std::vector<Coord>(c.begin(), c.end()));
}

std::uint64_t LocalTimeField::count_at(std::span<const Coord> site) const {
  const auto id = index_.find(site);
  return id ? counts_[*id] : 0;
}

void LocalTimeField::write_csv(std::ostream& out) const {
  for (int j = 1; j <= dimension(); ++j) out << 'x' << j << ',';
  out << "count\n";
  for (std::size_t i = 0; i < site_count(); ++i) {
    for (const Coord c : site_coords(i)) out << c << ',';
    out << counts_[i] << '\n';
  }
}

LocalTimeField accumulate(const IncrementSequence& inc) {
  LocalTimeField::Builder b(inc.dimension());
  std::vector<Coord> pos(static_cast<std::size_t>(inc.dimension()), 0);
  for (std::size_t k = 0; k < inc.size(); ++k) {
    b.add(pos);
    pos[static_cast<std::size_t>(inc.axis(k))] += inc.sign(k);
  }
  return std::move(b).build();
}

std::optional<unsigned> integer_exponent(double q) noexcept {
  if (q >= 1.0 && q <= 64.0 && q == std::floor(q)) return static_cast<unsigned>(q);
  return std::nullopt;
}

double count_power(std::uint64_t c, double q) noexcept {
  const auto x = static_cast<double>(c);
  if (q == 1.0) return x;
  if (q == 2.0) return x * x;
  if (q == 3.0) return x * x * x;
  return std::pow(x, q);
}

namespace {

bool checked_pow(std::uint64_t c, unsigned q, u128& out) {
  u128 r = 1;
  const u128 limit = ~u128{0};
  for (unsigned i = 0; i < q; ++i) {
    if (c != 0 && r > limit / c) return false;
    r *= c;
  }
  out = r;
  return true;
}

}  // namespace

u128 power_sum_exact(std::span<const std::uint64_t> counts, unsigned q) {
  detail::require(q >= 1, "q_norm_exact: q must be >= 1");
  u128 sum = 0;
  for (const auto c : counts) {
    u128 p;
    if (!checked_pow(c, q, p) || sum > ~u128{0} - p) {
      throw CapacityError("q_norm_exact: sum of l^" + std::to_string(q) +
                          " exceeds 128-bit range");
    }
    sum += p;
  }
  return sum;
}

double power_sum(std::span<const std::uint64_t> counts, double q) {
  if (const auto iq = integer_exponent(q)) {
    try {
      return static_cast<double>(power_sum_exact(counts, *iq));
    } catch (const CapacityError&) {
      // fall through to floating
    }
  }
  stats::CompensatedSum s;
  for (const auto c : counts) s.add(count_power(c, q));
  return s.value();
}

double q_norm(const LocalTimeField& field, double q) {
  detail::require(q >= 1.0, "q_norm: q must be >= 1");
  return power_sum(field.counts(), q);
}

u128 q_norm_exact(const LocalTimeField& field, unsigned q) {
  return power_sum_exact(field.counts(), q);
}

double restricted_q_norm(const LocalTimeField& field, double q, const CountPredicate& pred) {
  detail::require(q >= 1.0, "restricted_q_norm: q must be >= 1");
  std::vector<std::uint64_t> kept;
  for (const auto c : field.counts()) {
    if (pred(c)) kept.push_back(c);
  }
  return power_sum(kept, q);
}

double truncated_q_norm(const LocalTimeField& field, double q, double M) {
  detail::require(q >= 1.0, "truncated_q_norm: q must be >= 1");
  detail::require(M > 0.0, "truncated_q_norm: M must be positive");
  std::vector<std::uint64_t> kept;
  for (const auto c : field.counts()) {
    if (static_cast<double>(c) <= M) kept.push_back(c);
  }
  return power_sum(kept, q);
}

LevelSet level_set(const LocalTimeField& field, double b_lo, double b_hi) {
  detail::require(b_lo >= 1.0 && b_lo < b_hi, "level_set: need 1 <= b_lo < b_hi");
  LevelSet out;
  out.b_lo = b_lo;
  out.b_hi = b_hi;
  const auto counts = field.counts();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto c = static_cast<double>(counts[i]);
    if (b_lo <= c && c < b_hi) out.sites.push_back(field.site(i));
  }
  return out;
}

}  // namespace slt
