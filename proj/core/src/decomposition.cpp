#include "slt/decomposition.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "slt/errors.hpp"
#include "slt/site_counter.hpp"
#include "slt/stats.hpp"

namespace slt {

namespace {

void check_depth(std::int64_t n, int depth, const char* who) {
  detail::require(depth >= 0 && depth < 62, std::string(who) + ": depth must lie in [0, 61]");
  detail::require((std::int64_t{1} << depth) <= n, std::string(who) + ": need 2^depth <= n");
}

void split_into(TimeWindow w, int depth, std::vector<TimeWindow>& out) {
  if (depth == 0) {
    out.push_back(w);
    return;
  }
  const std::int64_t mid = w.begin + (w.length() + 1) / 2;
  split_into({w.begin, mid}, depth - 1, out);
  split_into({mid, w.end}, depth - 1, out);
}

u128 checked_mul(u128 a, u128 b) {
  if (a != 0 && b > ~u128{0} / a) throw CapacityError("sandwich: exact product overflow");
  return a * b;
}

u128 checked_add(u128 a, u128 b) {
  if (a > ~u128{0} - b) throw CapacityError("sandwich: exact sum overflow");
  return a + b;
}

u128 checked_pow(u128 base, unsigned e) {
  u128 r = 1;
  for (unsigned i = 0; i < e; ++i) r = checked_mul(r, base);
  return r;
}

// Site id of S(k) for k in [0, n).
std::vector<std::uint32_t> site_ids(const IncrementSequence& inc) {
  const std::size_t n = inc.size();
  std::vector<std::uint32_t> ids(n);
  try {
    WalkOccupancy occ(inc.dimension(), n);
    for (std::size_t k = 0; k < n; ++k) {
      ids[k] = occ.locate();
      occ.move(inc.code(k));
    }
    return ids;
  } catch (const CapacityError&) {
  }
  SiteIndex index(inc.dimension());
  std::vector<Coord> pos(static_cast<std::size_t>(inc.dimension()), 0);
  for (std::size_t k = 0; k < n; ++k) {
    ids[k] = index.insert(pos);
    pos[static_cast<std::size_t>(inc.axis(k))] += inc.sign(k);
  }
  return ids;
}

}  // namespace

std::vector<TimeWindow> split_windows(std::int64_t n, int depth) {
  check_depth(n, depth, "split_windows");
  std::vector<TimeWindow> out;
  out.reserve(std::size_t{1} << depth);
  split_into({0, n}, depth, out);
  return out;
}

DyadicSplit quasi_dyadic_split(std::int64_t n, int depth) {
  check_depth(n, depth, "quasi_dyadic_split");
  DyadicSplit s;
  s.depth = depth;
  for (const auto& w : split_windows(n, depth)) s.parts.push_back(w.length());
  return s;
}

LocalTimeField strand_field(const IncrementSequence& inc, std::int64_t begin, std::int64_t end,
                            std::int64_t ref) {
  const auto n = static_cast<std::int64_t>(inc.size());
  detail::require(0 <= begin && begin <= end && end <= n, "strand_field: window out of range");
  detail::require(0 <= ref && ref <= n, "strand_field: reference time out of range");
  const auto d = static_cast<std::size_t>(inc.dimension());
  std::vector<Coord> at_ref(d, 0);
  for (std::int64_t k = 0; k < ref; ++k) {
    at_ref[static_cast<std::size_t>(inc.axis(static_cast<std::size_t>(k)))] +=
        inc.sign(static_cast<std::size_t>(k));
  }
  LocalTimeField::Builder b(inc.dimension());
  std::vector<Coord> pos(d, 0);
  std::vector<Coord> rel(d, 0);
  for (std::int64_t k = 0; k < end; ++k) {
    if (k >= begin) {
      for (std::size_t j = 0; j < d; ++j) rel[j] = at_ref[j] - pos[j];
      b.add(rel);
    }
    pos[static_cast<std::size_t>(inc.axis(static_cast<std::size_t>(k)))] +=
        inc.sign(static_cast<std::size_t>(k));
  }
  return std::move(b).build();
}

std::pair<LocalTimeField, LocalTimeField> split_strands(const IncrementSequence& inc,
                                                        std::int64_t n1) {
  const auto n = static_cast<std::int64_t>(inc.size());
  detail::require(0 < n1 && n1 < n, "split_strands: need 0 < n1 < n");
  return {strand_field(inc, 0, n1, n1), strand_field(inc, n1, n, n1)};
}

StrandTree build_strand_tree(const IncrementSequence& inc, int depth) {
  const auto n = static_cast<std::int64_t>(inc.size());
  check_depth(n, depth, "build_strand_tree");
  StrandTree tree;
  tree.split = quasi_dyadic_split(n, depth);
  for (int j = 0; j <= depth; ++j) {
    tree.windows.push_back(split_windows(n, j));
    std::vector<LocalTimeField> level;
    if (j == 0) {
      level.push_back(accumulate(inc));
    } else {
      const auto& w = tree.windows.back();
      for (std::size_t k = 0; k < w.size(); k += 2) {
        const std::int64_t ref = w[k].end;
        level.push_back(strand_field(inc, w[k].begin, w[k].end, ref));
        level.push_back(strand_field(inc, w[k + 1].begin, w[k + 1].end, ref));
      }
    }
    tree.strands.push_back(std::move(level));
  }
  return tree;
}

double intersection_term(const LocalTimeField& a, const LocalTimeField& b, const Subdivision& sub,
                         double q) {
  detail::require(q >= 1.0, "intersection_term: q must be >= 1");
  detail::require(a.dimension() == b.dimension(), "intersection_term: dimension mismatch");
  stats::CompensatedSum sum;
  const auto ca = a.counts();
  for (std::size_t i = 0; i < ca.size(); ++i) {
    const std::uint64_t cb = b.count_at(a.site_coords(i));
    if (cb == 0) continue;
    const auto mx = static_cast<double>(std::max(ca[i], cb));
    const auto br = sub.bracket(mx);
    detail::require(br.has_value(), "intersection_term: subdivision does not cover the max count");
    sum.add(std::pow(sub.levels()[*br + 1], q - 2.0) * static_cast<double>(ca[i]) *
            static_cast<double>(cb));
  }
  return std::exp2(q) * sum.value();
}

double one_sided_intersection_bound(const LocalTimeField& a, const LocalTimeField& b,
                                    const Subdivision& sub, double q) {
  detail::require(q >= 1.0, "one_sided_intersection_bound: q must be >= 1");
  stats::CompensatedSum sum;
  const auto ca = a.counts();
  for (std::size_t i = 0; i < ca.size(); ++i) {
    const std::uint64_t cb = b.count_at(a.site_coords(i));
    if (cb == 0) continue;
    const auto ba = sub.bracket(static_cast<double>(ca[i]));
    const auto bb = sub.bracket(static_cast<double>(cb));
    detail::require(ba && bb, "one_sided_intersection_bound: subdivision does not cover the counts");
    sum.add(std::pow(sub.levels()[*ba + 1], q - 1.0) * static_cast<double>(cb));
    sum.add(std::pow(sub.levels()[*bb + 1], q - 1.0) * static_cast<double>(ca[i]));
  }
  return std::exp2(q) * sum.value();
}

StrandProfile::StrandProfile(const IncrementSequence& inc, int max_depth)
    : n_(static_cast<std::int64_t>(inc.size())), max_depth_(max_depth) {
  check_depth(n_, max_depth, "StrandProfile");
  const auto ids = site_ids(inc);
  const std::size_t sites = ids.empty() ? 0 : *std::max_element(ids.begin(), ids.end()) + 1;
  std::vector<std::uint64_t> left(sites, 0);
  std::vector<std::uint64_t> right(sites, 0);
  std::vector<std::uint32_t> touched;

  window_counts_.resize(static_cast<std::size_t>(max_depth) + 1);
  shared_.resize(static_cast<std::size_t>(max_depth) + 1);
  for (int j = 0; j <= max_depth; ++j) {
    auto& counts = window_counts_[static_cast<std::size_t>(j)];
    for (const auto& w : split_windows(n_, j)) {
      touched.clear();
      for (auto k = w.begin; k < w.end; ++k) {
        const auto id = ids[static_cast<std::size_t>(k)];
        if (left[id]++ == 0) touched.push_back(id);
      }
      for (const auto id : touched) {
        counts.push_back(left[id]);
        left[id] = 0;
      }
    }
    if (j == 0) continue;
    auto& shared = shared_[static_cast<std::size_t>(j)];
    const auto w = split_windows(n_, j);
    for (std::size_t k = 0; k < w.size(); k += 2) {
      touched.clear();
      for (auto t = w[k].begin; t < w[k].end; ++t) {
        const auto id = ids[static_cast<std::size_t>(t)];
        if (left[id]++ == 0) touched.push_back(id);
      }
      for (auto t = w[k + 1].begin; t < w[k + 1].end; ++t) ++right[ids[static_cast<std::size_t>(t)]];
      for (const auto id : touched) {
        if (right[id] > 0) shared.emplace_back(left[id], right[id]);
      }
      for (const auto id : touched) left[id] = 0;
      for (auto t = w[k + 1].begin; t < w[k + 1].end; ++t) right[ids[static_cast<std::size_t>(t)]] = 0;
    }
  }
}

SandwichReport StrandProfile::report(int depth, double q, const Subdivision& sub,
                                     std::optional<double> truncation) const {
  detail::require(depth >= 0 && depth <= max_depth_, "sandwich: depth exceeds the profile depth");
  detail::require(q >= 1.0, "sandwich: q must be >= 1");
  if (truncation) detail::require(*truncation > 0.0, "sandwich: M must be positive");
  const double top = truncation ? std::min(*truncation, static_cast<double>(n_))
                                : static_cast<double>(n_);
  detail::require(sub.covers(1.0, top), "sandwich: subdivision must cover [1, top value]");

  SandwichReport r;
  r.q = q;
  r.depth = depth;
  r.truncated = truncation.has_value();
  r.truncation = truncation.value_or(0.0);
  r.terms.assign(static_cast<std::size_t>(depth), 0.0);
  r.one_sided_terms.assign(static_cast<std::size_t>(depth), 0.0);
  const auto keep = [&](std::uint64_t c) {
    return !truncation || static_cast<double>(c) <= *truncation;
  };
  const auto& lv = sub.levels();

  const auto iq = integer_exponent(q);
  if (iq && *iq >= 2 && sub.integral()) {
    try {
      const unsigned e = *iq;
      const u128 two_q = u128{1} << e;
      const auto norm = [&](const std::vector<std::uint64_t>& counts) {
        u128 s = 0;
        for (const auto c : counts) {
          if (keep(c)) s = checked_add(s, checked_pow(c, e));
        }
        return s;
      };
      const u128 value = norm(window_counts_[0]);
      const u128 lower = norm(window_counts_[static_cast<std::size_t>(depth)]);
      u128 upper = lower;
      bool dominated = true;
      std::vector<u128> terms(static_cast<std::size_t>(depth), 0);
      for (int j = 1; j <= depth; ++j) {
        u128 term = 0;
        u128 one = 0;
        for (const auto& [a, b] : shared_[static_cast<std::size_t>(j)]) {
          const auto br = sub.bracket(static_cast<double>(std::max(a, b)));
          if (!br) continue;
          const auto hi = static_cast<u128>(lv[*br + 1]);
          term = checked_add(term, checked_mul(checked_mul(checked_pow(hi, e - 2), a), b));
          const auto ba = sub.bracket(static_cast<double>(a));
          const auto bb = sub.bracket(static_cast<double>(b));
          one = checked_add(one, checked_mul(checked_pow(static_cast<u128>(lv[*ba + 1]), e - 1), b));
          one = checked_add(one, checked_mul(checked_pow(static_cast<u128>(lv[*bb + 1]), e - 1), a));
        }
        term = checked_mul(term, two_q);
        one = checked_mul(one, two_q);
        dominated = dominated && term <= one;
        upper = checked_add(upper, term);
        r.terms[static_cast<std::size_t>(j - 1)] = static_cast<double>(term);
        r.one_sided_terms[static_cast<std::size_t>(j - 1)] = static_cast<double>(one);
      }
      r.exact = true;
      r.value = static_cast<double>(value);
      r.lower = static_cast<double>(lower);
      r.upper = static_cast<double>(upper);
      r.lower_holds = lower <= value;
      r.upper_holds = value <= upper;
      r.terms_dominated = dominated;
      return r;
    } catch (const CapacityError&) {
      // floating evaluation below
    }
  }

  constexpr double kRelTol = 1e-9;
  const auto norm = [&](const std::vector<std::uint64_t>& counts) {
    stats::CompensatedSum s;
    for (const auto c : counts) {
      if (keep(c)) s.add(count_power(c, q));
    }
    return s.value();
  };
  r.value = norm(window_counts_[0]);
  r.lower = norm(window_counts_[static_cast<std::size_t>(depth)]);
  const double two_q = std::exp2(q);
  stats::CompensatedSum upper;
  upper.add(r.lower);
  for (int j = 1; j <= depth; ++j) {
    stats::CompensatedSum term;
    stats::CompensatedSum one;
    for (const auto& [a, b] : shared_[static_cast<std::size_t>(j)]) {
      const auto br = sub.bracket(static_cast<double>(std::max(a, b)));
      if (!br) continue;
      const auto ad = static_cast<double>(a);
      const auto bd = static_cast<double>(b);
      term.add(std::pow(lv[*br + 1], q - 2.0) * ad * bd);
      const auto ba = sub.bracket(ad);
      const auto bb = sub.bracket(bd);
      one.add(std::pow(lv[*ba + 1], q - 1.0) * bd);
      one.add(std::pow(lv[*bb + 1], q - 1.0) * ad);
    }
    const double t = two_q * term.value();
    const double o = two_q * one.value();
    r.terms[static_cast<std::size_t>(j - 1)] = t;
    r.one_sided_terms[static_cast<std::size_t>(j - 1)] = o;
    r.terms_dominated = r.terms_dominated && t <= o * (1.0 + kRelTol);
    upper.add(t);
  }
  r.upper = upper.value();
  r.lower_holds = r.lower <= r.value * (1.0 + kRelTol);
  r.upper_holds = r.value <= r.upper * (1.0 + kRelTol);
  return r;
}

std::string to_json(const SandwichReport& r) {
  nlohmann::ordered_json j;
  j["q"] = r.q;
  j["L"] = r.depth;
  j["lower"] = r.lower;
  j["value"] = r.value;
  j["terms"] = r.terms;
  j["one_sided_terms"] = r.one_sided_terms;
  j["upper"] = r.upper;
  j["exact"] = r.exact;
  j["truncated"] = r.truncated;
  if (r.truncated) j["M"] = r.truncation;
  j["holds"] = r.holds();
  j["seed"] = r.seed;
  return j.dump();
}

namespace {

SandwichReport checked_report(const IncrementSequence& inc, int depth, double q,
                              const Subdivision& sub, std::optional<double> M,
                              std::uint64_t seed) {
  const StrandProfile profile(inc, depth);
  SandwichReport r = profile.report(depth, q, sub, M);
  r.seed = seed;
  if (!r.holds()) {
    throw VerificationError("sandwich violated (seed " + std::to_string(seed) + "): " +
                            to_json(r));
  }
  return r;
}

}  // namespace

SandwichReport verify_sandwich(const IncrementSequence& inc, int depth, double q,
                               const Subdivision& sub, std::uint64_t seed) {
  return checked_report(inc, depth, q, sub, std::nullopt, seed);
}

SandwichReport verify_truncated_sandwich(const IncrementSequence& inc, int depth, double q,
                                         double M, const Subdivision& sub, std::uint64_t seed) {
  return checked_report(inc, depth, q, sub, M, seed);
}

bool elementary_inequality_check(std::uint64_t l1, std::uint64_t l2, double q,
                                 const Subdivision& sub) {
  detail::require(q >= 1.0, "elementary_inequality_check: q must be >= 1");
  const std::uint64_t mx = std::max(l1, l2);
  std::optional<std::size_t> br;
  if (l1 > 0 && l2 > 0) {
    br = sub.bracket(static_cast<double>(mx));
    detail::require(br.has_value() && sub.front() <= 1.0,
                    "elementary_inequality_check: subdivision must cover [1, max(l1, l2)]");
  }
  const auto iq = integer_exponent(q);
  if (iq && *iq >= 2 && sub.integral()) {
    try {
      const unsigned e = *iq;
      const u128 sum = checked_add(checked_pow(l1, e), checked_pow(l2, e));
      const u128 mid = checked_pow(static_cast<u128>(l1) + l2, e);
      u128 extra = 0;
      if (br) {
        const auto hi = static_cast<u128>(sub.levels()[*br + 1]);
        extra = checked_mul(checked_mul(checked_mul(checked_pow(hi, e - 2), l1), l2), u128{1} << e);
      }
      return sum <= mid && mid <= checked_add(sum, extra);
    } catch (const CapacityError&) {
    }
  }
  constexpr double kRelTol = 1e-12;
  const double sum = count_power(l1, q) + count_power(l2, q);
  const double mid = count_power(l1 + l2, q);
  double extra = 0.0;
  if (br) {
    extra = std::exp2(q) * std::pow(sub.levels()[*br + 1], q - 2.0) * static_cast<double>(l1) *
            static_cast<double>(l2);
  }
  return sum <= mid * (1.0 + kRelTol) && mid <= (sum + extra) * (1.0 + kRelTol);
}

}  // namespace slt
