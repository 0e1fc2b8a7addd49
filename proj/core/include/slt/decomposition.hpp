#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "slt/analytic.hpp"
#include "slt/lattice_walk.hpp"
#include "slt/local_times.hpp"

namespace slt {

struct DyadicSplit {
  int depth = 0;
  std::vector<std::int64_t> parts;
};

// m -> (ceil(m/2), floor(m/2)) applied `depth` times. Requires 2^depth <= n.
DyadicSplit quasi_dyadic_split(std::int64_t n, int depth);

struct TimeWindow {
  std::int64_t begin = 0;
  std::int64_t end = 0;
  std::int64_t length() const noexcept { return end - begin; }
};

// The 2^depth windows of [0, n), in time order, cut ceil-first.
std::vector<TimeWindow> split_windows(std::int64_t n, int depth);

// Counts of S(ref) - S(k) over k in [begin, end).
LocalTimeField strand_field(const IncrementSequence& inc, std::int64_t begin, std::int64_t end,
                            std::int64_t ref);

// (strand over [0, n1), strand over [n1, n)), both in the frame centred at S(n1).
std::pair<LocalTimeField, LocalTimeField> split_strands(const IncrementSequence& inc,
                                                        std::int64_t n1);

// Depth j holds 2^j strands. A strand's frame is centred at the split point
// of its parent window (the root strand uses the plain walk frame).
struct StrandTree {
  DyadicSplit split;
  std::vector<std::vector<TimeWindow>> windows;
  std::vector<std::vector<LocalTimeField>> strands;
};

StrandTree build_strand_tree(const IncrementSequence& inc, int depth);

// 2^q sum_z b_{i+1}^{q-2} 1{b_i <= max(a,b) < b_{i+1}} a(z) b(z).
// `a` and `b` must share a frame.
double intersection_term(const LocalTimeField& a, const LocalTimeField& b, const Subdivision& sub,
                         double q);

// 2^q sum_z [ b_{i(a)+1}^{q-1} b(z) + b_{i(b)+1}^{q-1} a(z) ]; dominates intersection_term.
double one_sided_intersection_bound(const LocalTimeField& a, const LocalTimeField& b,
                                    const Subdivision& sub, double q);

struct SandwichReport {
  double q = 0.0;
  int depth = 0;
  double lower = 0.0;
  double value = 0.0;
  double upper = 0.0;
  std::vector<double> terms;            // I~_1 .. I~_L
  std::vector<double> one_sided_terms;  // matching one-sided bounds
  bool exact = false;
  bool truncated = false;
  double truncation = 0.0;  // M, when truncated
  std::uint64_t seed = 0;

  bool lower_holds = true;
  bool upper_holds = true;
  bool terms_dominated = true;

  // Lower bound is part of the claim only without truncation.
  bool holds() const noexcept {
    return upper_holds && terms_dominated && (truncated || lower_holds);
  }
};

std::string to_json(const SandwichReport& report);

// Site-id arrays of one path, reused across depths, exponents and ladders.
class StrandProfile {
 public:
  StrandProfile(const IncrementSequence& inc, int max_depth);

  int max_depth() const noexcept { return max_depth_; }
  std::int64_t length() const noexcept { return n_; }

  // Counts of every window at `depth`, concatenated.
  const std::vector<std::uint64_t>& window_counts(int depth) const { return window_counts_[depth]; }
  // (left, right) counts of sites shared by sibling windows at `depth` >= 1.
  const std::vector<std::pair<std::uint64_t, std::uint64_t>>& shared_counts(int depth) const {
    return shared_[depth];
  }

  // Sandwich at depth L; `truncation` switches to the truncated variant.
  SandwichReport report(int depth, double q, const Subdivision& sub,
                        std::optional<double> truncation = std::nullopt) const;

 private:
  std::int64_t n_;
  int max_depth_;
  std::vector<std::vector<std::uint64_t>> window_counts_;
  std::vector<std::vector<std::pair<std::uint64_t, std::uint64_t>>> shared_;
};

// Builds the strand profile and checks lower <= value <= upper plus
// I~_j <= one-sided bound. Throws VerificationError naming `seed` on failure.
SandwichReport verify_sandwich(const IncrementSequence& inc, int depth, double q,
                               const Subdivision& sub, std::uint64_t seed = 0);

// Same with l^q replaced by Theta_M(l)^q. Only the upper bound is asserted.
SandwichReport verify_truncated_sandwich(const IncrementSequence& inc, int depth, double q,
                                         double M, const Subdivision& sub,
                                         std::uint64_t seed = 0);

// l1^q + l2^q <= (l1+l2)^q <= l1^q + l2^q + 2^q sum_i b_{i+1}^{q-2} 1{b_i <= max < b_{i+1}} l1 l2.
bool elementary_inequality_check(std::uint64_t l1, std::uint64_t l2, double q,
                                 const Subdivision& sub);

}  // namespace slt
