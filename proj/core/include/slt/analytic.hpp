#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "slt/rng.hpp"

namespace slt {

// Exact rational with positive denominator, kept in lowest terms.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d);

  double to_double() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  Rational reciprocal() const { return {den, num}; }

  friend bool operator==(const Rational&, const Rational&) = default;
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    return static_cast<i128>(a.num) * b.den <=> static_cast<i128>(b.num) * a.den;
  }
  friend Rational operator-(const Rational& a, const Rational& b);
};

// q_c(d) = d / (d - 2).
Rational critical_q(int d);

// Solves 1/q = 1 - 2/d for q.
Rational crossover(int d);

// sqrt(n) for d = 3, ln(n) for d = 4, 1 for d >= 5.
double psi(int d, std::int64_t n);

// ((1 - 2^{1-q}) / 16)^{1/(q-1)}.
double alpha0(double q);

enum class SubdivisionKind { Dyadic, UniformGamma, Mixed, Custom };

std::string to_string(SubdivisionKind kind);

// Strictly increasing positive levels b_0 < b_1 < ... . A value v falls in
// bracket i when b_i <= v < b_{i+1}.
class Subdivision {
 public:
  Subdivision() = default;

  static Subdivision from_levels(std::vector<double> levels);
  // 1, 2, 4, ..., ending with the first power of two above `top`.
  static Subdivision dyadic(double top);

  const std::vector<double>& levels() const noexcept { return levels_; }
  std::size_t size() const noexcept { return levels_.size(); }
  double front() const { return levels_.front(); }
  double back() const { return levels_.back(); }

  std::optional<std::size_t> bracket(double v) const;

  // b_first <= lo and hi < b_last.
  bool covers(double lo, double hi) const noexcept;
  bool integral() const noexcept;

  // Appends doubled levels until the last level exceeds `top`.
  Subdivision extended_to(double top) const;

  SubdivisionKind kind = SubdivisionKind::Custom;
  double q = 0.0;
  double xi = 0.0;
  std::int64_t n = 0;
  int d = 0;
  double alpha0 = 0.0;
  int j0 = 0;         // number of levels below index 0
  int top_index = 0;  // M_n

 private:
  std::vector<double> levels_;
};

// Ladder b_i = xi^gamma alpha0 2^i, i = -j0..M_n (UniformGamma, gamma = 1/(q-1)),
// or the two-regime ladder with xi^{1/(q-1)} below index 0 and xi^{1/q}
// from index 0 up (Mixed). M_n is the smallest i with alpha0 2^i >= n^{(d-2)/d};
// j0 the smallest j >= 0 with b_{-j} <= 1. With `dyadic_snap`, alpha0 is
// lowered so that alpha0 xi^gamma is a power of two.
Subdivision build_subdivision(SubdivisionKind kind, double q, double xi, std::int64_t n, int d,
                              bool dyadic_snap = false);

// E[X^q] for P(X = k) = rho^{k-1}(1 - rho), k >= 1.
double geometric_moment(double rho, double q, double tol = 1e-12);

// (1 - rho) E[l_inf(0)^q].
double kappa_predict(double q, int d, double rho);

enum class Strategy { A, B };

struct StrategyCost {
  Strategy strategy = Strategy::A;
  double n_exponent = 0.0;
  double xi_exponent = 0.0;
  std::string description;
};

std::pair<StrategyCost, StrategyCost> strategy_costs(double q, int d);

// Strategy with the smaller n-exponent; nullopt when q is the double
// nearest to q_c(d).
std::optional<Strategy> dominant_strategy(double q, int d);

}  // namespace slt
