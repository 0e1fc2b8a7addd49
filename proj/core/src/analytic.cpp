#include "slt/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slt/errors.hpp"
#include "slt/stats.hpp"

namespace slt {

Rational::Rational(std::int64_t n, std::int64_t d) {
  detail::require(d != 0, "Rational: zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  const std::int64_t g = std::gcd(n, d);
  num = g ? n / g : 0;
  den = g ? d / g : 1;
}

Rational operator-(const Rational& a, const Rational& b) {
  return {a.num * b.den - b.num * a.den, a.den * b.den};
}

Rational critical_q(int d) {
  detail::require(d >= 3, "critical_q: d must be >= 3");
  return {d, d - 2};
}

Rational crossover(int d) {
  detail::require(d >= 3, "crossover: d must be >= 3");
  const Rational b_rate = Rational(1, 1) - Rational(2, d);
  return b_rate.reciprocal();
}

double psi(int d, std::int64_t n) {
  detail::require(d >= 3, "psi: d must be >= 3");
  detail::require(n >= 2, "psi: n must be >= 2");
  if (d == 3) return std::sqrt(static_cast<double>(n));
  if (d == 4) return std::log(static_cast<double>(n));
  return 1.0;
}

double alpha0(double q) {
  detail::require(q > 1.0, "alpha0: q must be > 1");
  return std::pow((1.0 - std::exp2(1.0 - q)) / 16.0, 1.0 / (q - 1.0));
}

std::string to_string(SubdivisionKind kind) {
  switch (kind) {
    case SubdivisionKind::Dyadic: return "dyadic";
    case SubdivisionKind::UniformGamma: return "uniform";
    case SubdivisionKind::Mixed: return "mixed";
    case SubdivisionKind::Custom: return "custom";
  }
  return "custom";
}

Subdivision Subdivision::from_levels(std::vector<double> levels) {
  detail::require(!levels.empty(), "Subdivision: no levels");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    detail::require(std::isfinite(levels[i]) && levels[i] > 0.0,
                    "Subdivision: levels must be positive and finite");
    detail::require(i == 0 || levels[i - 1] < levels[i],
                    "Subdivision: levels must be strictly increasing");
  }
  Subdivision s;
  s.levels_ = std::move(levels);
  return s;
}

Subdivision Subdivision::dyadic(double top) {
  std::vector<double> lv{1.0};
  while (lv.back() <= top) lv.push_back(2.0 * lv.back());
  if (lv.size() < 2) lv.push_back(2.0);
  auto s = from_levels(std::move(lv));
  s.kind = SubdivisionKind::Dyadic;
  return s;
}

std::optional<std::size_t> Subdivision::bracket(double v) const {
  const auto it = std::upper_bound(levels_.begin(), levels_.end(), v);
  if (it == levels_.begin() || it == levels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - levels_.begin()) - 1;
}

bool Subdivision::covers(double lo, double hi) const noexcept {
  return levels_.size() >= 2 && levels_.front() <= lo && hi < levels_.back();
}

bool Subdivision::integral() const noexcept {
  return std::all_of(levels_.begin(), levels_.end(), [](double b) {
    return b == std::floor(b) && b < 0x1.0p63;
  });
}

Subdivision Subdivision::extended_to(double top) const {
  Subdivision s = *this;
  while (s.levels_.back() <= top) s.levels_.push_back(2.0 * s.levels_.back());
  return s;
}

Subdivision build_subdivision(SubdivisionKind kind, double q, double xi, std::int64_t n, int d,
                              bool dyadic_snap) {
  detail::require(q > 1.0, "build_subdivision: q must be > 1");
  detail::require(xi > 0.0 && std::isfinite(xi), "build_subdivision: xi must be positive");
  detail::require(n >= 1, "build_subdivision: n must be >= 1");
  detail::require(d >= 3, "build_subdivision: d must be >= 3");
  detail::require(kind == SubdivisionKind::UniformGamma || kind == SubdivisionKind::Mixed,
                  "build_subdivision: kind must be uniform or mixed");

  const double gamma = 1.0 / (q - 1.0);
  double a0 = alpha0(q);
  if (dyadic_snap) {
    const double scale = std::pow(xi, gamma);
    a0 = std::exp2(std::floor(std::log2(a0 * scale))) / scale;
  }
  const double target = std::pow(static_cast<double>(n), static_cast<double>(d - 2) / d);
  int top = 0;
  while (a0 * std::exp2(top) < target) ++top;

  // Scale of the regime holding index >= 0 and of the one below 0.
  const double upper_scale = kind == SubdivisionKind::Mixed ? std::pow(xi, 1.0 / q) : std::pow(xi, gamma);
  const double lower_scale =
      kind == SubdivisionKind::Mixed && xi >= 1.0 ? std::pow(xi, gamma) : upper_scale;

  if (upper_scale * a0 * std::exp2(top) < 1.0) {
    throw PreconditionError("build_subdivision: empty ladder, every level lies below 1");
  }

  std::vector<double> upper;
  for (int i = 0; i <= top; ++i) upper.push_back(upper_scale * a0 * std::exp2(i));

  std::vector<double> lower;  // descending
  const double b0 = upper.front();
  if (b0 > 1.0) {
    for (int i = -1; i > -4096; --i) {
      const double b = lower_scale * a0 * std::exp2(i);
      if (b >= b0) continue;
      lower.push_back(b);
      if (b <= 1.0) break;
    }
  }
  std::reverse(lower.begin(), lower.end());

  std::vector<double> levels = lower;
  levels.insert(levels.end(), upper.begin(), upper.end());
  Subdivision s = Subdivision::from_levels(std::move(levels));
  s.kind = kind;
  s.q = q;
  s.xi = xi;
  s.n = n;
  s.d = d;
  s.alpha0 = a0;
  s.j0 = static_cast<int>(lower.size());
  s.top_index = top;
  return s;
}

double geometric_moment(double rho, double q, double tol) {
  detail::require(rho >= 0.0 && rho < 1.0, "geometric_moment: rho must lie in [0, 1)");
  detail::require(q >= 1.0, "geometric_moment: q must be >= 1");
  detail::require(tol > 0.0, "geometric_moment: tol must be positive");
  if (rho == 0.0) return 1.0;
  stats::CompensatedSum sum;
  double weight = 1.0 - rho;  // rho^{k-1}(1-rho)
  for (std::int64_t k = 1;; ++k) {
    const auto kd = static_cast<double>(k);
    const double term = std::pow(kd, q) * weight;
    sum.add(term);
    weight *= rho;
    const double next = std::pow(kd + 1.0, q) * weight;
    const double ratio = std::pow((kd + 2.0) / (kd + 1.0), q) * rho;
    if (ratio < 1.0 && next / (1.0 - ratio) < tol) break;
    if (weight == 0.0) break;
  }
  return sum.value();
}

double kappa_predict(double q, int d, double rho) {
  detail::require(d >= 3, "kappa_predict: d must be >= 3");
  return (1.0 - rho) * geometric_moment(rho, q);
}

std::pair<StrategyCost, StrategyCost> strategy_costs(double q, int d) {
  detail::require(d >= 3, "strategy_costs: d must be >= 3");
  detail::require(q > 1.0, "strategy_costs: q must be > 1");
  StrategyCost a{Strategy::A, 1.0 / q, 1.0 / q,
                 "pile-up: (xi n)^{1/q} visits on a bounded set of sites"};
  StrategyCost b{Strategy::B, 1.0 - 2.0 / d, 2.0 / (d * (q - 1.0)),
                 "confinement: the whole time n spent in a small ball"};
  return {a, b};
}

std::optional<Strategy> dominant_strategy(double q, int d) {
  detail::require(d >= 3, "dominant_strategy: d must be >= 3");
  detail::require(q > 1.0, "dominant_strategy: q must be > 1");
  // d / (d - 2) rounds to the double nearest q_c; any other double lies on
  // the same side of q_c as it does of this value.
  const double qc = static_cast<double>(d) / static_cast<double>(d - 2);
  if (q > qc) return Strategy::A;
  if (q < qc) return Strategy::B;
  return std::nullopt;
}

}  // namespace slt
