#include "slt/stats.hpp"

#include <algorithm>
#include <cmath>

#include "slt/errors.hpp"

namespace slt::stats {

double compensated_sum(std::span<const double> xs) noexcept {
  CompensatedSum s;
  for (const double x : xs) s.add(x);
  return s.value();
}

Moments moments(std::span<const double> xs) {
  if (xs.size() < 2) throw DegenerateSampleError("moments: need at least two values");
  Moments m;
  m.count = xs.size();
  const auto n = static_cast<double>(xs.size());
  m.mean = compensated_sum(xs) / n;
  CompensatedSum s2;
  CompensatedSum s4;
  for (const double x : xs) {
    const double d = x - m.mean;
    s2.add(d * d);
    s4.add(d * d * d * d);
  }
  const double m2 = s2.value() / n;
  const double m4 = s4.value() / n;
  m.variance = s2.value() / (n - 1.0);
  m.stderr_mean = std::sqrt(m.variance / n);
  // var(s^2) ~ (m4 - (n-3)/(n-1) m2^2) / n
  const double var_of_var = (m4 - (n - 3.0) / (n - 1.0) * m2 * m2) / n;
  m.stderr_variance = std::sqrt(std::max(var_of_var, 0.0));
  return m;
}

Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z) {
  detail::require(trials > 0, "wilson_interval: trials must be positive");
  detail::require(successes <= trials, "wilson_interval: successes exceed trials");
  const auto n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

LinearFit fit_line_weighted(std::span<const double> x, std::span<const double> y,
                            std::span<const double> weights) {
  detail::require(x.size() == y.size() && x.size() == weights.size(),
                  "fit_line: mismatched input lengths");
  if (x.size() < 2) throw DegenerateSampleError("fit_line: need at least two points");
  CompensatedSum sw, sx, sy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw.add(weights[i]);
    sx.add(weights[i] * x[i]);
    sy.add(weights[i] * y[i]);
  }
  const double xbar = sx.value() / sw.value();
  const double ybar = sy.value() / sw.value();
  CompensatedSum sxx, sxy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - xbar;
    sxx.add(weights[i] * dx * dx);
    sxy.add(weights[i] * dx * (y[i] - ybar));
  }
  if (sxx.value() <= 0.0) throw DegenerateSampleError("fit_line: abscissae are all equal");
  LinearFit fit;
  fit.points = x.size();
  fit.slope = sxy.value() / sxx.value();
  fit.intercept = ybar - fit.slope * xbar;
  if (x.size() > 2) {
    CompensatedSum rss;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      rss.add(weights[i] * r * r);
    }
    fit.slope_stderr =
        std::sqrt(rss.value() / static_cast<double>(x.size() - 2) / sxx.value());
  }
  return fit;
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::vector<double> ones(x.size(), 1.0);
  return fit_line_weighted(x, y, ones);
}

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double kolmogorov_tail(double lambda) noexcept {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::fabs(term) < 1e-16 * std::fabs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test_standard_normal(std::span<const double> sample) {
  if (sample.size() < 2) throw DegenerateSampleError("ks_test: need at least two values");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) throw DegenerateSampleError("ks_test: constant sample");
  const auto n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = normal_cdf(sorted[i]);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max({d, f - lo, hi - f});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d), sorted.size()};
}

}  // namespace slt::stats
