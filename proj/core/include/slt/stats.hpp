#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace slt::stats {

// Neumaier's compensated summation; order-dependent but deterministic.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if ((sum_ >= 0 ? sum_ : -sum_) >= (x >= 0 ? x : -x)) {
      compensation_ += (sum_ - t) + x;
    } else {
      compensation_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

double compensated_sum(std::span<const double> xs) noexcept;

struct Moments {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased, divisor count-1
  double stderr_mean = 0.0;
  // Standard error of `variance`, from the fourth central moment.
  double stderr_variance = 0.0;
};

// Two-pass moments in index order. Requires at least two values.
Moments moments(std::span<const double> xs);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Wilson score interval for `successes` out of `trials` at normal quantile z.
Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = 1.96);

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double slope_stderr = 0.0;
  std::size_t points = 0;
};

// Ordinary least squares y = a + b x.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

// Weighted least squares with weights w_i = 1 / sigma_i^2.
LinearFit fit_line_weighted(std::span<const double> x, std::span<const double> y,
                            std::span<const double> weights);

double normal_cdf(double x) noexcept;

// Asymptotic Kolmogorov distribution tail, Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_tail(double lambda) noexcept;

struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
  std::size_t n = 0;
};

// One-sample two-sided KS test against the standard normal. The p-value uses
// the asymptotic series with Stephens' small-sample correction
// lambda = (sqrt(n) + 0.12 + 0.11 / sqrt(n)) D.
KsResult ks_test_standard_normal(std::span<const double> sample);

}  // namespace slt::stats
