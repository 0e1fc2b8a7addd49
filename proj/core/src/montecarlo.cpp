#include "slt/montecarlo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "slt/local_times.hpp"

namespace slt {

namespace {

constexpr Coord kJumpDistance = 24;
constexpr double kRelTol = 1e-12;

EstimateRecord make_record(const std::string& name, std::uint64_t seed, const RunOptions& opt) {
  EstimateRecord r;
  r.name = name;
  r.seed = seed;
  r.config_hash = opt.config_hash;
  return r;
}

// Mean and standard error of a 0/1 sample with `hits` ones out of `total`.
void set_proportion(EstimateRecord& r, std::uint64_t hits, std::uint64_t total) {
  r.samples = total;
  if (total == 0) {
    r.estimate = std::nan("");
    r.stderr_ = std::nan("");
    return;
  }
  const auto n = static_cast<double>(total);
  const double p = static_cast<double>(hits) / n;
  r.estimate = p;
  r.stderr_ = total > 1 ? std::sqrt(p * (1.0 - p) / (n - 1.0)) : std::nan("");
}

void set_moments(EstimateRecord& r, std::span<const double> xs) {
  const auto m = stats::moments(xs);
  r.samples = m.count;
  r.estimate = m.mean;
  r.stderr_ = m.stderr_mean;
}

Coord l1(std::span<const Coord> pos) {
  Coord s = 0;
  for (const Coord c : pos) s += c < 0 ? -c : c;
  return s;
}

void require_transient(int d, const char* who) {
  detail::require(d >= 3, std::string(who) +
                              ": d must be >= 3 (the walk is recurrent for d <= 2, so gamma_d = 0)");
}

struct NoWorkspace {};

}  // namespace

// ---------------------------------------------------------------------------

void PathwiseAudit::check(std::span<const std::uint64_t> counts, std::uint64_t n, double q,
                          double q_norm) {
  ++paths;
  std::uint64_t mass = 0;
  std::array<std::uint64_t, 64> level_size{};
  for (const auto c : counts) {
    mass += c;
    if (c > 0) ++level_size[static_cast<std::size_t>(std::bit_width(c) - 1)];
  }
  if (mass != n) ++mass_violations;
  if (n == 0 || counts.empty()) return;

  const auto nd = static_cast<double>(n);
  const auto range = static_cast<double>(counts.size());
  bool holder_ok = true;
  if (const auto iq = integer_exponent(q); iq && *iq <= 8) {
    try {
      // sum l^q * R^{q-1} >= n^q, exactly
      const u128 lhs_base = power_sum_exact(counts, *iq);
      u128 lhs = lhs_base;
      u128 rhs = 1;
      const u128 big = ~u128{0};
      for (unsigned i = 0; i + 1 < *iq; ++i) {
        if (lhs > big / counts.size()) throw CapacityError("audit");
        lhs *= counts.size();
      }
      for (unsigned i = 0; i < *iq; ++i) {
        if (rhs > big / n) throw CapacityError("audit");
        rhs *= n;
      }
      holder_ok = lhs >= rhs;
    } catch (const CapacityError&) {
      holder_ok = q_norm >= std::exp(q * std::log(nd) - (q - 1.0) * std::log(range)) * (1.0 - kRelTol);
    }
  } else {
    holder_ok = q_norm >= std::exp(q * std::log(nd) - (q - 1.0) * std::log(range)) * (1.0 - kRelTol);
  }
  if (!holder_ok) ++holder_violations;

  for (std::size_t i = 0; i < level_size.size(); ++i) {
    if (level_size[i] == 0) continue;
    const double b = std::ldexp(1.0, static_cast<int>(i));
    const auto sz = static_cast<double>(level_size[i]);
    if (sz * b > nd || sz * std::pow(b, q) > q_norm * (1.0 + kRelTol)) {
      ++level_violations;
      break;
    }
  }
}

PathSampler::PathSampler(int dimension, std::uint64_t max_steps)
    : dimension_(dimension), occ_(dimension, max_steps) {}

std::span<const std::uint64_t> PathSampler::sample(RngStream& rng, std::uint64_t n) {
  occ_.reset();
  DirectionSampler dir(dimension_);
  for (std::uint64_t k = 0; k < n; ++k) {
    occ_.visit();
    if (k + 1 < n) occ_.move(dir.next(rng));
  }
  return occ_.counts();
}

// ---------------------------------------------------------------------------

std::uint64_t sample_return_time(RngStream& rng, int d, std::uint64_t horizon) {
  std::vector<Coord> pos(static_cast<std::size_t>(d), 0);
  DirectionSampler dir(d);
  Coord dist = 0;
  std::uint64_t t = 0;
  while (t < horizon) {
    if (dist >= kJumpDistance) {
      // No return is possible in the next dist - 1 steps.
      const std::uint64_t m = std::min<std::uint64_t>(static_cast<std::uint64_t>(dist - 1), horizon - t);
      add_bulk_steps(rng, d, m, pos);
      t += m;
      dist = l1(pos);
      continue;
    }
    const int c = dir.next(rng);
    Coord& x = pos[static_cast<std::size_t>(direction_axis(c))];
    const Coord before = x < 0 ? -x : x;
    x += direction_sign(c);
    dist += (x < 0 ? -x : x) - before;
    ++t;
    if (dist == 0) return t;
  }
  return horizon + 1;
}

std::uint64_t sample_origin_visits(RngStream& rng, int d, std::uint64_t n) {
  if (n == 0) return 0;
  std::vector<Coord> pos(static_cast<std::size_t>(d), 0);
  DirectionSampler dir(d);
  Coord dist = 0;
  std::uint64_t visits = 1;
  std::uint64_t t = 0;
  const std::uint64_t last = n - 1;
  while (t < last) {
    if (dist >= kJumpDistance) {
      const std::uint64_t m = std::min<std::uint64_t>(static_cast<std::uint64_t>(dist - 1), last - t);
      add_bulk_steps(rng, d, m, pos);
      t += m;
      dist = l1(pos);
      continue;
    }
    const int c = dir.next(rng);
    Coord& x = pos[static_cast<std::size_t>(direction_axis(c))];
    const Coord before = x < 0 ? -x : x;
    x += direction_sign(c);
    dist += (x < 0 ? -x : x) - before;
    ++t;
    if (dist == 0) ++visits;
  }
  return visits;
}

GammaEstimate estimate_gamma(int d, std::uint64_t horizon, std::uint64_t samples,
                             std::uint64_t seed, const RunOptions& opt) {
  require_transient(d, "estimate_gamma");
  detail::require(horizon >= 1, "estimate_gamma: horizon must be >= 1");
  detail::require(samples >= 2, "estimate_gamma: samples must be >= 2");
  const auto batch = run_replicas<std::uint64_t, NoWorkspace>(
      samples, horizon, opt, [] { return NoWorkspace{}; },
      [&](std::uint64_t i, NoWorkspace&) {
        RngStream rng(seed, i);
        return sample_return_time(rng, d, horizon);
      });

  std::vector<std::uint64_t> horizons;
  for (std::uint64_t h = 1; h < horizon; h *= 4) horizons.push_back(h);
  horizons.push_back(horizon);

  GammaEstimate out;
  out.partial = batch.partial;
  for (const auto h : horizons) {
    std::uint64_t escaped = 0;
    for (const auto t : batch.results) escaped += t > h ? 1 : 0;
    auto r = make_record("gamma", seed, opt);
    r.d = d;
    r.n = static_cast<std::int64_t>(h);
    set_proportion(r, escaped, batch.results.size());
    r.extras["horizon"] = static_cast<double>(h);
    out.ladder.push_back(r);
  }
  out.record = out.ladder.back();
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct PathStat {
  double q_norm = 0.0;
  std::uint64_t range = 0;
  PathwiseAudit audit;
};

std::vector<PathStat> sample_q_norms(double q, int d, std::uint64_t n, std::uint64_t samples,
                                     std::uint64_t seed, const RunOptions& opt, bool* partial) {
  auto batch = run_replicas<PathStat, PathSampler>(
      samples, n, opt, [&] { return PathSampler(d, n); },
      [&](std::uint64_t i, PathSampler& ps) {
        RngStream rng(seed, i);
        const auto counts = ps.sample(rng, n);
        PathStat s;
        s.q_norm = power_sum(counts, q);
        s.range = counts.size();
        s.audit.check(counts, n, q, s.q_norm);
        return s;
      });
  if (partial) *partial = batch.partial;
  return std::move(batch.results);
}

PathwiseAudit fold_audit(const std::vector<PathStat>& stats_) {
  PathwiseAudit a;
  for (const auto& s : stats_) a.merge(s.audit);
  return a;
}

}  // namespace

KappaEstimate estimate_kappa(double q, int d, std::uint64_t n, std::uint64_t samples,
                             std::uint64_t seed, const RunOptions& opt) {
  require_transient(d, "estimate_kappa");
  detail::require(q >= 1.0, "estimate_kappa: q must be >= 1");
  detail::require(n >= 1, "estimate_kappa: n must be >= 1");
  detail::require(samples >= 2, "estimate_kappa: samples must be >= 2");
  KappaEstimate out;
  const auto paths = sample_q_norms(q, d, n, samples, seed, opt, &out.partial);
  std::vector<double> kappa;
  std::vector<double> range;
  for (const auto& p : paths) {
    kappa.push_back(p.q_norm / static_cast<double>(n));
    range.push_back(static_cast<double>(p.range) / static_cast<double>(n));
  }
  out.audit = fold_audit(paths);
  out.kappa = make_record("kappa", seed, opt);
  out.kappa.d = d;
  out.kappa.q = q;
  out.kappa.n = static_cast<std::int64_t>(n);
  set_moments(out.kappa, kappa);
  out.range = make_record("range_mean", seed, opt);
  out.range.d = d;
  out.range.n = static_cast<std::int64_t>(n);
  set_moments(out.range, range);
  return out;
}

RangeScan range_excess_scan(int d, std::span<const std::uint64_t> n_grid, std::uint64_t horizon,
                            std::uint64_t samples, std::uint64_t seed, const RunOptions& opt) {
  require_transient(d, "range_excess_scan");
  detail::require(!n_grid.empty(), "range_excess_scan: empty n grid");
  detail::require(samples >= 2, "range_excess_scan: samples must be >= 2");
  const std::uint64_t n_max = *std::max_element(n_grid.begin(), n_grid.end());
  detail::require(n_grid.front() >= 2, "range_excess_scan: n must be >= 2");
  detail::require(horizon >= n_max, "range_excess_scan: horizon must be >= max n");
  const auto batch = run_replicas<std::uint64_t, NoWorkspace>(
      samples, horizon, opt, [] { return NoWorkspace{}; },
      [&](std::uint64_t i, NoWorkspace&) {
        RngStream rng(seed, i);
        return sample_return_time(rng, d, horizon);
      });
  RangeScan out;
  out.partial = batch.partial;
  std::uint64_t escaped = 0;
  for (const auto t : batch.results) escaped += t > horizon ? 1 : 0;
  out.gamma = make_record("gamma", seed, opt);
  out.gamma.d = d;
  out.gamma.n = static_cast<std::int64_t>(horizon);
  set_proportion(out.gamma, escaped, batch.results.size());
  for (const auto n : n_grid) {
    std::vector<double> xs;
    xs.reserve(batch.results.size());
    for (const auto t : batch.results) {
      xs.push_back(t <= horizon ? static_cast<double>(std::min(t, n)) / static_cast<double>(n) : 0.0);
    }
    auto r = make_record("range_excess", seed, opt);
    r.d = d;
    r.n = static_cast<std::int64_t>(n);
    set_moments(r, xs);
    const double scale = psi(d, static_cast<std::int64_t>(n)) / static_cast<double>(n);
    r.extras["psi_over_n"] = scale;
    r.extras["ratio"] = r.estimate / scale;
    r.extras["horizon"] = static_cast<double>(horizon);
    out.records.push_back(r);
  }
  return out;
}

VarianceScan variance_scan(double q, int d, std::span<const std::uint64_t> n_grid,
                           std::uint64_t samples, std::uint64_t seed, const RunOptions& opt) {
  require_transient(d, "variance_scan");
  detail::require(q >= 1.0, "variance_scan: q must be >= 1");
  detail::require(!n_grid.empty(), "variance_scan: empty n grid");
  detail::require(samples >= 2, "variance_scan: samples must be >= 2");
  std::vector<std::uint64_t> grid(n_grid.begin(), n_grid.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  detail::require(grid.front() >= 2, "variance_scan: n must be >= 2");
  const std::uint64_t n_max = grid.back();

  struct Checkpoints {
    std::vector<double> q_norm;
    PathwiseAudit audit;
  };
  const auto batch = run_replicas<Checkpoints, WalkOccupancy>(
      samples, n_max, opt, [&] { return WalkOccupancy(d, n_max); },
      [&](std::uint64_t i, WalkOccupancy& occ) {
        RngStream rng(seed, i);
        DirectionSampler dir(d);
        occ.reset();
        Checkpoints c;
        std::size_t next = 0;
        for (std::uint64_t k = 0; k < n_max; ++k) {
          occ.visit();
          if (k + 1 == grid[next]) {
            const double qn = power_sum(occ.counts(), q);
            c.q_norm.push_back(qn);
            c.audit.check(occ.counts(), k + 1, q, qn);
            ++next;
          }
          if (k + 1 < n_max) occ.move(dir.next(rng));
        }
        return c;
      });

  VarianceScan out;
  out.partial = batch.partial;
  for (const auto& c : batch.results) out.audit.merge(c.audit);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    std::vector<double> xs;
    xs.reserve(batch.results.size());
    for (const auto& c : batch.results) xs.push_back(c.q_norm[j]);
    const auto m = stats::moments(xs);
    const auto n = static_cast<double>(grid[j]);
    auto r = make_record("variance", seed, opt);
    r.d = d;
    r.q = q;
    r.n = static_cast<std::int64_t>(grid[j]);
    r.samples = m.count;
    r.estimate = m.variance;
    r.stderr_ = m.stderr_variance;
    const double log2n = std::log(n) * std::log(n);
    r.extras["mean"] = m.mean;
    r.extras["var_over_n"] = m.variance / n;
    r.extras["var_over_n_stderr"] = m.stderr_variance / n;
    r.extras["var_over_n_log2n"] = m.variance / (n * log2n);
    r.extras["var_over_n_log2n_stderr"] = m.stderr_variance / (n * log2n);
    out.records.push_back(r);
  }
  return out;
}

CltResult clt_test(double q, int d, std::uint64_t n, std::uint64_t samples, std::uint64_t seed,
                   const RunOptions& opt) {
  require_transient(d, "clt_test");
  detail::require(q >= 1.0, "clt_test: q must be >= 1");
  detail::require(n >= 2, "clt_test: n must be >= 2");
  detail::require(samples >= 2, "clt_test: samples must be >= 2");
  CltResult out;
  out.unsupported_dimension = d == 3;

  const std::uint64_t cal_seed = derive_seed(seed, "clt-calibration");
  const auto cal = sample_q_norms(q, d, n, samples, cal_seed, opt, nullptr);
  std::vector<double> cal_q;
  for (const auto& p : cal) cal_q.push_back(p.q_norm);
  const auto m = stats::moments(cal_q);
  const auto nd = static_cast<double>(n);
  out.kappa_hat = m.mean / nd;
  out.v_hat = m.variance / nd;
  if (!(out.v_hat > 0.0)) throw DegenerateSampleError("clt_test: calibration variance is zero");

  const auto paths = sample_q_norms(q, d, n, samples, seed, opt, nullptr);
  out.audit = fold_audit(cal);
  out.audit.merge(fold_audit(paths));
  const double scale = std::sqrt(nd * out.v_hat);
  for (const auto& p : paths) out.standardized.push_back((p.q_norm - nd * out.kappa_hat) / scale);
  out.ks = stats::ks_test_standard_normal(out.standardized);

  out.record = make_record("clt_ks", seed, opt);
  out.record.d = d;
  out.record.q = q;
  out.record.n = static_cast<std::int64_t>(n);
  out.record.samples = out.ks.n;
  out.record.estimate = out.ks.statistic;
  out.record.stderr_ = 0.0;
  out.record.extras["p_value"] = out.ks.p_value;
  out.record.extras["kappa_hat"] = out.kappa_hat;
  out.record.extras["v_hat"] = out.v_hat;
  out.record.extras["calibration_seed"] = static_cast<double>(cal_seed);
  return out;
}

TailEstimate tail_estimate(double q, int d, std::uint64_t n, double xi, std::uint64_t samples,
                           std::uint64_t seed, const RunOptions& opt) {
  detail::require(d >= 1, "tail_estimate: d must be >= 1");
  detail::require(q >= 1.0, "tail_estimate: q must be >= 1");
  detail::require(n >= 1, "tail_estimate: n must be >= 1");
  detail::require(samples >= 2, "tail_estimate: samples must be >= 2");
  detail::require(!std::isnan(xi), "tail_estimate: xi must be a number");
  TailEstimate out;
  out.record = make_record("tail", seed, opt);
  out.record.d = d;
  out.record.q = q;
  out.record.n = static_cast<std::int64_t>(n);
  out.record.xi = xi;
  const auto nd = static_cast<double>(n);
  const double ceiling = std::pow(nd, q);  // q_norm <= n^q
  out.record.extras["q_norm_ceiling"] = ceiling;

  const auto certify = [&](double mean) {
    out.certificate = true;
    out.record.samples = samples;
    out.record.estimate = 0.0;
    out.record.stderr_ = 0.0;
    out.wilson = {0.0, 0.0};
    out.record.extras["certificate"] = 1.0;
    out.record.extras["mean"] = mean;
    return out;
  };
  // q_norm >= n, so the mean is at least n.
  if (xi * nd + nd > ceiling) return certify(nd);

  const auto cal = sample_q_norms(q, d, n, samples, derive_seed(seed, "tail-calibration"), opt,
                                  nullptr);
  stats::CompensatedSum s;
  for (const auto& p : cal) s.add(p.q_norm);
  const double mean = s.value() / static_cast<double>(cal.size());
  out.audit = fold_audit(cal);
  if (xi * nd + mean > ceiling) return certify(mean);

  const auto paths = sample_q_norms(q, d, n, samples, seed, opt, nullptr);
  out.audit.merge(fold_audit(paths));
  const double threshold = mean + xi * nd;
  std::uint64_t hits = 0;
  for (const auto& p : paths) hits += p.q_norm >= threshold ? 1 : 0;
  set_proportion(out.record, hits, paths.size());
  out.wilson = stats::wilson_interval(hits, paths.size());
  out.record.extras["certificate"] = 0.0;
  out.record.extras["mean"] = mean;
  out.record.extras["threshold"] = threshold;
  out.record.extras["wilson_lo"] = out.wilson.lo;
  out.record.extras["wilson_hi"] = out.wilson.hi;
  out.record.extras["hits"] = static_cast<double>(hits);
  return out;
}

// ---------------------------------------------------------------------------

PinnedTail pinned_tail_check(int d, std::uint64_t n, std::span<const std::uint64_t> k_grid,
                             std::uint64_t samples, std::uint64_t seed, const RunOptions& opt) {
  require_transient(d, "pinned_tail_check");
  detail::require(n >= 1, "pinned_tail_check: n must be >= 1");
  detail::require(!k_grid.empty(), "pinned_tail_check: empty k grid");
  detail::require(samples >= 40, "pinned_tail_check: samples must be >= 40");
  for (const auto k : k_grid) detail::require(k >= 1, "pinned_tail_check: k must be >= 1");

  const auto batch = run_replicas<std::uint64_t, NoWorkspace>(
      samples, n, opt, [] { return NoWorkspace{}; },
      [&](std::uint64_t i, NoWorkspace&) {
        RngStream rng(seed, i);
        return sample_origin_visits(rng, d, n);
      });
  const auto& visits = batch.results;
  const std::uint64_t total = visits.size();
  const auto at_least = [&](std::size_t lo, std::size_t hi, std::uint64_t k) {
    std::uint64_t c = 0;
    for (std::size_t i = lo; i < hi; ++i) c += visits[i] >= k ? 1 : 0;
    return c;
  };

  PinnedTail out;
  out.curve.name = "pinned_tail";
  out.curve.samples = total;
  out.curve.seed = seed;
  const std::uint64_t returned = at_least(0, total, 2);
  out.rho_hat = static_cast<double>(returned) / static_cast<double>(total);
  out.rho_interval = stats::wilson_interval(returned, total);
  out.curve.reference_slope = std::log(out.rho_hat);
  out.curve.extras["rho_hat"] = out.rho_hat;
  out.curve.extras["rho_upper"] = out.rho_interval.hi;
  out.curve.extras["n"] = static_cast<double>(n);
  out.curve.extras["d"] = d;

  std::vector<double> fx;
  std::vector<double> fy;
  for (const auto k : k_grid) {
    const std::uint64_t c = at_least(0, total, k);
    const double p = static_cast<double>(c) / static_cast<double>(total);
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(total));
    out.curve.points.push_back({static_cast<double>(k), p, se, c});
    const double envelope = std::pow(out.rho_interval.hi, static_cast<double>(k - 1)) + 3.0 * se;
    if (p > envelope) out.envelope_holds = false;
    if (c >= 400) {
      out.fit_grid.push_back(k);
      fx.push_back(static_cast<double>(k));
      fy.push_back(std::log(p));
    }
  }
  if (fx.size() < 2) {
    out.curve.fitted_slope = std::nan("");
    out.curve.fitted_slope_stderr = std::nan("");
    return out;
  }
  const auto fit = stats::fit_line(fx, fy);
  out.curve.fitted_slope = fit.slope;
  out.curve.fitted_slope_stderr = fit.slope_stderr;

  constexpr std::size_t kBatches = 20;
  std::vector<double> diffs;
  for (std::size_t b = 0; b < kBatches; ++b) {
    const std::size_t lo = total * b / kBatches;
    const std::size_t hi = total * (b + 1) / kBatches;
    std::vector<double> by;
    bool usable = hi > lo;
    for (const auto k : out.fit_grid) {
      const std::uint64_t c = at_least(lo, hi, k);
      if (c == 0) {
        usable = false;
        break;
      }
      by.push_back(std::log(static_cast<double>(c) / static_cast<double>(hi - lo)));
    }
    const std::uint64_t rb = usable ? at_least(lo, hi, 2) : 0;
    if (!usable || rb == 0) continue;
    const auto bf = stats::fit_line(fx, by);
    diffs.push_back(bf.slope - std::log(static_cast<double>(rb) / static_cast<double>(hi - lo)));
  }
  if (diffs.size() >= 2) {
    out.slope_difference_stderr = stats::moments(diffs).stderr_mean;
    out.slope_consistent =
        std::fabs(out.curve.fitted_slope - out.curve.reference_slope) <= 3.0 * out.slope_difference_stderr;
  }
  out.curve.extras["slope_difference_stderr"] = out.slope_difference_stderr;
  return out;
}

// ---------------------------------------------------------------------------

std::uint64_t ball_volume(int d, std::int64_t r) {
  detail::require(d >= 1, "ball_volume: d must be >= 1");
  detail::require(r >= 0 && r <= 100000, "ball_volume: r must lie in [0, 1e5]");
  const auto r2 = static_cast<std::size_t>(r * r);
  // v[s] = number of points of Z^k with squared norm <= s
  std::vector<std::uint64_t> v(r2 + 1);
  for (std::size_t s = 0; s <= r2; ++s) {
    std::uint64_t x = 0;
    while ((x + 1) * (x + 1) <= s) ++x;
    v[s] = 2 * x + 1;
  }
  for (int k = 2; k <= d; ++k) {
    std::vector<std::uint64_t> w(r2 + 1, 0);
    for (std::size_t s = 0; s <= r2; ++s) {
      std::uint64_t total = v[s];
      for (std::size_t x = 1; x * x <= s; ++x) total += 2 * v[s - x * x];
      w[s] = total;
    }
    v.swap(w);
  }
  return v[r2];
}

namespace {

struct ConfinedPath {
  bool accepted = false;
  double q_norm = 0.0;
  std::uint64_t range = 0;
  std::uint64_t exit_time = 0;
  PathwiseAudit audit;
};

// Walks until the first k < n with |S(k)|^2 > r^2; records visits when `occ` is given.
std::uint64_t confined_walk(RngStream& rng, int d, std::uint64_t n, std::int64_t r,
                            WalkOccupancy* occ) {
  std::vector<Coord> pos(static_cast<std::size_t>(d), 0);
  DirectionSampler dir(d);
  const Coord r2 = r * r;
  Coord sq = 0;
  if (occ) occ->reset();
  for (std::uint64_t k = 0; k < n; ++k) {
    if (sq > r2) return k;
    if (occ) occ->visit();
    if (k + 1 == n) break;
    const int c = dir.next(rng);
    Coord& x = pos[static_cast<std::size_t>(direction_axis(c))];
    const int s = direction_sign(c);
    sq += 2 * s * x + 1;
    x += s;
    if (occ) occ->move(c);
  }
  return n;
}

double pilot_estimate(int d, std::uint64_t n, std::int64_t r, std::uint64_t seed,
                      std::uint64_t pilot_samples, const RunOptions& opt) {
  const auto batch = run_replicas<std::uint64_t, NoWorkspace>(
      pilot_samples, n, RunOptions{0, opt.threads, opt.config_hash}, [] { return NoWorkspace{}; },
      [&](std::uint64_t i, NoWorkspace&) {
        RngStream rng(seed, i);
        return confined_walk(rng, d, n, r, nullptr);
      });
  const auto total = static_cast<double>(batch.results.size());
  const auto surviving = [&](std::uint64_t t) {
    std::uint64_t c = 0;
    for (const auto e : batch.results) c += e >= t ? 1 : 0;
    return c;
  };
  const std::uint64_t at_end = surviving(n);
  if (at_end >= 10) return static_cast<double>(at_end) / total;
  // Extrapolate the log-survival curve linearly in time.
  std::vector<double> ts;
  std::vector<double> ls;
  constexpr int kCheckpoints = 16;
  for (int j = 1; j <= kCheckpoints; ++j) {
    const std::uint64_t t = n * static_cast<std::uint64_t>(j) / kCheckpoints;
    const std::uint64_t s = surviving(t);
    if (s >= 10) {
      ts.push_back(static_cast<double>(t));
      ls.push_back(std::log(static_cast<double>(s) / total));
    }
  }
  if (ts.size() >= 2) {
    const std::size_t from = ts.size() / 2;
    const std::span<const double> tx(ts.data() + from, ts.size() - from);
    const std::span<const double> ty(ls.data() + from, ls.size() - from);
    if (tx.size() >= 2) {
      const auto fit = stats::fit_line(tx, ty);
      return std::exp(std::min(0.0, fit.intercept + fit.slope * static_cast<double>(n)));
    }
  }
  if (!ts.empty()) return std::exp(ls.back() * static_cast<double>(n) / ts.back());
  return 0.0;
}

}  // namespace

ConfinedResult confined_sampler(int d, std::uint64_t n, std::int64_t r, double q,
                                std::uint64_t samples, std::uint64_t seed, const RunOptions& opt) {
  detail::require(d >= 1, "confined_sampler: d must be >= 1");
  detail::require(n >= 1, "confined_sampler: n must be >= 1");
  detail::require(r >= 0, "confined_sampler: r must be >= 0");
  detail::require(q >= 1.0, "confined_sampler: q must be >= 1");
  detail::require(samples >= 2, "confined_sampler: samples must be >= 2");
  ConfinedResult out;
  out.ball = ball_volume(d, r);

  if (static_cast<std::uint64_t>(r) >= n) {
    out.pre_estimate = 1.0;
  } else {
    out.pre_estimate = pilot_estimate(d, n, r, derive_seed(seed, "confined-pilot"),
                                      std::min<std::uint64_t>(samples, 4000), opt);
    if (out.pre_estimate < kMinAcceptance) {
      throw InfeasibleConfiguration(
          "confined_sampler: expected acceptance " + format_double(out.pre_estimate) +
              " is below the feasibility floor " + format_double(kMinAcceptance),
          out.pre_estimate);
    }
  }

  const auto batch = run_replicas<ConfinedPath, WalkOccupancy>(
      samples, n, opt, [&] { return WalkOccupancy(d, n); },
      [&](std::uint64_t i, WalkOccupancy& occ) {
        RngStream rng(seed, i);
        ConfinedPath p;
        p.exit_time = confined_walk(rng, d, n, r, &occ);
        p.accepted = p.exit_time == n;
        if (p.accepted) {
          p.q_norm = power_sum(occ.counts(), q);
          p.range = occ.site_count();
          p.audit.check(occ.counts(), n, q, p.q_norm);
        }
        return p;
      });

  const auto nd = static_cast<double>(n);
  const double ball_bound = std::exp(q * std::log(nd) - (q - 1.0) * std::log(static_cast<double>(out.ball)));
  stats::CompensatedSum qsum;
  stats::CompensatedSum rsum;
  for (const auto& p : batch.results) {
    if (!p.accepted) continue;
    ++out.accepted;
    out.audit.merge(p.audit);
    qsum.add(p.q_norm);
    rsum.add(static_cast<double>(p.range));
    if (p.range > out.ball) ++out.range_violations;
    if (p.q_norm < ball_bound * (1.0 - kRelTol)) ++out.holder_violations;
  }
  out.holder_violations += out.audit.holder_violations;
  if (out.accepted > 0) {
    out.mean_q_norm = qsum.value() / static_cast<double>(out.accepted);
    out.mean_range = rsum.value() / static_cast<double>(out.accepted);
  }
  out.probability = make_record("confinement", seed, opt);
  out.probability.d = d;
  out.probability.q = q;
  out.probability.n = static_cast<std::int64_t>(n);
  set_proportion(out.probability, out.accepted, batch.results.size());
  out.probability.extras["radius"] = static_cast<double>(r);
  out.probability.extras["pre_estimate"] = out.pre_estimate;
  out.probability.extras["accepted"] = static_cast<double>(out.accepted);
  out.probability.extras["ball_volume"] = static_cast<double>(out.ball);
  out.probability.extras["mean_q_norm"] = out.mean_q_norm;
  out.probability.extras["mean_range"] = out.mean_range;
  out.probability.extras["log_probability"] = std::log(out.probability.estimate);
  return out;
}

ConfinementScaling confinement_scaling(int d, double c, std::span<const std::int64_t> radii,
                                       double q, std::uint64_t samples, std::uint64_t seed,
                                       const RunOptions& opt) {
  detail::require(c > 0.0, "confinement_scaling: n / r^2 must be positive");
  detail::require(radii.size() >= 2, "confinement_scaling: need at least two radii");
  ConfinementScaling out;
  for (const auto r : radii) {
    const auto n = static_cast<std::uint64_t>(std::llround(c * static_cast<double>(r * r)));
    out.runs.push_back(confined_sampler(d, n, r, q, samples,
                                        derive_seed(seed, "confine-r" + std::to_string(r)), opt));
    out.log_probabilities.push_back(std::log(out.runs.back().probability.estimate));
  }
  const auto [lo, hi] = std::minmax_element(out.log_probabilities.begin(), out.log_probabilities.end());
  const double mean = stats::compensated_sum(out.log_probabilities) /
                      static_cast<double>(out.log_probabilities.size());
  out.relative_spread = (*hi - *lo) / std::fabs(mean);
  return out;
}

// ---------------------------------------------------------------------------

IntersectionScan intersection_decay_scan(int d, std::uint64_t n,
                                         std::span<const std::uint64_t> k_grid,
                                         std::uint64_t samples, std::uint64_t seed,
                                         const RunOptions& opt) {
  require_transient(d, "intersection_decay_scan");
  detail::require(n >= 1, "intersection_decay_scan: n must be >= 1");
  detail::require(!k_grid.empty(), "intersection_decay_scan: empty k grid");
  detail::require(samples >= 2, "intersection_decay_scan: samples must be >= 2");
  std::vector<std::uint64_t> ks(k_grid.begin(), k_grid.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  const std::uint64_t k_x = ks.front();

  struct Pair {
    std::vector<double> mass;  // l_n(D~(k)) per k
    double x = 0.0;
  };
  const auto batch = run_replicas<Pair, WalkOccupancy>(
      samples, 2 * n, opt, [&] { return WalkOccupancy(d, n); },
      [&](std::uint64_t i, WalkOccupancy& occ) {
        RngStream rng(seed, i);
        occ.reset();
        {
          DirectionSampler dir(d);
          for (std::uint64_t t = 0; t < n; ++t) {
            occ.visit();
            if (t + 1 < n) occ.move(dir.next(rng));
          }
        }
        const std::size_t tilde_sites = occ.site_count();
        const std::vector<std::uint64_t> tilde(occ.counts().begin(), occ.counts().end());
        std::uint64_t volume = 0;
        for (const auto c : tilde) volume += c > k_x ? 1 : 0;

        Pair p;
        p.mass.assign(ks.size(), 0.0);
        std::vector<std::uint64_t> hits(ks.size(), 0);
        occ.rewind();
        DirectionSampler dir(d);
        for (std::uint64_t t = 0; t < n; ++t) {
          const auto id = occ.locate();
          const std::uint64_t c = id < tilde_sites ? tilde[id] : 0;
          for (std::size_t j = 0; j < ks.size() && c > ks[j]; ++j) ++hits[j];
          if (t + 1 < n) occ.move(dir.next(rng));
        }
        for (std::size_t j = 0; j < ks.size(); ++j) p.mass[j] = static_cast<double>(hits[j]);
        if (volume > 0) {
          const std::size_t jx = 0;
          p.x = p.mass[jx] / std::pow(static_cast<double>(volume), 2.0 / d);
        }
        return p;
      });

  IntersectionScan out;
  const auto total = batch.results.size();
  out.by_k.name = "intersection_mass";
  out.by_k.samples = total;
  out.by_k.seed = seed;
  out.by_k.extras["n"] = static_cast<double>(n);
  out.by_k.extras["d"] = d;
  std::vector<double> fx;
  std::vector<double> fy;
  for (std::size_t j = 0; j < ks.size(); ++j) {
    std::vector<double> xs;
    std::uint64_t positive = 0;
    for (const auto& p : batch.results) {
      xs.push_back(p.mass[j]);
      positive += p.mass[j] > 0 ? 1 : 0;
    }
    const auto m = stats::moments(xs);
    out.by_k.points.push_back({static_cast<double>(ks[j]), m.mean, m.stderr_mean, positive});
    if (m.mean > 0.0 && positive >= 20) {
      fx.push_back(static_cast<double>(ks[j]));
      fy.push_back(std::log(m.mean));
    }
  }
  if (fx.size() >= 2) {
    const auto fit = stats::fit_line(fx, fy);
    out.k_slope = fit.slope;
    out.k_slope_stderr = fit.slope_stderr;
  } else {
    out.k_slope = std::nan("");
    out.k_slope_stderr = std::nan("");
  }
  out.by_k.fitted_slope = out.k_slope;
  out.by_k.fitted_slope_stderr = out.k_slope_stderr;

  out.x_tail.name = "intersection_x_tail";
  out.x_tail.samples = total;
  out.x_tail.seed = seed;
  out.x_tail.extras["k"] = static_cast<double>(k_x);
  std::vector<double> xvals;
  for (const auto& p : batch.results) xvals.push_back(p.x);
  const double xmean = stats::compensated_sum(xvals) / static_cast<double>(total);
  std::vector<double> tx;
  std::vector<double> ty;
  for (int j = 1; j <= 16 && xmean > 0.0; ++j) {
    const double t = 0.5 * j * xmean;
    std::uint64_t c = 0;
    for (const double x : xvals) c += x > t ? 1 : 0;
    const double prob = static_cast<double>(c) / static_cast<double>(total);
    out.x_tail.points.push_back(
        {t, prob, std::sqrt(prob * (1.0 - prob) / static_cast<double>(total)), c});
    if (c >= 20) {
      tx.push_back(t);
      ty.push_back(std::log(prob));
    }
  }
  out.x_slope = tx.size() >= 2 ? stats::fit_line(tx, ty).slope : std::nan("");
  out.x_tail.fitted_slope = out.x_slope;
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(ShapeSignature s) {
  switch (s) {
    case ShapeSignature::A: return "A";
    case ShapeSignature::B: return "B";
    case ShapeSignature::None: return "none";
  }
  return "none";
}

LevelProfile level_profile(double q, int d, std::uint64_t n, std::uint64_t samples,
                           std::uint64_t seed, double top_fraction, const RunOptions& opt) {
  require_transient(d, "level_profile");
  detail::require(q >= 1.0, "level_profile: q must be >= 1");
  detail::require(n >= 1, "level_profile: n must be >= 1");
  detail::require(samples >= 2, "level_profile: samples must be >= 2");
  detail::require(top_fraction >= 0.0 && top_fraction <= 1.0,
                  "level_profile: top fraction must lie in [0, 1]");
  const auto levels = static_cast<std::size_t>(std::bit_width(n));

  struct Profile {
    double q_norm = 0.0;
    std::vector<double> contribution;
    std::vector<std::uint64_t> volume;
    bool partition_ok = true;
    PathwiseAudit audit;
  };
  const auto iq = integer_exponent(q);
  const auto batch = run_replicas<Profile, PathSampler>(
      samples, n, opt, [&] { return PathSampler(d, n); },
      [&](std::uint64_t i, PathSampler& ps) {
        RngStream rng(seed, i);
        const auto counts = ps.sample(rng, n);
        Profile p;
        p.q_norm = power_sum(counts, q);
        p.audit.check(counts, n, q, p.q_norm);
        std::vector<std::vector<std::uint64_t>> by_level(levels);
        for (const auto c : counts) by_level[static_cast<std::size_t>(std::bit_width(c) - 1)].push_back(c);
        p.contribution.resize(levels);
        p.volume.resize(levels);
        stats::CompensatedSum total;
        u128 exact_total = 0;
        bool exact = iq.has_value();
        for (std::size_t l = 0; l < levels; ++l) {
          p.volume[l] = by_level[l].size();
          p.contribution[l] = power_sum(by_level[l], q);
          total.add(p.contribution[l]);
          if (exact) {
            try {
              exact_total += power_sum_exact(by_level[l], *iq);
            } catch (const CapacityError&) {
              exact = false;
            }
          }
        }
        if (exact) {
          p.partition_ok = exact_total == power_sum_exact(counts, *iq);
        } else {
          p.partition_ok = std::fabs(total.value() - p.q_norm) <= kRelTol * p.q_norm;
        }
        return p;
      });

  LevelProfile out;
  const auto& paths = batch.results;
  const auto total = static_cast<double>(paths.size());
  out.rows.resize(levels);
  for (std::size_t l = 0; l < levels; ++l) out.rows[l].level = static_cast<int>(l);
  std::vector<stats::CompensatedSum> contrib(levels), frac(levels);
  for (const auto& p : paths) {
    out.audit.merge(p.audit);
    if (!p.partition_ok) ++out.partition_violations;
    for (std::size_t l = 0; l < levels; ++l) {
      contrib[l].add(p.contribution[l]);
      frac[l].add(p.contribution[l] / p.q_norm);
      const double ratio = static_cast<double>(p.volume[l]) * std::ldexp(1.0, static_cast<int>(l)) /
                           static_cast<double>(n);
      out.rows[l].max_volume_ratio = std::max(out.rows[l].max_volume_ratio, ratio);
    }
  }
  for (std::size_t l = 0; l < levels; ++l) {
    out.rows[l].mean_contribution = contrib[l].value() / total;
    out.rows[l].mean_fraction = frac[l].value() / total;
  }
  const auto argmax = [&](auto key) {
    std::size_t best = 0;
    for (std::size_t l = 1; l < levels; ++l) {
      if (key(out.rows[l]) > key(out.rows[best])) best = l;
    }
    return static_cast<int>(best);
  };
  out.argmax_unconditional = argmax([](const LevelRow& r) { return r.mean_contribution; });

  if (top_fraction > 0.0) {
    std::vector<std::size_t> order(paths.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return paths[a].q_norm > paths[b].q_norm; });
    const auto top = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(paths.size()))));
    out.conditioned_paths = top;
    for (std::size_t l = 0; l < levels; ++l) {
      stats::CompensatedSum s;
      for (std::size_t j = 0; j < top; ++j) s.add(paths[order[j]].contribution[l]);
      out.rows[l].top_contribution = s.value() / static_cast<double>(top);
      out.rows[l].excess = out.rows[l].top_contribution - out.rows[l].mean_contribution;
    }
    out.argmax_conditioned = argmax([](const LevelRow& r) { return r.top_contribution; });
    out.argmax_excess = argmax([](const LevelRow& r) { return r.excess; });
    out.signature = out.argmax_excess >= 2 ? ShapeSignature::A : ShapeSignature::B;
  } else {
    out.argmax_conditioned = out.argmax_unconditional;
  }
  return out;
}

}  // namespace slt
