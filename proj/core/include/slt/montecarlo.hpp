#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "slt/analytic.hpp"
#include "slt/errors.hpp"
#include "slt/lattice_walk.hpp"
#include "slt/records.hpp"
#include "slt/rng.hpp"
#include "slt/site_counter.hpp"
#include "slt/stats.hpp"

namespace slt {

struct RunOptions {
  // Upper bound on simulated walk steps per call; 0 = unlimited. When the
  // next chunk of replicas would exceed it, the run stops and is flagged partial.
  std::uint64_t step_budget = 0;
  unsigned threads = 1;
  std::string config_hash;
};

// Pathwise invariants checked on every sampled path: mass, Hoelder lower
// bound, and level-set volume/mass bounds for the ladder 2^i.
struct PathwiseAudit {
  std::uint64_t paths = 0;
  std::uint64_t mass_violations = 0;
  std::uint64_t holder_violations = 0;
  std::uint64_t level_violations = 0;

  bool clean() const noexcept {
    return mass_violations == 0 && holder_violations == 0 && level_violations == 0;
  }
  void merge(const PathwiseAudit& o) noexcept {
    paths += o.paths;
    mass_violations += o.mass_violations;
    holder_violations += o.holder_violations;
    level_violations += o.level_violations;
  }
  // `q_norm` is the already computed sum of counts^q.
  void check(std::span<const std::uint64_t> counts, std::uint64_t n, double q, double q_norm);
};

// ---------------------------------------------------------------------------
// Replica engine: replica i always uses RngStream(master_seed, i); results are
// stored by index and folded in index order, so output does not depend on the
// thread count.

inline constexpr std::uint64_t kReplicaChunk = 256;

template <class Result>
struct ReplicaBatch {
  std::vector<Result> results;
  bool partial = false;
};

template <class Result, class Workspace, class MakeWorkspace, class Fn>
ReplicaBatch<Result> run_replicas(std::uint64_t count, std::uint64_t steps_per_replica,
                                  const RunOptions& opt, MakeWorkspace make, Fn fn) {
  ReplicaBatch<Result> batch;
  batch.results.reserve(count);
  const unsigned threads = std::max(1u, opt.threads);
  std::vector<Workspace> ws;
  for (unsigned t = 0; t < threads; ++t) ws.push_back(make());
  std::uint64_t used = 0;
  for (std::uint64_t start = 0; start < count; start += kReplicaChunk) {
    const std::uint64_t end = std::min(count, start + kReplicaChunk);
    const std::uint64_t cost = (end - start) * steps_per_replica;
    if (opt.step_budget != 0 && used + cost > opt.step_budget) {
      batch.partial = true;
      break;
    }
    used += cost;
    const std::size_t base = batch.results.size();
    batch.results.resize(base + (end - start));
    if (threads == 1) {
      for (std::uint64_t i = start; i < end; ++i) batch.results[base + (i - start)] = fn(i, ws[0]);
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          for (std::uint64_t i = start + t; i < end; i += threads) {
            batch.results[base + (i - start)] = fn(i, ws[t]);
          }
        });
      }
      for (auto& th : pool) th.join();
    }
  }
  return batch;
}

// Walks one path of n steps from the origin, recording S(0..n-1).
class PathSampler {
 public:
  PathSampler(int dimension, std::uint64_t max_steps);
  // Visit counts of the path drawn from `rng`.
  std::span<const std::uint64_t> sample(RngStream& rng, std::uint64_t n);
  WalkOccupancy& occupancy() noexcept { return occ_; }

 private:
  int dimension_;
  WalkOccupancy occ_;
};

// ---------------------------------------------------------------------------

struct GammaEstimate {
  EstimateRecord record;              // at the requested horizon
  std::vector<EstimateRecord> ladder;  // horizons 4^k < horizon, then horizon
  bool partial = false;
};

// Fraction of walks with no return to 0 at times 1..horizon.
GammaEstimate estimate_gamma(int d, std::uint64_t horizon, std::uint64_t samples,
                             std::uint64_t seed, const RunOptions& opt = {});

// First return time to 0, or horizon + 1 when there is none by `horizon`.
// Walks far from the origin are advanced in exact bulk jumps.
std::uint64_t sample_return_time(RngStream& rng, int d, std::uint64_t horizon);

// Number of visits to 0 at times 0..n-1.
std::uint64_t sample_origin_visits(RngStream& rng, int d, std::uint64_t n);

struct KappaEstimate {
  EstimateRecord kappa;  // mean q_norm / n
  EstimateRecord range;  // mean |R_n| / n
  PathwiseAudit audit;
  bool partial = false;
};

KappaEstimate estimate_kappa(double q, int d, std::uint64_t n, std::uint64_t samples,
                             std::uint64_t seed, const RunOptions& opt = {});

// E|R_n|/n - gamma_d = E[min(T, n) 1{T < inf}] / n for the first return
// time T; estimated with T < inf replaced by T <= horizon, with common
// random numbers across the grid. extras: ratio = estimate / (psi_d(n)/n).
struct RangeScan {
  std::vector<EstimateRecord> records;
  EstimateRecord gamma;  // P(T > horizon) from the same sample
  bool partial = false;
};

RangeScan range_excess_scan(int d, std::span<const std::uint64_t> n_grid, std::uint64_t horizon,
                            std::uint64_t samples, std::uint64_t seed, const RunOptions& opt = {});

struct VarianceScan {
  std::vector<EstimateRecord> records;  // estimate = var(q_norm); extras: var_over_n, var_over_n_log2n
  PathwiseAudit audit;
  bool partial = false;
};

// One walk of length max(n_grid) per sample, read at every grid point.
VarianceScan variance_scan(double q, int d, std::span<const std::uint64_t> n_grid,
                           std::uint64_t samples, std::uint64_t seed, const RunOptions& opt = {});

struct CltResult {
  std::vector<double> standardized;
  stats::KsResult ks;
  double kappa_hat = 0.0;
  double v_hat = 0.0;
  bool unsupported_dimension = false;  // d = 3
  PathwiseAudit audit;
  EstimateRecord record;  // estimate = KS statistic; extras: p_value, kappa_hat, v_hat
};

CltResult clt_test(double q, int d, std::uint64_t n, std::uint64_t samples, std::uint64_t seed,
                   const RunOptions& opt = {});

struct TailEstimate {
  EstimateRecord record;  // extras: wilson_lo, wilson_hi, certificate, mean, threshold
  bool certificate = false;
  stats::Interval wilson;
  PathwiseAudit audit;
};

// P(q_norm - mean >= xi n). The mean comes from an independent calibration
// sample. When xi n + mean > n^q (with mean >= n), the event is impossible
// and the estimate is an exact 0 with a certificate.
TailEstimate tail_estimate(double q, int d, std::uint64_t n, double xi, std::uint64_t samples,
                           std::uint64_t seed, const RunOptions& opt = {});

struct PinnedTail {
  TailCurve curve;  // P(l_n(0) >= k) for k in the grid
  double rho_hat = 0.0;
  stats::Interval rho_interval;
  double slope_difference_stderr = 0.0;  // batch-means stderr of slope - log rho
  bool envelope_holds = true;
  bool slope_consistent = false;
  std::vector<std::uint64_t> fit_grid;
};

PinnedTail pinned_tail_check(int d, std::uint64_t n, std::span<const std::uint64_t> k_grid,
                             std::uint64_t samples, std::uint64_t seed, const RunOptions& opt = {});

// Number of lattice points z with |z|_2 <= r.
std::uint64_t ball_volume(int d, std::int64_t r);

class InfeasibleConfiguration : public PreconditionError {
 public:
  InfeasibleConfiguration(const std::string& what, double pre_estimate)
      : PreconditionError(what), pre_estimate_(pre_estimate) {}
  double pre_estimate() const noexcept { return pre_estimate_; }

 private:
  double pre_estimate_;
};

struct ConfinedResult {
  EstimateRecord probability;  // P(|S(k)| <= r for k < n)
  double pre_estimate = 0.0;
  std::uint64_t accepted = 0;
  std::uint64_t ball = 0;  // |B(0, r)|
  double mean_q_norm = 0.0;
  double mean_range = 0.0;
  std::uint64_t holder_violations = 0;  // vs both range and |B(0,r)|
  std::uint64_t range_violations = 0;   // range > |B(0,r)|
  PathwiseAudit audit;
};

inline constexpr double kMinAcceptance = 1e-6;

ConfinedResult confined_sampler(int d, std::uint64_t n, std::int64_t r, double q,
                                std::uint64_t samples, std::uint64_t seed,
                                const RunOptions& opt = {});

struct ConfinementScaling {
  std::vector<ConfinedResult> runs;
  std::vector<double> log_probabilities;
  double relative_spread = 0.0;  // (max - min) / |mean| of log p
};

// n = c r^2 for every radius.
ConfinementScaling confinement_scaling(int d, double c, std::span<const std::int64_t> radii,
                                       double q, std::uint64_t samples, std::uint64_t seed,
                                       const RunOptions& opt = {});

struct IntersectionScan {
  TailCurve by_k;       // threshold k, probability slot = E[l_n(D~(k))]
  TailCurve x_tail;     // P(X > t), X = l_n(D~(1)) / |D~(1)|^{2/d}
  double k_slope = 0.0;
  double k_slope_stderr = 0.0;
  double x_slope = 0.0;
};

IntersectionScan intersection_decay_scan(int d, std::uint64_t n,
                                         std::span<const std::uint64_t> k_grid,
                                         std::uint64_t samples, std::uint64_t seed,
                                         const RunOptions& opt = {});

struct LevelRow {
  int level = 0;  // counts in [2^level, 2^{level+1})
  double mean_fraction = 0.0;
  double mean_contribution = 0.0;
  double top_contribution = 0.0;  // mean over the conditioned paths
  double excess = 0.0;            // top_contribution - mean_contribution
  double max_volume_ratio = 0.0;  // max over paths of |D_i| 2^i / n
};

enum class ShapeSignature { None, A, B };

struct LevelProfile {
  std::vector<LevelRow> rows;
  int argmax_unconditional = 0;
  int argmax_conditioned = 0;
  int argmax_excess = 0;
  ShapeSignature signature = ShapeSignature::None;
  std::uint64_t conditioned_paths = 0;
  std::uint64_t partition_violations = 0;  // per-path sum of contributions != q_norm
  PathwiseAudit audit;
};

// top_fraction in (0, 1]: condition on the largest q_norm values; 0 = no conditioning.
LevelProfile level_profile(double q, int d, std::uint64_t n, std::uint64_t samples,
                           std::uint64_t seed, double top_fraction, const RunOptions& opt = {});

std::string to_string(ShapeSignature s);

}  // namespace slt
