// Acceptance suite: one PASS/FAIL line per criterion, printed at the end.
// Every sample size, seed and tolerance is fixed here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "slt/analytic.hpp"
#include "slt/config.hpp"
#include "slt/decomposition.hpp"
#include "slt/experiment.hpp"
#include "slt/local_times.hpp"
#include "slt/montecarlo.hpp"
#include "slt/records.hpp"
#include "slt/stats.hpp"

namespace {

namespace fs = std::filesystem;
using slt::format_double;

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Pathwise audit shared by every experiment in the run.
slt::PathwiseAudit g_audit;
std::uint64_t g_extra_violations = 0;

std::string fmt(double x, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << x;
  return s.str();
}

// ---------------------------------------------------------------------------

Outcome sandwich_suite() {
  const std::int64_t n = 4096;
  const int max_depth = 6;
  const std::uint64_t paths = 10000;
  const double qs[] = {1.5, 2.0, 2.5, 3.0};
  const auto sub = slt::Subdivision::dyadic(static_cast<double>(n));
  std::uint64_t reports = 0, violations = 0, inexact_integer = 0;
  double worst_gap = 0.0;
  for (const int d : {3, 4, 5}) {
    const std::uint64_t seed = 1001 + static_cast<std::uint64_t>(d);
    for (std::uint64_t i = 0; i < paths; ++i) {
      slt::RngStream rng(seed, i);
      const auto inc = slt::generate_increments(d, n, rng);
      const slt::StrandProfile profile(inc, max_depth);
      for (const double q : qs) {
        for (int L = 1; L <= max_depth; ++L) {
          const auto r = profile.report(L, q, sub);
          ++reports;
          if (!r.holds()) {
            ++violations;
            if (violations <= 3) std::cerr << "  violation d=" << d << " replica " << i << ": " << slt::to_json(r) << "\n";
          }
          if ((q == 2.0 || q == 3.0) && !r.exact) ++inexact_integer;
          worst_gap = std::max(worst_gap, (r.upper - r.value) / r.value);
          if (L == 1) g_audit.check(profile.window_counts(0), static_cast<std::uint64_t>(n), q, r.value);
        }
      }
    }
  }
  g_extra_violations += violations;
  return {violations == 0 && inexact_integer == 0,
          std::to_string(3 * paths) + " paths, d in {3,4,5}, n=4096, L=1..6, q in {1.5,2,2.5,3}: " +
              std::to_string(reports) + " reports, " + std::to_string(violations) +
              " violations, " + std::to_string(inexact_integer) +
              " integer-q reports not exact; max (upper-value)/value = " + fmt(worst_gap)};
}

Outcome elementary_suite() {
  const double qs[] = {1.1, 1.5, 2.0, 3.0, 4.0};
  std::uint64_t checks = 0, failures = 0;
  for (const double q : qs) {
    const auto dyadic = slt::Subdivision::dyadic(128.0);
    const auto uniform =
        slt::build_subdivision(slt::SubdivisionKind::UniformGamma, q, 1.0, 4096, 3).extended_to(128.0);
    for (const auto* sub : {&dyadic, &uniform}) {
      for (std::uint64_t a = 0; a <= 64; ++a) {
        for (std::uint64_t b = 0; b <= 64; ++b) {
          if (a == 0 && b == 0) continue;
          ++checks;
          if (!slt::elementary_inequality_check(a, b, q, *sub)) ++failures;
        }
      }
    }
  }
  return {failures == 0, std::to_string(checks) +
                             " checks (l1,l2 in 0..64, q in {1.1,1.5,2,3,4}, dyadic and "
                             "uniform ladders), " + std::to_string(failures) + " failures"};
}

Outcome reconstruction_suite() {
  const std::int64_t n = 1000;
  std::uint64_t mismatches = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const int d = 3 + static_cast<int>(i % 3);
    slt::RngStream rng(3003, i);
    const auto inc = slt::generate_increments(d, n, rng);
    const auto n1 = 1 + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n - 1)));
    const auto [a, b] = slt::split_strands(inc, n1);
    const auto full = slt::accumulate(inc);
    const auto ref = slt::positions(inc)[static_cast<std::size_t>(n1)];
    std::uint64_t mass = 0;
    for (std::size_t s = 0; s < full.site_count(); ++s) {
      const auto z = ref - full.site(s);
      const auto la = a.count_at(z), lb = b.count_at(z);
      if (full.counts()[s] != la + lb) ++mismatches;
      mass += la + lb;
    }
    if (mass != static_cast<std::uint64_t>(n) || a.window_length() + b.window_length() != static_cast<std::uint64_t>(n)) {
      ++mismatches;
    }
  }
  return {mismatches == 0,
          "10000 random splits, n=1000, d in {3,4,5}: " + std::to_string(mismatches) + " site mismatches"};
}

Outcome kappa_consistency() {
  const auto gamma = slt::estimate_gamma(3, 1000000, 1000000, 5005);
  const double rho = 1.0 - gamma.record.estimate;
  const double rho_se = gamma.record.stderr_;
  const std::uint64_t n = 100000;
  const auto k = slt::estimate_kappa(2.0, 3, n, 10000, 5006);
  g_audit.merge(k.audit);
  const double predicted = slt::kappa_predict(2.0, 3, rho);
  const double dk = 2.0 / ((1.0 - rho) * (1.0 - rho));
  const double combined = std::sqrt(k.kappa.stderr_ * k.kappa.stderr_ + dk * dk * rho_se * rho_se);
  const double allowance = 3.0 * combined + 10.0 * slt::psi(3, static_cast<std::int64_t>(n)) / static_cast<double>(n);
  const double diff = std::fabs(k.kappa.estimate - predicted);
  return {diff <= allowance,
          "rho_hat=" + fmt(rho, 6) + " (+-" + fmt(rho_se, 2) + "), mean q_norm/n=" +
              fmt(k.kappa.estimate, 6) + " (+-" + fmt(k.kappa.stderr_, 2) + "), (1+rho)/(1-rho)=" +
              fmt(predicted, 6) + ", |diff|=" + fmt(diff, 3) + " <= " + fmt(allowance, 3)};
}

Outcome range_mean() {
  std::vector<std::uint64_t> grid;
  for (int e = 12; e <= 17; ++e) grid.push_back(std::uint64_t{1} << e);
  bool pass = true;
  std::string detail;
  for (const int d : {3, 5}) {
    const std::uint64_t horizon = d == 3 ? (std::uint64_t{1} << 22) : (std::uint64_t{1} << 20);
    const auto scan = slt::range_excess_scan(d, grid, horizon, 100000, 6006 + static_cast<std::uint64_t>(d));
    double lo = INFINITY, hi = 0.0;
    std::vector<double> lx, ly;
    for (const auto& r : scan.records) {
      const double ratio = r.extras.at("ratio");
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      lx.push_back(std::log(r.extras.at("psi_over_n")));
      ly.push_back(std::log(std::fabs(r.estimate)));
    }
    const double slope = slt::stats::fit_line(lx, ly).slope;
    const bool ok = lo > 0.0 && hi / lo <= 4.0;
    pass = pass && ok;
    detail += "d=" + std::to_string(d) + ": gamma_hat=" + fmt(scan.gamma.estimate, 5) +
              ", excess/(psi/n) in [" + fmt(lo) + ", " + fmt(hi) + "], max/min=" + fmt(hi / lo) +
              ", log-log slope=" + fmt(slope, 3) + (d == 3 ? "; " : "");
  }
  return {pass, detail + " (bound: max/min <= 4)"};
}

Outcome clt() {
  const auto r = slt::clt_test(1.5, 4, 10000, 10000, 7007);
  g_audit.merge(r.audit);
  return {r.ks.p_value > 0.01, "d=4, q=1.5, n=10^4, 10^4 samples: KS D=" + fmt(r.ks.statistic) +
                                   ", p=" + fmt(r.ks.p_value) + " (need > 0.01); kappa_hat=" +
                                   fmt(r.kappa_hat, 6) + ", v_hat=" + fmt(r.v_hat, 5)};
}

Outcome variance_scaling() {
  std::vector<std::uint64_t> grid;
  for (int e = 10; e <= 16; ++e) grid.push_back(std::uint64_t{1} << e);
  const auto v4 = slt::variance_scan(2.0, 4, grid, 10000, 8004);
  const auto v3 = slt::variance_scan(2.0, 3, grid, 10000, 8003);
  g_audit.merge(v4.audit);
  g_audit.merge(v3.audit);
  std::vector<double> top;
  for (std::size_t i = v4.records.size() - 3; i < v4.records.size(); ++i) {
    top.push_back(v4.records[i].extras.at("var_over_n"));
  }
  const double mean4 = (top[0] + top[1] + top[2]) / 3.0;
  const double spread4 = (*std::max_element(top.begin(), top.end()) - *std::min_element(top.begin(), top.end())) / mean4;
  double lo = INFINITY, hi = 0.0;
  for (const auto& r : v3.records) {
    lo = std::min(lo, r.extras.at("var_over_n_log2n"));
    hi = std::max(hi, r.extras.at("var_over_n_log2n"));
  }
  const bool ok4 = spread4 < 0.15;
  const bool ok3 = lo > 0.0 && hi / lo <= 4.0;
  return {ok4 && ok3, "d=4 var/n at n=2^14..2^16: " + fmt(top[0]) + ", " + fmt(top[1]) + ", " +
                          fmt(top[2]) + ", relative spread " + fmt(spread4, 3) +
                          " (need < 0.15); d=3 var/(n log^2 n) max/min over 2^10..2^16 = " +
                          fmt(hi / lo) + " (need <= 4)"};
}

Outcome pinned() {
  std::vector<std::uint64_t> ks;
  for (std::uint64_t k = 1; k <= 12; ++k) ks.push_back(k);
  const auto p = slt::pinned_tail_check(3, 10000, ks, 200000, 9009);
  return {p.slope_consistent && p.envelope_holds,
          "d=3, n=10^4, 2*10^5 samples: fitted slope " + fmt(p.curve.fitted_slope, 5) +
              " vs log rho_hat " + fmt(p.curve.reference_slope, 5) + ", |diff|=" +
              fmt(std::fabs(p.curve.fitted_slope - p.curve.reference_slope), 3) + " <= 3*" +
              fmt(p.slope_difference_stderr, 3) + ": " + (p.slope_consistent ? "yes" : "no") +
              "; Wilson envelope " + (p.envelope_holds ? "holds" : "exceeded") + " (fit over k=1.." +
              std::to_string(p.fit_grid.empty() ? 0 : p.fit_grid.back()) + ")"};
}

Outcome confinement() {
  const std::vector<std::int64_t> radii{8, 12, 16, 20};
  const auto s = slt::confinement_scaling(3, 3.0, radii, 2.0, 100000, 10010);
  std::string logs;
  for (std::size_t i = 0; i < s.runs.size(); ++i) {
    const auto& r = s.runs[i];
    g_audit.merge(r.audit);
    g_extra_violations += r.range_violations + (r.holder_violations - r.audit.holder_violations);
    logs += (i ? ", " : "") + fmt(s.log_probabilities[i]);
  }
  return {s.relative_spread < 0.20, "d=3, n=3r^2, r in {8,12,16,20}: log P = " + logs +
                                        "; relative spread " + fmt(s.relative_spread, 3) +
                                        " (need < 0.20)"};
}

Outcome shape_analytics() {
  int mismatches = 0, misordered = 0, checked = 0;
  for (int d = 3; d <= 20; ++d) {
    if (!(slt::crossover(d) == slt::critical_q(d))) ++mismatches;
    const auto qc = slt::critical_q(d);
    for (int p = 21; p <= 120; ++p) {
      const slt::Rational qr(p, 20);
      const double q = p / 20.0;
      const auto [a, b] = slt::strategy_costs(q, d);
      const auto dom = slt::dominant_strategy(q, d);
      ++checked;
      if (qr == qc) {
        if (dom.has_value()) ++misordered;
        continue;
      }
      const bool a_cheaper = a.n_exponent < b.n_exponent;
      const bool expect = qr > qc;
      if (a_cheaper != expect || !dom || (*dom == slt::Strategy::A) != expect) ++misordered;
    }
  }
  return {mismatches == 0 && misordered == 0,
          "crossover(d) == critical_q(d) for d=3..20: " + std::to_string(18 - mismatches) +
              "/18; strategy order over " + std::to_string(checked) + " (q,d) pairs, " +
              std::to_string(misordered) + " misordered"};
}

Outcome shape_diagnostic() {
  bool pass = true;
  std::string detail = "d=5, n=10^4, 10^4 samples, top 1%:";
  for (const std::uint64_t seed : {12001ULL, 12002ULL, 12003ULL}) {
    const auto hi = slt::level_profile(3.0, 5, 10000, 10000, seed, 0.01);
    const auto lo = slt::level_profile(1.4, 5, 10000, 10000, seed, 0.01);
    g_audit.merge(hi.audit);
    g_audit.merge(lo.audit);
    g_extra_violations += hi.partition_violations + lo.partition_violations;
    pass = pass && hi.argmax_conditioned > lo.argmax_conditioned;
    detail += " seed " + std::to_string(seed) + ": level " + std::to_string(hi.argmax_conditioned) +
              " (q=3) vs " + std::to_string(lo.argmax_conditioned) + " (q=1.4);";
  }
  return {pass, detail};
}

Outcome intersection() {
  std::vector<std::uint64_t> ks;
  for (std::uint64_t k = 1; k <= 8; ++k) ks.push_back(k);
  const auto a = slt::intersection_decay_scan(3, 1 << 12, ks, 10000, 13012);
  const auto b = slt::intersection_decay_scan(3, 1 << 14, ks, 10000, 13014);
  const bool negative = a.k_slope < 0.0 && b.k_slope < 0.0;
  const double rel = std::fabs(b.k_slope / a.k_slope - 1.0);
  std::vector<double> v;
  const std::vector<std::uint64_t> k1{1};
  for (int e = 10; e <= 13; ++e) {
    const auto s = slt::intersection_decay_scan(5, std::uint64_t{1} << e, k1, 20000, 13500 + static_cast<std::uint64_t>(e));
    v.push_back(s.by_k.points[0].probability);
  }
  const double last = std::fabs(v[3] / v[2] - 1.0);
  std::string vs;
  for (std::size_t i = 0; i < v.size(); ++i) vs += (i ? ", " : "") + fmt(v[i]);
  return {negative && rel <= 0.30 && last <= 0.10,
          "d=3 k-slope " + fmt(a.k_slope) + " (n=2^12), " + fmt(b.k_slope) +
              " (n=2^14), relative change " + fmt(rel, 3) + " (need <= 0.30); d=5 E[l_n(D~(1))] at n=2^10..2^13: " +
              vs + ", last step " + fmt(last, 3) + " (need <= 0.10)"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducibility() {
  const std::vector<std::vector<std::pair<std::string, std::string>>> runs{
      {{"n", "4096"}, {"samples", "200"}},
      {{"n", "4096"}, {"L", "6"}, {"samples", "300"}, {"q", "2.5"}},
      {{"horizon", "100000"}, {"samples", "2000"}},
      {{"n", "10000"}, {"samples", "500"}},
      {{"d", "4"}, {"n_grid", "1024,4096"}, {"samples", "500"}},
      {{"d", "4"}, {"q", "1.5"}, {"n", "2000"}, {"samples", "500"}},
      {{"d", "5"}, {"q", "3"}, {"n", "2000"}, {"xi_grid", "0,0.05,0.1"}, {"samples", "500"}},
      {{"n", "10000"}, {"k_grid", "1..6"}, {"samples", "5000"}},
      {{"radii", "6,8"}, {"ratio", "3"}, {"samples", "3000"}},
      {{"n", "4096"}, {"samples", "500"}},
      {{"d", "5"}, {"q", "3"}, {"n", "4096"}, {"samples", "500"}},
      {{"d_grid", "3..20"}},
  };
  const auto dir = fs::temp_directory_path() / "slt_acceptance_repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto& names = slt::subcommands();
  int identical = 0;
  std::string differing;
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::vector<slt::ConfigEntry> f;
    for (const auto& [k, v] : runs[i]) f.push_back({k, v, "acceptance"});
    f.push_back({"seed", "14014", "acceptance"});
    f.push_back({"output_dir", dir.string(), "acceptance"});
    f.push_back({"prefix", names[i] + "-a", "acceptance"});
    const auto ra = slt::run_experiment(slt::load_config(names[i], std::nullopt, f));
    f.back().value = names[i] + "-b";
    f.push_back({"threads", "2", "acceptance"});
    const auto rb = slt::run_experiment(slt::load_config(names[i], std::nullopt, f));
    g_extra_violations += ra.violations + rb.violations;
    const auto a = slurp(dir / (names[i] + "-a.csv"));
    const auto b = slurp(dir / (names[i] + "-b.csv"));
    if (!a.empty() && a == b) {
      ++identical;
    } else {
      differing += " " + names[i];
    }
  }
  fs::remove_all(dir);
  return {identical == static_cast<int>(names.size()),
          std::to_string(identical) + "/" + std::to_string(names.size()) +
              " subcommands give byte-identical CSV on rerun (1 vs 2 threads)" +
              (differing.empty() ? "" : "; differing:" + differing)};
}

Outcome pathwise_suite() {
  // Dedicated sweep on top of the paths audited by the other experiments.
  for (const int d : {3, 4, 5}) {
    slt::PathSampler ps(d, 4096);
    for (std::uint64_t i = 0; i < 1000; ++i) {
      slt::RngStream rng(4004, i + 1000 * static_cast<std::uint64_t>(d));
      const auto counts = ps.sample(rng, 4096);
      for (const double q : {1.1, 1.5, 2.0, 2.5, 3.0, 4.0}) {
        g_audit.check(counts, 4096, q, slt::power_sum(counts, q));
      }
    }
  }
  const auto& a = g_audit;
  return {a.paths > 0 && a.clean() && g_extra_violations == 0,
          std::to_string(a.paths) + " audited paths: mass " + std::to_string(a.mass_violations) +
              ", Hoelder " + std::to_string(a.holder_violations) + ", level " +
              std::to_string(a.level_violations) + " violations; other pathwise violations " +
              std::to_string(g_extra_violations)};
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  // Criterion 4 runs last so that it sees every audited path.
  const std::vector<Entry> order{
      {1, "sandwich suite", sandwich_suite},
      {2, "elementary inequality", elementary_suite},
      {3, "strand reconstruction", reconstruction_suite},
      {5, "kappa consistency", kappa_consistency},
      {6, "range mean", range_mean},
      {7, "CLT", clt},
      {8, "variance scaling", variance_scaling},
      {9, "geometric pile-up", pinned},
      {10, "confinement scaling", confinement},
      {11, "shape-transition analytics", shape_analytics},
      {12, "shape-transition diagnostic", shape_diagnostic},
      {13, "intersection decay", intersection},
      {14, "reproducibility", reproducibility},
      {4, "Hoelder/mass/level pathwise", pathwise_suite},
  };
  std::vector<std::pair<Outcome, const Entry*>> results(15);
  for (const auto& e : order) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = e.run();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "criterion " << e.id << " (" << e.name << ") finished in " << fmt(secs, 3) << " s\n";
    results[static_cast<std::size_t>(e.id)] = {o, &e};
  }
  int failed = 0;
  for (int id = 1; id <= 14; ++id) {
    const auto& [o, e] = results[static_cast<std::size_t>(id)];
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " " << e->name << ": "
              << o.detail << "\n";
    failed += o.pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all 14 criteria passed" : std::to_string(failed) + " criteria failed")
            << "\n";
  return failed == 0 ? 0 : 1;
}
