#include "slt/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "slt/analytic.hpp"
#include "slt/decomposition.hpp"
#include "slt/errors.hpp"
#include "slt/local_times.hpp"
#include "slt/montecarlo.hpp"
#include "slt/records.hpp"

namespace slt {

using nlohmann::ordered_json;

namespace {

namespace fs = std::filesystem;

struct Outcome {
  std::vector<EstimateRecord> records;
  std::vector<PlotPoint> plot;
  std::vector<TailCurve> curves;
  PathwiseAudit audit;
  std::uint64_t other_violations = 0;  // sandwich, partition, confinement bounds
  bool partial = false;
  ordered_json details = ordered_json::object();
  std::ostringstream text;
};

RunOptions run_options(const ExperimentConfig& c) {
  return RunOptions{c.step_budget, c.threads, c.hash()};
}

EstimateRecord base_record(const ExperimentConfig& c, const std::string& name) {
  EstimateRecord r;
  r.name = name;
  r.d = c.d;
  r.seed = c.seed;
  r.config_hash = c.hash();
  return r;
}

ordered_json audit_json(const PathwiseAudit& a) {
  return {{"paths", a.paths},
          {"mass_violations", a.mass_violations},
          {"holder_violations", a.holder_violations},
          {"level_violations", a.level_violations}};
}

Subdivision ladder_for(const ExperimentConfig& c) {
  const auto n = static_cast<double>(c.n);
  if (c.ladder == "dyadic") return Subdivision::dyadic(n);
  const auto kind = c.ladder == "mixed" ? SubdivisionKind::Mixed : SubdivisionKind::UniformGamma;
  return build_subdivision(kind, c.q, c.xi, static_cast<std::int64_t>(c.n), c.d).extended_to(n);
}

// ---------------------------------------------------------------------------

void run_simulate(const ExperimentConfig& c, Outcome& out) {
  struct Path {
    double q_norm = 0.0;
    std::uint64_t range = 0;
    std::uint64_t max_count = 0;
    PathwiseAudit audit;
  };
  const auto batch = run_replicas<Path, PathSampler>(
      c.samples, c.n, run_options(c), [&] { return PathSampler(c.d, c.n); },
      [&](std::uint64_t i, PathSampler& ps) {
        RngStream rng(c.seed, i);
        const auto counts = ps.sample(rng, c.n);
        Path p;
        p.q_norm = power_sum(counts, c.q);
        p.range = counts.size();
        p.max_count = *std::max_element(counts.begin(), counts.end());
        p.audit.check(counts, c.n, c.q, p.q_norm);
        return p;
      });
  out.partial = batch.partial;
  std::vector<double> qn, range, mx;
  const auto nd = static_cast<double>(c.n);
  for (std::size_t i = 0; i < batch.results.size(); ++i) {
    const auto& p = batch.results[i];
    out.audit.merge(p.audit);
    qn.push_back(p.q_norm / nd);
    range.push_back(static_cast<double>(p.range) / nd);
    mx.push_back(static_cast<double>(p.max_count));
    out.plot.push_back({static_cast<double>(i), p.q_norm / nd, 0.0});
  }
  const auto add = [&](const std::string& name, const std::vector<double>& xs) {
    auto r = base_record(c, name);
    r.q = c.q;
    r.n = static_cast<std::int64_t>(c.n);
    r.samples = xs.size();
    if (xs.size() >= 2) {
      const auto m = stats::moments(xs);
      r.estimate = m.mean;
      r.stderr_ = m.stderr_mean;
    } else if (xs.size() == 1) {
      r.estimate = xs[0];
      r.stderr_ = std::nan("");
    }
    out.records.push_back(r);
  };
  add("q_norm_over_n", qn);
  add("range_over_n", range);
  add("max_local_time", mx);

  // Local times of the first path.
  if (!batch.results.empty()) {
    PathSampler ps(c.d, c.n);
    RngStream rng(c.seed, 0);
    const auto counts = ps.sample(rng, c.n);
    std::ostringstream csv;
    for (int a = 1; a <= c.d; ++a) csv << 'x' << a << ',';
    csv << "count\n";
    std::vector<Coord> xyz(static_cast<std::size_t>(c.d));
    for (std::size_t s = 0; s < counts.size(); ++s) {
      ps.occupancy().coordinates(static_cast<std::uint32_t>(s), xyz);
      for (const auto x : xyz) csv << x << ',';
      csv << counts[s] << '\n';
    }
    out.details["sites_csv"] = csv.str();
  }
  out.text << "simulated " << batch.results.size() << " paths of n=" << c.n << " in d=" << c.d
           << "; mean q_norm/n = " << format_double(out.records[0].estimate) << "\n";
}

void run_verify_sandwich(const ExperimentConfig& c, Outcome& out) {
  const Subdivision sub = ladder_for(c);
  struct PathReport {
    std::vector<std::uint8_t> failed;  // per depth
    std::vector<double> gap;            // (upper - value) / value per depth
    std::string first_failure;
    PathwiseAudit audit;
  };
  const auto batch = run_replicas<PathReport, int>(
      c.samples, c.n, run_options(c), [] { return 0; },
      [&](std::uint64_t i, int&) {
        RngStream rng(c.seed, i);
        const auto inc = generate_increments(c.d, static_cast<std::int64_t>(c.n), rng);
        const StrandProfile profile(inc, c.L);
        PathReport pr;
        const auto& counts = profile.window_counts(0);
        for (int depth = 1; depth <= c.L; ++depth) {
          auto rep = profile.report(depth, c.q, sub, c.M);
          rep.seed = c.seed;
          if (depth == 1) pr.audit.check(counts, c.n, c.q, rep.value);
          pr.failed.push_back(rep.holds() ? 0 : 1);
          pr.gap.push_back((rep.upper - rep.value) / rep.value);
          if (!rep.holds() && pr.first_failure.empty()) {
            pr.first_failure = "replica " + std::to_string(i) + ": " + to_json(rep);
          }
        }
        return pr;
      });
  out.partial = batch.partial;
  std::vector<std::uint64_t> failures(static_cast<std::size_t>(c.L), 0);
  std::vector<double> worst_gap(static_cast<std::size_t>(c.L), 0.0);
  std::vector<stats::CompensatedSum> mean_gap(static_cast<std::size_t>(c.L));
  ordered_json failing = ordered_json::array();
  for (const auto& pr : batch.results) {
    out.audit.merge(pr.audit);
    for (std::size_t j = 0; j < pr.failed.size(); ++j) {
      failures[j] += pr.failed[j];
      worst_gap[j] = std::max(worst_gap[j], pr.gap[j]);
      mean_gap[j].add(pr.gap[j]);
    }
    if (!pr.first_failure.empty() && failing.size() < 10) failing.push_back(pr.first_failure);
  }
  std::uint64_t total = 0;
  for (int depth = 1; depth <= c.L; ++depth) {
    const auto j = static_cast<std::size_t>(depth - 1);
    total += failures[j];
    auto r = base_record(c, "sandwich_violations");
    r.q = c.q;
    r.n = static_cast<std::int64_t>(c.n);
    if (c.ladder != "dyadic") r.xi = c.xi;
    r.samples = batch.results.size();
    r.estimate = static_cast<double>(failures[j]);
    r.stderr_ = 0.0;
    r.extras["L"] = depth;
    r.extras["max_relative_gap"] = worst_gap[j];
    r.extras["mean_relative_gap"] =
        batch.results.empty() ? 0.0 : mean_gap[j].value() / static_cast<double>(batch.results.size());
    if (c.M) r.extras["M"] = *c.M;
    out.records.push_back(r);
    out.plot.push_back({static_cast<double>(depth), r.extras["mean_relative_gap"], 0.0});
  }
  out.other_violations += total;
  out.details["ladder"] = c.ladder;
  out.details["ladder_levels"] = sub.levels();
  out.details["violations"] = total;
  out.details["failing_reports"] = failing;
  out.text << "sandwich: " << batch.results.size() << " paths x " << c.L << " depths, " << total
           << " violations\n";
}

void run_gamma(const ExperimentConfig& c, Outcome& out) {
  const std::uint64_t h = c.horizon ? c.horizon : 1000000;
  const auto g = estimate_gamma(c.d, h, c.samples, c.seed, run_options(c));
  out.partial = g.partial;
  out.records = g.ladder;
  for (const auto& r : g.ladder) {
    out.plot.push_back({static_cast<double>(*r.n), r.estimate, r.stderr_});
  }
  out.text << "gamma_" << c.d << "(horizon " << h << ") = " << format_double(g.record.estimate)
           << " +- " << format_double(g.record.stderr_) << "\n";
}

void run_kappa(const ExperimentConfig& c, Outcome& out) {
  const auto k = estimate_kappa(c.q, c.d, c.n, c.samples, c.seed, run_options(c));
  out.partial = k.partial;
  out.audit = k.audit;
  out.records = {k.kappa, k.range};
  out.plot.push_back({static_cast<double>(c.n), k.kappa.estimate, k.kappa.stderr_});
  out.text << "kappa(q=" << format_double(c.q) << ", d=" << c.d
           << ") ~ " << format_double(k.kappa.estimate) << " +- " << format_double(k.kappa.stderr_)
           << "\n";
}

void run_variance(const ExperimentConfig& c, Outcome& out) {
  const auto v = variance_scan(c.q, c.d, c.n_grid, c.samples, c.seed, run_options(c));
  out.partial = v.partial;
  out.audit = v.audit;
  out.records = v.records;
  for (const auto& r : v.records) {
    out.plot.push_back({static_cast<double>(*r.n), r.extras.at("var_over_n"),
                        r.extras.at("var_over_n_stderr")});
    out.text << "n=" << *r.n << " var/n=" << format_double(r.extras.at("var_over_n")) << "\n";
  }
}

void run_clt(const ExperimentConfig& c, Outcome& out) {
  const auto res = clt_test(c.q, c.d, c.n, c.samples, c.seed, run_options(c));
  out.audit = res.audit;
  out.records = {res.record};
  auto z = res.standardized;
  std::sort(z.begin(), z.end());
  const std::size_t points = std::min<std::size_t>(z.size(), 200);
  for (std::size_t j = 0; j < points; ++j) {
    const std::size_t i = (j * (z.size() - 1)) / std::max<std::size_t>(1, points - 1);
    const double ecdf = static_cast<double>(i + 1) / static_cast<double>(z.size());
    out.plot.push_back({z[i], ecdf, ecdf - stats::normal_cdf(z[i])});
  }
  out.details["ks_statistic"] = res.ks.statistic;
  out.details["p_value"] = res.ks.p_value;
  out.details["unsupported_dimension"] = res.unsupported_dimension;
  if (res.unsupported_dimension) {
    out.text << "warning: the normal limit is not established for d = 3\n";
  }
  out.text << "KS D=" << format_double(res.ks.statistic) << " p=" << format_double(res.ks.p_value)
           << "\n";
}

void run_tail(const ExperimentConfig& c, Outcome& out) {
  const std::vector<double> grid = c.xi_grid.empty() ? std::vector<double>{c.xi} : c.xi_grid;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto t = tail_estimate(c.q, c.d, c.n, grid[j], c.samples,
                                 derive_seed(c.seed, "tail-xi" + std::to_string(j)),
                                 run_options(c));
    out.audit.merge(t.audit);
    auto r = t.record;
    r.seed = c.seed;
    r.extras["stream_seed"] = static_cast<double>(t.record.seed);
    out.records.push_back(r);
    out.plot.push_back({grid[j], r.estimate, r.stderr_});
    out.text << "xi=" << format_double(grid[j]) << " P=" << format_double(r.estimate)
             << (t.certificate ? " (certified: exceeds the maximal q_norm)" : "") << "\n";
  }
}

void run_pinned(const ExperimentConfig& c, Outcome& out) {
  const auto p = pinned_tail_check(c.d, c.n, c.k_grid, c.samples, c.seed, run_options(c));
  out.curves.push_back(p.curve);
  for (const auto& pt : p.curve.points) out.plot.push_back({pt.threshold, pt.probability, pt.stderr_});
  auto rho = base_record(c, "return_probability");
  rho.n = static_cast<std::int64_t>(c.n);
  rho.samples = p.curve.samples;
  rho.estimate = p.rho_hat;
  rho.stderr_ = std::sqrt(p.rho_hat * (1 - p.rho_hat) / static_cast<double>(p.curve.samples));
  rho.extras["wilson_lo"] = p.rho_interval.lo;
  rho.extras["wilson_hi"] = p.rho_interval.hi;
  auto slope = base_record(c, "pinned_slope");
  slope.n = static_cast<std::int64_t>(c.n);
  slope.samples = p.curve.samples;
  slope.estimate = p.curve.fitted_slope;
  slope.stderr_ = p.slope_difference_stderr;
  slope.extras["log_rho_hat"] = p.curve.reference_slope;
  slope.extras["slope_consistent"] = p.slope_consistent ? 1.0 : 0.0;
  slope.extras["envelope_holds"] = p.envelope_holds ? 1.0 : 0.0;
  out.records = {rho, slope};
  out.details["fit_grid"] = p.fit_grid;
  out.text << "slope " << format_double(p.curve.fitted_slope) << " vs log rho "
           << format_double(p.curve.reference_slope) << " (envelope "
           << (p.envelope_holds ? "holds" : "exceeded") << ")\n";
}

void confined_bookkeeping(const ConfinedResult& r, Outcome& out) {
  out.audit.merge(r.audit);
  out.other_violations += r.range_violations + (r.holder_violations - r.audit.holder_violations);
  out.records.push_back(r.probability);
  const double p = r.probability.estimate;
  out.plot.push_back({r.probability.extras.at("radius"), std::log(p), r.probability.stderr_ / p});
  out.text << "r=" << r.probability.extras.at("radius") << " n=" << *r.probability.n
           << " P=" << format_double(p) << " (pre-estimate " << format_double(r.pre_estimate)
           << ")\n";
}

void run_confined(const ExperimentConfig& c, Outcome& out) {
  const auto opt = run_options(c);
  if (c.radius > 0) {
    confined_bookkeeping(confined_sampler(c.d, c.n, c.radius, c.q, c.samples, c.seed, opt), out);
    return;
  }
  const auto s = confinement_scaling(c.d, c.ratio, c.radii, c.q, c.samples, c.seed, opt);
  for (const auto& r : s.runs) confined_bookkeeping(r, out);
  auto spread = base_record(c, "confinement_log_spread");
  spread.q = c.q;
  spread.samples = c.samples;
  spread.estimate = s.relative_spread;
  spread.stderr_ = std::nan("");
  spread.extras["ratio"] = c.ratio;
  out.records.push_back(spread);
  out.text << "relative spread of log P: " << format_double(s.relative_spread) << "\n";
}

void run_intersection(const ExperimentConfig& c, Outcome& out) {
  const auto s = intersection_decay_scan(c.d, c.n, c.k_grid, c.samples, c.seed, run_options(c));
  out.curves = {s.by_k, s.x_tail};
  for (const auto& pt : s.by_k.points) {
    auto r = base_record(c, "intersection_mass");
    r.n = static_cast<std::int64_t>(c.n);
    r.samples = s.by_k.samples;
    r.estimate = pt.probability;
    r.stderr_ = pt.stderr_;
    r.extras["k"] = pt.threshold;
    out.records.push_back(r);
    out.plot.push_back({pt.threshold, pt.probability, pt.stderr_});
  }
  auto ks = base_record(c, "intersection_k_slope");
  ks.n = static_cast<std::int64_t>(c.n);
  ks.samples = s.by_k.samples;
  ks.estimate = s.k_slope;
  ks.stderr_ = s.k_slope_stderr;
  auto xs = base_record(c, "intersection_x_slope");
  xs.n = static_cast<std::int64_t>(c.n);
  xs.samples = s.x_tail.samples;
  xs.estimate = s.x_slope;
  xs.stderr_ = std::nan("");
  out.records.push_back(ks);
  out.records.push_back(xs);
  out.text << "k-slope " << format_double(s.k_slope) << " +- " << format_double(s.k_slope_stderr)
           << "\n";
}

void run_level_profile(const ExperimentConfig& c, Outcome& out) {
  const auto p = level_profile(c.q, c.d, c.n, c.samples, c.seed, c.top_fraction, run_options(c));
  out.audit = p.audit;
  out.other_violations += p.partition_violations;
  for (const auto& row : p.rows) {
    auto r = base_record(c, "level_contribution");
    r.q = c.q;
    r.n = static_cast<std::int64_t>(c.n);
    r.samples = c.samples;
    r.estimate = row.mean_contribution;
    r.stderr_ = std::nan("");
    r.extras["level"] = row.level;
    r.extras["mean_fraction"] = row.mean_fraction;
    r.extras["top_contribution"] = row.top_contribution;
    r.extras["excess"] = row.excess;
    r.extras["max_volume_ratio"] = row.max_volume_ratio;
    out.records.push_back(r);
    out.plot.push_back({static_cast<double>(row.level), row.top_contribution, row.mean_contribution});
  }
  auto a = base_record(c, "level_argmax");
  a.q = c.q;
  a.n = static_cast<std::int64_t>(c.n);
  a.samples = c.samples;
  a.estimate = p.argmax_conditioned;
  a.stderr_ = 0.0;
  a.extras["argmax_unconditional"] = p.argmax_unconditional;
  a.extras["argmax_excess"] = p.argmax_excess;
  a.extras["conditioned_paths"] = static_cast<double>(p.conditioned_paths);
  out.records.push_back(a);
  out.details["signature"] = to_string(p.signature);
  const auto dom = dominant_strategy(c.q, c.d);
  out.details["predicted_strategy"] = dom ? (*dom == Strategy::A ? "A" : "B") : "open (q = q_c)";
  out.text << "argmax level: conditioned " << p.argmax_conditioned << ", unconditional "
           << p.argmax_unconditional << ", excess " << p.argmax_excess << "; signature "
           << to_string(p.signature) << "\n";
}

void run_shape_crossover(const ExperimentConfig& c, Outcome& out) {
  out.text << "   d   crossover   q_c(d)   A n-exp   B n-exp   dominant(q=" << format_double(c.q)
           << ")\n";
  for (const int d : c.d_grid) {
    const Rational x = crossover(d);
    const Rational qc = critical_q(d);
    const auto [a, b] = strategy_costs(c.q, d);
    const auto dom = dominant_strategy(c.q, d);
    EstimateRecord r = base_record(c, "crossover");
    r.d = d;
    r.q = c.q;
    r.samples = 0;
    r.estimate = x.to_double();
    r.stderr_ = 0.0;
    r.extras["numerator"] = static_cast<double>(x.num);
    r.extras["denominator"] = static_cast<double>(x.den);
    r.extras["equals_critical_q"] = x == qc ? 1.0 : 0.0;
    r.extras["a_n_exponent"] = a.n_exponent;
    r.extras["b_n_exponent"] = b.n_exponent;
    r.extras["dominant"] = dom ? (*dom == Strategy::A ? 1.0 : 2.0) : 0.0;
    out.records.push_back(r);
    out.plot.push_back({static_cast<double>(d), x.to_double(), 0.0});
    if (x != qc) ++out.other_violations;
    char line[160];
    std::snprintf(line, sizeof line, "%4d   %4lld/%-4lld   %4lld/%-4lld %9.4f %9.4f   %s\n", d,
                  static_cast<long long>(x.num), static_cast<long long>(x.den),
                  static_cast<long long>(qc.num), static_cast<long long>(qc.den), a.n_exponent,
                  b.n_exponent, dom ? (*dom == Strategy::A ? "A" : "B") : "tie");
    out.text << line;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("write to " + path.string() + " failed");
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& c) {
  validate(c);
  Outcome out;
  const auto& s = c.subcommand;
  if (s == "simulate") {
    run_simulate(c, out);
  } else if (s == "verify-sandwich") {
    run_verify_sandwich(c, out);
  } else if (s == "estimate-gamma") {
    run_gamma(c, out);
  } else if (s == "estimate-kappa") {
    run_kappa(c, out);
  } else if (s == "variance-scan") {
    run_variance(c, out);
  } else if (s == "clt-test") {
    run_clt(c, out);
  } else if (s == "tail") {
    run_tail(c, out);
  } else if (s == "pinned") {
    run_pinned(c, out);
  } else if (s == "confined") {
    run_confined(c, out);
  } else if (s == "intersection-scan") {
    run_intersection(c, out);
  } else if (s == "level-profile") {
    run_level_profile(c, out);
  } else if (s == "shape-crossover") {
    run_shape_crossover(c, out);
  } else {
    throw ConfigError("unknown subcommand '" + s + "'");
  }

  ExperimentResult res;
  res.partial = out.partial;
  res.violations = out.audit.mass_violations + out.audit.holder_violations +
                   out.audit.level_violations + out.other_violations;
  if (res.violations > 0) {
    res.exit_code = kExitVerification;
  } else if (res.partial) {
    res.exit_code = kExitResource;
  }

  // Single writer: every artifact is written here, after all replicas finished.
  fs::create_directories(c.output_dir);
  const fs::path base = c.output_dir / c.prefix;
  const auto path = [&](const std::string& ext) { return fs::path(base.string() + ext); };

  write_records(path(".csv"), out.records, RecordFormat::Csv);
  res.artifacts.push_back(path(".csv"));

  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["subcommand"] = s;
  j["config_hash"] = c.hash();
  ordered_json cfg = ordered_json::object();
  std::istringstream canon(c.canonical());
  for (std::string line; std::getline(canon, line);) {
    const auto eq = line.find('=');
    cfg[line.substr(0, eq)] = line.substr(eq + 1);
  }
  j["config"] = cfg;
  j["status"] = res.violations > 0 ? "verification_failure" : (res.partial ? "partial" : "ok");
  j["partial"] = res.partial;
  j["violations"] = res.violations;
  j["audit"] = audit_json(out.audit);
  if (out.details.contains("sites_csv")) {
    write_text(path(".sites.csv"), out.details["sites_csv"].get<std::string>());
    res.artifacts.push_back(path(".sites.csv"));
    out.details.erase("sites_csv");
  }
  j["details"] = out.details;
  j["records"] = ordered_json::parse(records_to_json(out.records))["records"];
  write_text(path(".json"), j.dump(2) + "\n");
  res.artifacts.push_back(path(".json"));

  std::ostringstream plot;
  write_plot_data(plot, out.plot);
  write_text(path(".plot.dat"), plot.str());
  res.artifacts.push_back(path(".plot.dat"));

  for (std::size_t i = 0; i < out.curves.size(); ++i) {
    const std::string tag = out.curves.size() == 1 ? ".tail" : "." + out.curves[i].name;
    std::ostringstream csv;
    write_tail_csv(csv, out.curves[i]);
    write_text(path(tag + ".csv"), csv.str());
    write_text(path(tag + ".json"), tail_curve_to_json(out.curves[i]));
    res.artifacts.push_back(path(tag + ".csv"));
    res.artifacts.push_back(path(tag + ".json"));
  }

  if (res.partial) out.text << "step budget exhausted: results are partial\n";
  if (res.violations > 0) out.text << res.violations << " pathwise invariant violations\n";
  res.summary = out.text.str();
  return res;
}

}  // namespace slt
