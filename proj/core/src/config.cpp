#include "slt/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "slt/analytic.hpp"
#include "slt/errors.hpp"
#include "slt/lattice_walk.hpp"
#include "slt/records.hpp"

namespace slt {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const ConfigEntry& e, const std::string& why) {
  throw ConfigError(e.origin + ": " + e.key + "=" + e.value + ": " + why);
}

// Accepts 123, 2^12 and integral floats such as 1e6.
std::uint64_t parse_uint(const ConfigEntry& e, const std::string& text) {
  std::uint64_t x = 0;
  const char* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, x);
  if (res.ec == std::errc() && res.ptr == end) return x;
  if (const auto caret = text.find('^'); caret != std::string::npos) {
    std::uint64_t base = 0;
    std::uint64_t exp = 0;
    const auto* mid = text.data() + caret;
    const auto r1 = std::from_chars(text.data(), mid, base);
    const auto r2 = std::from_chars(mid + 1, end, exp);
    if (r1.ec == std::errc() && r1.ptr == mid && r2.ec == std::errc() && r2.ptr == end) {
      std::uint64_t v = 1;
      for (std::uint64_t i = 0; i < exp; ++i) {
        if (base != 0 && v > UINT64_MAX / base) fail(e, "value overflows 64 bits");
        v *= base;
      }
      return v;
    }
  }
  double dv = 0.0;
  const auto r3 = std::from_chars(text.data(), end, dv);
  if (r3.ec == std::errc() && r3.ptr == end && dv >= 0.0 && dv <= 9007199254740992.0 &&
      std::floor(dv) == dv) {
    return static_cast<std::uint64_t>(dv);
  }
  fail(e, "'" + text + "' is not a non-negative integer");
}

std::int64_t parse_int(const ConfigEntry& e, const std::string& text) {
  if (!text.empty() && text[0] == '-') {
    const auto v = parse_uint(e, text.substr(1));
    if (v > static_cast<std::uint64_t>(INT64_MAX)) fail(e, "value out of range");
    return -static_cast<std::int64_t>(v);
  }
  const auto v = parse_uint(e, text);
  if (v > static_cast<std::uint64_t>(INT64_MAX)) fail(e, "value out of range");
  return static_cast<std::int64_t>(v);
}

double parse_real(const ConfigEntry& e, const std::string& text) {
  double x = 0.0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, x);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(x)) {
    fail(e, "'" + text + "' is not a finite number");
  }
  return x;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Comma list; an item "a..b" expands to a, a+1, ..., b.
template <class Int, class Parse>
std::vector<Int> parse_int_list(const ConfigEntry& e, Parse parse) {
  std::vector<Int> out;
  for (const auto& item : split_list(e.value)) {
    if (const auto dots = item.find(".."); dots != std::string::npos) {
      const auto lo = parse(e, item.substr(0, dots));
      const auto hi = parse(e, item.substr(dots + 2));
      if (hi < lo) fail(e, "empty range '" + item + "'");
      if (hi - lo > 100000) fail(e, "range '" + item + "' is too long");
      for (auto v = lo; v <= hi; ++v) out.push_back(static_cast<Int>(v));
    } else {
      out.push_back(static_cast<Int>(parse(e, item)));
    }
  }
  if (out.empty()) fail(e, "empty list");
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

int to_dimension(const ConfigEntry& e) {
  const auto v = parse_int(e, e.value);
  if (v < 1 || v > ResourceLimits{}.max_dimension) {
    fail(e, "d must lie in [1, " + std::to_string(ResourceLimits{}.max_dimension) + "]");
  }
  return static_cast<int>(v);
}

void apply(ExperimentConfig& c, const ConfigEntry& e) {
  const auto& k = e.key;
  if (k == "d") {
    c.d = to_dimension(e);
  } else if (k == "q") {
    c.q = parse_real(e, e.value);
  } else if (k == "n") {
    c.n = parse_uint(e, e.value);
  } else if (k == "n_grid") {
    c.n_grid = parse_int_list<std::uint64_t>(e, [](const ConfigEntry& x, const std::string& s) {
      return parse_uint(x, s);
    });
  } else if (k == "xi") {
    c.xi = parse_real(e, e.value);
  } else if (k == "xi_grid") {
    c.xi_grid.clear();
    for (const auto& item : split_list(e.value)) c.xi_grid.push_back(parse_real(e, item));
    if (c.xi_grid.empty()) fail(e, "empty list");
  } else if (k == "L") {
    const auto v = parse_int(e, e.value);
    if (v < 0 || v > 30) fail(e, "L must lie in [0, 30]");
    c.L = static_cast<int>(v);
  } else if (k == "M") {
    if (e.value == "none" || e.value.empty()) {
      c.M.reset();
    } else {
      c.M = parse_real(e, e.value);
    }
  } else if (k == "radius") {
    c.radius = parse_int(e, e.value);
  } else if (k == "radii") {
    c.radii = parse_int_list<std::int64_t>(e, [](const ConfigEntry& x, const std::string& s) {
      return parse_int(x, s);
    });
  } else if (k == "ratio") {
    c.ratio = parse_real(e, e.value);
  } else if (k == "k_grid") {
    c.k_grid = parse_int_list<std::uint64_t>(e, [](const ConfigEntry& x, const std::string& s) {
      return parse_uint(x, s);
    });
  } else if (k == "d_grid") {
    c.d_grid = parse_int_list<int>(e, [](const ConfigEntry& x, const std::string& s) {
      return parse_int(x, s);
    });
  } else if (k == "samples") {
    c.samples = parse_uint(e, e.value);
  } else if (k == "horizon") {
    c.horizon = parse_uint(e, e.value);
  } else if (k == "seed") {
    c.seed = parse_uint(e, e.value);
  } else if (k == "ladder") {
    if (e.value != "dyadic" && e.value != "uniform" && e.value != "mixed") {
      fail(e, "ladder must be one of dyadic, uniform, mixed");
    }
    c.ladder = e.value;
  } else if (k == "top_fraction") {
    c.top_fraction = parse_real(e, e.value);
  } else if (k == "threads") {
    const auto v = parse_uint(e, e.value);
    if (v < 1 || v > 1024) fail(e, "threads must lie in [1, 1024]");
    c.threads = static_cast<unsigned>(v);
  } else if (k == "step_budget") {
    c.step_budget = parse_uint(e, e.value);
  } else if (k == "output_dir") {
    c.output_dir = e.value;
  } else if (k == "prefix") {
    if (e.value.empty() || e.value.find('/') != std::string::npos) {
      fail(e, "prefix must be a non-empty file name");
    }
    c.prefix = e.value;
  } else {
    throw ConfigError(e.origin + ": unknown key '" + k + "'");
  }
}

void need(bool cond, const std::string& what) {
  if (!cond) throw ConfigError("precondition violated: " + what);
}

void need_transient(const ExperimentConfig& c) {
  need(c.d >= 3, c.subcommand + " requires a transient walk, d >= 3 (got d=" +
                     std::to_string(c.d) + ")");
}

void need_steps(std::uint64_t n) {
  need(n >= 1 && n <= static_cast<std::uint64_t>(ResourceLimits{}.max_steps),
       "n must lie in [1, 2^31] (got " + std::to_string(n) + ")");
}

}  // namespace

std::string ExperimentConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["subcommand"] = subcommand;
  kv["d"] = std::to_string(d);
  kv["q"] = format_double(q);
  kv["n"] = std::to_string(n);
  kv["n_grid"] = join(n_grid);
  kv["xi"] = format_double(xi);
  kv["xi_grid"] = join(xi_grid);
  kv["L"] = std::to_string(L);
  kv["M"] = M ? format_double(*M) : "none";
  kv["radius"] = std::to_string(radius);
  kv["radii"] = join(radii);
  kv["ratio"] = format_double(ratio);
  kv["k_grid"] = join(k_grid);
  kv["d_grid"] = join(d_grid);
  kv["samples"] = std::to_string(samples);
  kv["horizon"] = std::to_string(horizon);
  kv["seed"] = std::to_string(seed);
  kv["ladder"] = ladder;
  kv["top_fraction"] = format_double(top_fraction);
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : canonical()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{
      "simulate", "verify-sandwich", "estimate-gamma", "estimate-kappa",
      "variance-scan", "clt-test", "tail", "pinned",
      "confined", "intersection-scan", "level-profile", "shape-crossover"};
  return names;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "d", "q", "n", "n_grid", "xi", "xi_grid", "L", "M", "radius", "radii", "ratio", "k_grid",
      "d_grid", "samples", "horizon", "seed", "ladder", "top_fraction", "threads", "step_budget",
      "output_dir", "prefix"};
  return keys;
}

std::vector<ConfigEntry> parse_config_text(const std::string& text, const std::string& source) {
  std::vector<ConfigEntry> out;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string origin = source + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ": expected key = value");
    ConfigEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), origin};
    if (e.key.empty()) throw ConfigError(origin + ": empty key");
    out.push_back(std::move(e));
  }
  return out;
}

ExperimentConfig load_config(const std::string& subcommand,
                             const std::optional<std::filesystem::path>& path,
                             const std::vector<ConfigEntry>& flags) {
  const auto& names = subcommands();
  if (std::find(names.begin(), names.end(), subcommand) == names.end()) {
    throw ConfigError("unknown subcommand '" + subcommand + "'");
  }
  ExperimentConfig c;
  c.subcommand = subcommand;
  c.output_dir = default_output_dir();
  c.prefix = subcommand;
  if (path) {
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path->string());
    std::stringstream ss;
    ss << in.rdbuf();
    for (const auto& e : parse_config_text(ss.str(), path->string())) apply(c, e);
  }
  for (const auto& e : flags) apply(c, e);
  validate(c);
  return c;
}

void validate(const ExperimentConfig& c) {
  const auto& s = c.subcommand;
  if (s == "shape-crossover") {
    for (const int d : c.d_grid) need(d >= 3, "shape-crossover needs d >= 3 in d_grid");
    need(c.q >= 1.0, "q >= 1");
    return;
  }
  need(c.samples >= 1, "samples >= 1");
  if (s == "simulate") {
    need_steps(c.n);
    need(c.q >= 1.0, "q >= 1");
    return;
  }
  if (s == "verify-sandwich") {
    need_steps(c.n);
    need(c.q > 1.0, "verify-sandwich needs q > 1");
    need(c.L >= 1, "L >= 1");
    need(std::uint64_t{1} << c.L <= c.n, "2^L <= n");
    if (c.M) need(*c.M >= 1.0, "M >= 1");
    if (c.ladder != "dyadic") {
      need(c.xi > 0.0, "xi > 0 for the " + c.ladder + " ladder");
      need(c.d >= 3, "the " + c.ladder + " ladder needs d >= 3");
    }
    return;
  }
  if (s == "estimate-gamma") {
    need_transient(c);
    need(c.samples >= 2, "samples >= 2");
    return;
  }
  need(c.samples >= 2, "samples >= 2");
  if (s != "confined" && s != "tail") need_transient(c);
  if (s == "estimate-kappa" || s == "clt-test" || s == "level-profile" || s == "tail") {
    need_steps(c.n);
    need(c.q >= 1.0, "q >= 1");
  }
  if (s == "clt-test") need(c.n >= 2, "n >= 2");
  if (s == "level-profile") {
    need(c.top_fraction >= 0.0 && c.top_fraction <= 1.0, "top_fraction in [0, 1]");
  }
  if (s == "variance-scan") {
    need(c.q >= 1.0, "q >= 1");
    for (const auto n : c.n_grid) {
      need_steps(n);
      need(n >= 2, "n_grid values >= 2");
    }
  }
  if (s == "pinned" || s == "intersection-scan") {
    need_steps(c.n);
    for (const auto k : c.k_grid) need(k >= 1, "k_grid values >= 1");
  }
  if (s == "pinned") need(c.samples >= 40, "pinned needs samples >= 40");
  if (s == "confined") {
    need(c.q >= 1.0, "q >= 1");
    if (c.radius > 0) {
      need_steps(c.n);
    } else {
      need(c.radii.size() >= 2, "confined needs radius > 0 or at least two radii");
      need(c.ratio > 0.0, "ratio > 0");
      for (const auto r : c.radii) {
        need(r >= 1, "radii >= 1");
        need_steps(static_cast<std::uint64_t>(std::llround(c.ratio * static_cast<double>(r * r))));
      }
    }
  }
}

std::filesystem::path default_output_dir() {
  if (const char* env = std::getenv("SLT_OUTPUT_DIR"); env && *env) return env;
  return ".";
}

}  // namespace slt
