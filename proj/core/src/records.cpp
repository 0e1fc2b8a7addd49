#include "slt/records.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <system_error>

#include "json.hpp"
#include "slt/errors.hpp"

namespace slt {

using nlohmann::ordered_json;

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  double x = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("cannot parse '" + text + "' as a number");
  }
  return x;
}

namespace {

template <class Int>
Int parse_int(const std::string& text) {
  Int x{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("cannot parse '" + text + "' as an integer");
  }
  return x;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

template <class T>
std::string opt_text(const std::optional<T>& v) {
  if (!v) return {};
  if constexpr (std::is_floating_point_v<T>) {
    return format_double(*v);
  } else {
    return std::to_string(*v);
  }
}

constexpr const char* kHeader = "name,d,q,n,xi,samples,estimate,stderr,seed,config_hash";

ordered_json number_or_null(double x) {
  return std::isfinite(x) ? ordered_json(x) : ordered_json(nullptr);
}

double number_from(const ordered_json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

ordered_json record_json(const EstimateRecord& r) {
  ordered_json j;
  j["name"] = r.name;
  j["d"] = r.d ? ordered_json(*r.d) : ordered_json(nullptr);
  j["q"] = r.q ? number_or_null(*r.q) : ordered_json(nullptr);
  j["n"] = r.n ? ordered_json(*r.n) : ordered_json(nullptr);
  j["xi"] = r.xi ? number_or_null(*r.xi) : ordered_json(nullptr);
  j["samples"] = r.samples;
  j["estimate"] = number_or_null(r.estimate);
  j["stderr"] = number_or_null(r.stderr_);
  j["seed"] = r.seed;
  j["config_hash"] = r.config_hash;
  ordered_json extras = ordered_json::object();
  for (const auto& [k, v] : r.extras) extras[k] = number_or_null(v);
  j["extras"] = extras;
  return j;
}

EstimateRecord record_from(const ordered_json& j) {
  EstimateRecord r;
  r.name = j.at("name").get<std::string>();
  if (!j.at("d").is_null()) r.d = j.at("d").get<int>();
  if (!j.at("q").is_null()) r.q = j.at("q").get<double>();
  if (!j.at("n").is_null()) r.n = j.at("n").get<std::int64_t>();
  if (!j.at("xi").is_null()) r.xi = j.at("xi").get<double>();
  r.samples = j.at("samples").get<std::uint64_t>();
  r.estimate = number_from(j.at("estimate"));
  r.stderr_ = number_from(j.at("stderr"));
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config_hash = j.at("config_hash").get<std::string>();
  if (j.contains("extras")) {
    for (const auto& [k, v] : j.at("extras").items()) r.extras[k] = number_from(v);
  }
  return r;
}

}  // namespace

void write_records_csv(std::ostream& out, std::span<const EstimateRecord> records) {
  out << kHeader << '\n';
  for (const auto& r : records) {
    out << csv_field(r.name) << ',' << opt_text(r.d) << ',' << opt_text(r.q) << ','
        << opt_text(r.n) << ',' << opt_text(r.xi) << ',' << r.samples << ','
        << format_double(r.estimate) << ',' << format_double(r.stderr_) << ',' << r.seed << ','
        << csv_field(r.config_hash) << '\n';
  }
}

std::vector<EstimateRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw ConfigError("records csv: missing or unexpected header");
  }
  std::vector<EstimateRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 10) {
      throw ConfigError("records csv line " + std::to_string(lineno) + ": expected 10 fields");
    }
    EstimateRecord r;
    r.name = f[0];
    if (!f[1].empty()) r.d = parse_int<int>(f[1]);
    if (!f[2].empty()) r.q = parse_double(f[2]);
    if (!f[3].empty()) r.n = parse_int<std::int64_t>(f[3]);
    if (!f[4].empty()) r.xi = parse_double(f[4]);
    r.samples = parse_int<std::uint64_t>(f[5]);
    r.estimate = parse_double(f[6]);
    r.stderr_ = parse_double(f[7]);
    r.seed = parse_int<std::uint64_t>(f[8]);
    r.config_hash = f[9];
    out.push_back(std::move(r));
  }
  return out;
}

std::string records_to_json(std::span<const EstimateRecord> records) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["records"] = ordered_json::array();
  for (const auto& r : records) j["records"].push_back(record_json(r));
  return j.dump(2) + "\n";
}

std::vector<EstimateRecord> records_from_json(const std::string& text) {
  std::vector<EstimateRecord> out;
  try {
    const auto j = ordered_json::parse(text);
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw ConfigError("records json: unsupported schema_version");
    }
    for (const auto& r : j.at("records")) out.push_back(record_from(r));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("records json: ") + e.what());
  }
  return out;
}

std::string tail_curve_to_json(const TailCurve& c) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = c.name;
  j["samples"] = c.samples;
  j["seed"] = c.seed;
  j["reference_slope"] = number_or_null(c.reference_slope);
  j["fitted_slope"] = number_or_null(c.fitted_slope);
  j["fitted_slope_stderr"] = number_or_null(c.fitted_slope_stderr);
  j["points"] = ordered_json::array();
  for (const auto& p : c.points) {
    j["points"].push_back({{"threshold", number_or_null(p.threshold)},
                           {"probability", number_or_null(p.probability)},
                           {"stderr", number_or_null(p.stderr_)},
                           {"count", p.count}});
  }
  ordered_json extras = ordered_json::object();
  for (const auto& [k, v] : c.extras) extras[k] = number_or_null(v);
  j["extras"] = extras;
  return j.dump(2) + "\n";
}

TailCurve tail_curve_from_json(const std::string& text) {
  TailCurve c;
  try {
    const auto j = ordered_json::parse(text);
    c.name = j.at("name").get<std::string>();
    c.samples = j.at("samples").get<std::uint64_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.reference_slope = number_from(j.at("reference_slope"));
    c.fitted_slope = number_from(j.at("fitted_slope"));
    c.fitted_slope_stderr = number_from(j.at("fitted_slope_stderr"));
    for (const auto& p : j.at("points")) {
      c.points.push_back({number_from(p.at("threshold")), number_from(p.at("probability")),
                          number_from(p.at("stderr")), p.at("count").get<std::uint64_t>()});
    }
    for (const auto& [k, v] : j.at("extras").items()) c.extras[k] = number_from(v);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("tail curve json: ") + e.what());
  }
  return c;
}

void write_tail_csv(std::ostream& out, const TailCurve& c) {
  out << "threshold,probability,stderr,count\n";
  for (const auto& p : c.points) {
    out << format_double(p.threshold) << ',' << format_double(p.probability) << ','
        << format_double(p.stderr_) << ',' << p.count << '\n';
  }
}

void write_plot_data(std::ostream& out, std::span<const PlotPoint> points) {
  out << "# x y err\n";
  for (const auto& p : points) {
    out << format_double(p.x) << ' ' << format_double(p.y) << ' ' << format_double(p.err) << '\n';
  }
}

void write_records(const std::filesystem::path& path, std::span<const EstimateRecord> records,
                   RecordFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (format == RecordFormat::Csv) {
    write_records_csv(out, records);
  } else {
    out << records_to_json(records);
  }
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

std::vector<EstimateRecord> read_records(const std::filesystem::path& path, RecordFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  if (format == RecordFormat::Csv) return read_records_csv(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return records_from_json(ss.str());
}

}  // namespace slt
