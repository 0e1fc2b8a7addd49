#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace slt {

inline constexpr int kSchemaVersion = 1;

// One Monte Carlo point estimate plus what is needed to rerun it.
struct EstimateRecord {
  std::string name;
  std::optional<int> d;
  std::optional<double> q;
  std::optional<std::int64_t> n;
  std::optional<double> xi;
  std::uint64_t samples = 0;
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  // Carried by JSON only.
  std::map<std::string, double> extras;

  friend bool operator==(const EstimateRecord&, const EstimateRecord&) = default;
};

struct TailPoint {
  double threshold = 0.0;
  double probability = 0.0;
  double stderr_ = 0.0;
  std::uint64_t count = 0;
  friend bool operator==(const TailPoint&, const TailPoint&) = default;
};

struct TailCurve {
  std::string name;
  std::vector<TailPoint> points;
  double reference_slope = 0.0;
  double fitted_slope = 0.0;
  double fitted_slope_stderr = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  std::map<std::string, double> extras;
  friend bool operator==(const TailCurve&, const TailCurve&) = default;
};

struct PlotPoint {
  double x = 0.0;
  double y = 0.0;
  double err = 0.0;
};

// Shortest decimal form that parses back to the same double.
std::string format_double(double x);
double parse_double(const std::string& text);

// Header name,d,q,n,xi,samples,estimate,stderr,seed,config_hash; LF endings.
void write_records_csv(std::ostream& out, std::span<const EstimateRecord> records);
std::vector<EstimateRecord> read_records_csv(std::istream& in);

std::string records_to_json(std::span<const EstimateRecord> records);
std::vector<EstimateRecord> records_from_json(const std::string& text);

std::string tail_curve_to_json(const TailCurve& curve);
TailCurve tail_curve_from_json(const std::string& text);
// threshold,probability,stderr,count
void write_tail_csv(std::ostream& out, const TailCurve& curve);

// Whitespace-separated "x y err" lines after a '#' header.
void write_plot_data(std::ostream& out, std::span<const PlotPoint> points);

enum class RecordFormat { Csv, Json };

void write_records(const std::filesystem::path& path, std::span<const EstimateRecord> records,
                   RecordFormat format);
std::vector<EstimateRecord> read_records(const std::filesystem::path& path, RecordFormat format);

}  // namespace slt
