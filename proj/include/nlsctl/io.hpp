#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlsctl/grid.hpp"

namespace nlsctl {

struct SnapshotError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Binary field file: "NLSF", u32 version, u32 dim, u64 count per axis, then
// little-endian f64 (re, im) pairs in row-major order.
inline constexpr std::uint32_t snapshot_version = 1;

struct Snapshot {
  std::vector<std::uint64_t> counts;
  std::vector<cplx> values;
};

void write_snapshot(const std::string& path, const ComplexField& field);
void write_snapshot(const std::string& path, const Snapshot& snap,
                    std::uint32_t version = snapshot_version);
Snapshot read_snapshot(const std::string& path);
// Reattaches a domain; the counts must match.
ComplexField snapshot_field(const Snapshot& snap, const RectDomain& domain);

// Columns of equal length under a header row, full double precision.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);
// Header plus rows of doubles; throws on ragged or non-numeric rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
CsvTable read_csv(const std::string& path);

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
};
struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
};
// Minimal SVG line plot with axes, ticks at the range ends and a legend.
void write_svg_plot(const std::string& path, const PlotSpec& spec,
                    const std::vector<PlotSeries>& series);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunRecord {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<std::string> outputs;  // relative to out_dir
  nlohmann::json summary = nlohmann::json::object();
  std::vector<CheckResult> checks;
  std::string config;  // resolved configuration text
  std::string failure;  // stage failure message, empty when none
  double wall_time = 0.0;

  bool passed() const;
  nlohmann::json to_json() const;
};

void write_run_record(const RunRecord& rec);  // out_dir/summary.json
// Every referenced output exists and parses by its extension.
bool verify_outputs(const RunRecord& rec, std::string* problem = nullptr);

}  // namespace nlsctl
