#include "nlsctl/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace nlsctl {

namespace {

constexpr char kMagic[4] = {'N', 'L', 'S', 'F'};

static_assert(std::endian::native == std::endian::little,
              "snapshot writer assumes a little-endian host");

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw SnapshotError("truncated snapshot header: " + path);
  return v;
}

}  // namespace

void write_snapshot(const std::string& path, const Snapshot& snap, std::uint32_t version) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SnapshotError("cannot open " + path);
  out.write(kMagic, 4);
  put<std::uint32_t>(out, version);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(snap.counts.size()));
  for (auto c : snap.counts) put<std::uint64_t>(out, c);
  out.write(reinterpret_cast<const char*>(snap.values.data()),
            static_cast<std::streamsize>(snap.values.size() * sizeof(cplx)));
  if (!out) throw SnapshotError("write failed: " + path);
}

void write_snapshot(const std::string& path, const ComplexField& field) {
  Snapshot s;
  for (int n : field.grid.counts()) s.counts.push_back(static_cast<std::uint64_t>(n));
  s.values = field.values;
  write_snapshot(path, s);
}

Snapshot read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SnapshotError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4)) throw SnapshotError("truncated snapshot header: " + path);
  if (std::memcmp(magic, kMagic, 4) != 0) throw SnapshotError("bad snapshot magic: " + path);
  auto version = get<std::uint32_t>(in, path);
  if (version != snapshot_version)
    throw SnapshotError("unsupported snapshot version " + std::to_string(version) + ": " + path);
  auto dim = get<std::uint32_t>(in, path);
  if (dim < 1 || dim > 2) throw SnapshotError("bad snapshot dimension: " + path);
  Snapshot s;
  std::uint64_t total = 1;
  for (std::uint32_t j = 0; j < dim; ++j) {
    s.counts.push_back(get<std::uint64_t>(in, path));
    if (s.counts.back() == 0 || s.counts.back() > (1u << 24))
      throw SnapshotError("bad snapshot axis count: " + path);
    total *= s.counts.back();
  }
  s.values.resize(total);
  auto bytes = static_cast<std::streamsize>(total * sizeof(cplx));
  if (!in.read(reinterpret_cast<char*>(s.values.data()), bytes))
    throw SnapshotError("truncated snapshot data: " + path);
  if (in.peek() != std::char_traits<char>::eof())
    throw SnapshotError("trailing bytes in snapshot: " + path);
  return s;
}

ComplexField snapshot_field(const Snapshot& snap, const RectDomain& domain) {
  std::vector<int> n;
  for (auto c : snap.counts) n.push_back(static_cast<int>(c));
  if (static_cast<int>(n.size()) != domain.dim())
    throw SnapshotError("snapshot dimension does not match the domain");
  return ComplexField(Grid(domain, n), snap.values);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size()) throw std::invalid_argument("csv header/column mismatch");
  std::size_t rows = columns.empty() ? 0 : columns[0].size();
  for (const auto& c : columns)
    if (c.size() != rows) throw std::invalid_argument("csv columns differ in length");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j][i];
    out << '\n';
  }
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + path);
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) t.header.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream rs(line);
    while (std::getline(rs, cell, ',')) {
      // strtod accepts inf and nan, which the writer can emit.
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') throw std::runtime_error("non-numeric csv cell in " + path);
      row.push_back(v);
    }
    if (row.size() != t.header.size()) throw std::runtime_error("ragged csv row in " + path);
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_svg_plot(const std::string& path, const PlotSpec& spec,
                    const std::vector<PlotSeries>& series) {
  const double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
  auto tx = [&](double v) { return spec.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      double a = tx(s.x[i]), b = ty(s.y[i]);
      if (!std::isfinite(a) || !std::isfinite(b)) continue;
      x0 = std::min(x0, a), x1 = std::max(x1, a), y0 = std::min(y0, b), y1 = std::max(y1, b);
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double a) { return L + (a - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double b) { return H - B - (b - y0) / (y1 - y0) * (H - T - B); };
  auto label = [](double v, bool lg) {
    std::ostringstream s;
    s << std::setprecision(4) << (lg ? std::pow(10.0, v) : v);
    return s.str();
  };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << spec.title << "</text>\n";
  out << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\""
      << H - T - B << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << L << "\" y=\"" << H - B + 16 << "\">" << label(x0, spec.log_x) << "</text>\n";
  out << "<text x=\"" << W - R << "\" y=\"" << H - B + 16 << "\" text-anchor=\"end\">"
      << label(x1, spec.log_x) << "</text>\n";
  out << "<text x=\"" << L - 4 << "\" y=\"" << H - B << "\" text-anchor=\"end\">" << label(y0, spec.log_y)
      << "</text>\n";
  out << "<text x=\"" << L - 4 << "\" y=\"" << T + 10 << "\" text-anchor=\"end\">"
      << label(y1, spec.log_y) << "</text>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << spec.x_label
      << "</text>\n";
  out << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
      << ")\" text-anchor=\"middle\">" << spec.y_label << "</text>\n";
  out << std::setprecision(6);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    out << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << colors[k % 6] << "\" points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      double a = tx(s.x[i]), b = ty(s.y[i]);
      if (std::isfinite(a) && std::isfinite(b)) out << px(a) << ',' << py(b) << ' ';
    }
    out << "\"/>\n";
    out << "<text x=\"" << W - R - 6 << "\" y=\"" << T + 16 + 14 * k << "\" text-anchor=\"end\" fill=\""
        << colors[k % 6] << "\">" << s.name << "</text>\n";
  }
  out << "</svg>\n";
}

bool RunRecord::passed() const {
  if (!failure.empty()) return false;
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

nlohmann::json RunRecord::to_json() const {
  nlohmann::json j;
  j["scenario"] = scenario;
  j["seed"] = seed;
  j["outputs"] = outputs;
  j["summary"] = summary;
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks)
    j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  j["passed"] = passed();
  j["failure"] = failure;
  j["wall_time_s"] = wall_time;
  j["config"] = config;
  return j;
}

void write_run_record(const RunRecord& rec) {
  std::ofstream out(std::filesystem::path(rec.out_dir) / "summary.json");
  if (!out) throw std::runtime_error("cannot write summary.json in " + rec.out_dir);
  out << rec.to_json().dump(2) << '\n';
}

bool verify_outputs(const RunRecord& rec, std::string* problem) {
  for (const auto& rel : rec.outputs) {
    std::filesystem::path p = std::filesystem::path(rec.out_dir) / rel;
    try {
      if (!std::filesystem::exists(p)) throw std::runtime_error("missing");
      std::string ext = p.extension().string();
      if (ext == ".csv") {
        read_csv(p.string());
      } else if (ext == ".nlsf") {
        read_snapshot(p.string());
      } else if (ext == ".json") {
        std::ifstream in(p);
        auto parsed = nlohmann::json::parse(in);
        (void)parsed;
      } else if (ext == ".svg") {
        std::ifstream in(p);
        std::string first;
        std::getline(in, first);
        if (first.rfind("<svg", 0) != 0) throw std::runtime_error("not an svg");
      }
    } catch (const std::exception& e) {
      if (problem) *problem = rel + ": " + e.what();
      return false;
    }
  }
  return true;
}

}  // namespace nlsctl
