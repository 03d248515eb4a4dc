#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "nlsctl/config.hpp"
#include "nlsctl/io.hpp"
#include "nlsctl/scenario.hpp"

using namespace nlsctl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("nlsctl_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

}  // namespace

TEST_CASE("snapshot round trip is bit exact") {
  Grid g(make_domain({1.0, 2.0}), {7, 5});
  ComplexField f(g);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (auto& v : f.values) v = {u(rng), u(rng)};
  f[3] = {5e-324, -0.0};
  fs::path p = scratch("snap.bin");
  write_snapshot(p.string(), f);
  CHECK(fs::file_size(p) == 4 + 4 + 4 + 2 * 8 + 35 * 16);
  Snapshot s = read_snapshot(p.string());
  CHECK(s.counts == std::vector<std::uint64_t>{7, 5});
  ComplexField back = snapshot_field(s, g.domain());
  REQUIRE(back.size() == f.size());
  CHECK(std::memcmp(back.values.data(), f.values.data(), f.size() * sizeof(cplx)) == 0);
  CHECK(std::signbit(back[3].imag()));
  CHECK_THROWS_AS(snapshot_field(s, make_domain({1.0})), std::exception);
  fs::remove(p);
}

TEST_CASE("corrupt snapshots are rejected") {
  Grid g(make_domain({1.0}), {9});
  ComplexField f(g);
  fs::path p = scratch("bad.bin");
  write_snapshot(p.string(), f);
  std::string good = slurp(p);

  std::string bad = good;
  bad[0] = 'X';
  spit(p, bad);
  CHECK_THROWS_AS(read_snapshot(p.string()), SnapshotError);

  Snapshot s{{9}, std::vector<cplx>(9)};
  write_snapshot(p.string(), s, snapshot_version + 1);
  CHECK_THROWS_AS(read_snapshot(p.string()), SnapshotError);

  spit(p, good.substr(0, good.size() - 5));
  CHECK_THROWS_AS(read_snapshot(p.string()), SnapshotError);

  spit(p, good + "extra");
  CHECK_THROWS_AS(read_snapshot(p.string()), SnapshotError);
  CHECK_THROWS_AS(read_snapshot((p.string() + ".missing")), SnapshotError);
  fs::remove(p);
}

TEST_CASE("csv round trip") {
  fs::path p = scratch("t.csv");
  std::vector<double> a{0.1, 1.0 / 3.0, -2e-300}, b{1e300, 0.0, 7.0};
  write_csv(p.string(), {"a", "b"}, {a, b});
  CsvTable t = read_csv(p.string());
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(t.rows[i][0] == a[i]);
    CHECK(t.rows[i][1] == b[i]);
  }
  CHECK_THROWS(write_csv(p.string(), {"a", "b"}, {a, {1.0}}));
  spit(p, "a,b\n1,2\n3\n");
  CHECK_THROWS(read_csv(p.string()));
  spit(p, "a,b\n1,x\n");
  CHECK_THROWS(read_csv(p.string()));
  fs::remove(p);
}

TEST_CASE("config parsing") {
  Config c = Config::parse(
      "[domain]\n"
      "lengths = [1.0, 2.5]  # comment\n"
      "n = 15, 31\n"
      "[scenario]\n"
      "kind = \"profile\"\n"
      "flag = true\n");
  CHECK(c.get_list("domain.lengths") == std::vector<double>{1.0, 2.5});
  CHECK(c.get_list("domain.n") == std::vector<double>{15, 31});
  CHECK(c.get_string("scenario.kind") == "profile");
  CHECK(c.get_bool("scenario.flag", false));
  CHECK(c.get_double("solver.cfl", 0.25) == 0.25);
  CHECK(c.resolved().find("cfl") != std::string::npos);
  CHECK_THROWS_AS(c.get_double("solver.missing"), ConfigError);
  CHECK_THROWS_AS(c.get_double("scenario.kind"), ConfigError);
  CHECK_THROWS_AS(c.get_int("domain.lengths"), ConfigError);
  CHECK_THROWS_AS(Config::parse("[domain\nn = 3\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("[a]\nx = [1, 2\n").get_list("a.x"), ConfigError);
  CHECK_THROWS_AS(Config::load("/nonexistent/config.toml"), ConfigError);
}

TEST_CASE("config validation") {
  const std::string base =
      "[scenario]\nkind = \"stabilize_then_null\"\n"
      "[domain]\nlengths = [10.0, 10.0]\nn = [63, 63]\n"
      "[blowup]\nlambda = 1.5811388300841898\na = 0.5\npoints = [5.0, 5.0]\n"
      "cutoff_inner = 3.5\ncutoff_outer = 4.8\n"
      "[feedback]\nchi_inner = 1.5\nchi_outer = 3.0\n";
  // t2 = 0.16 must lie below T/2.
  CHECK_NOTHROW(validate_config(Config::parse(base + "[hum]\nT = 8.0\n")));
  CHECK_THROWS_AS(validate_config(Config::parse(base + "[hum]\nT = 0.3\n")), ConfigError);

  Config c = Config::parse(base + "[hum]\nT = 8.0\n");
  c.set("feedback.chi_outer", "1.0");
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c = Config::parse(base + "[hum]\nT = 8.0\n");
  c.set("blowup.lambda", "1.0");  // T_lambda = 0.5
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c = Config::parse(base + "[hum]\nT = 8.0\n");
  c.set("domain.n", "[63]");  // one count is shared by both axes
  CHECK_NOTHROW(validate_config(c));
  c.set("domain.n", "[63, 63, 63]");
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c.set("domain.n", "[63.5, 63]");
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c.set("scenario.kind", "unknown");
  CHECK_THROWS_AS(validate_config(c), ConfigError);
}

TEST_CASE("sweep axes") {
  Config c = Config::parse(
      "[scenario]\nkind = \"sweep\"\n"
      "[sweep]\nkind = \"ground_state\"\naxis1 = \"blowup.lambda\"\nvalues1 = [1, 2, 3]\n"
      "axis2 = \"blowup.a\"\nvalues2 = [0.5]\n");
  auto axes = sweep_axes(c);
  REQUIRE(axes.size() == 2);
  CHECK(axes[0].values.size() == 3);
  c.set("sweep.values2", "[]");
  CHECK_THROWS_AS(sweep_axes(c), ConfigError);
  c.set("sweep.kind", "sweep");
  CHECK_THROWS_AS(validate_config(c), ConfigError);
}

TEST_CASE("a sweep without axes is a single run") {
  Config c = Config::parse(
      "[scenario]\nkind = \"sweep\"\n"
      "[sweep]\nkind = \"ground_state\"\n"
      "[ground_state]\ndim = 1\n");
  fs::path out = scratch("sweep");
  SweepResult r = run_sweep(c, out.string(), 0, 1);
  REQUIRE(r.runs.size() == 1);
  CHECK(r.runs[0].passed());
  std::string problem;
  CHECK_MESSAGE(verify_outputs(r.runs[0], &problem), problem);
  fs::remove_all(out);
}
