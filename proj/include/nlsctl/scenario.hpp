#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nlsctl/config.hpp"
#include "nlsctl/dynamics.hpp"
#include "nlsctl/hum.hpp"
#include "nlsctl/io.hpp"

namespace nlsctl {

enum class ScenarioKind {
  ground_state,
  profile,
  free_blowup,
  subcritical_global,
  stabilize_global,
  stabilize_then_null,
  open_loop_null,
  hum_linear,
  hum_nonlinear,
  sweep
};

ScenarioKind parse_kind(const std::string& name);
const char* kind_name(ScenarioKind k);

// Blow-up time and rate from the final decade of the gradient norm before
// detection: T_fit minimizes the misfit of log h1 ~ c + slope log(T_fit - t).
struct BlowupFit {
  bool ok = false;
  double T_fit = 0.0;
  double slope = 0.0;
  double rms = 0.0;
  std::size_t samples = 0;
};
BlowupFit fit_blowup(const Monitors& m, double decade = 10.0);

// Smooth random field supported on the lowest `modes` sine modes per axis.
ComplexField random_low_mode_field(const Grid& grid, int modes, std::mt19937_64& rng);
ModalVector random_modal(const HumOperator& S, int modes, std::mt19937_64& rng);

// Builds the pieces shared by several scenario kinds.
Grid grid_from_config(const Config& cfg);
BlowupSpec blowup_from_config(const Config& cfg, const Grid& grid);
GroundState ground_state_for(int dim, const Config& cfg);
EvolveOptions evolve_from_config(const Config& cfg);

// Throws ConfigError when the parameters are incomplete or inconsistent for
// the kind; runtime failures are recorded in the returned record instead.
void validate_config(const Config& cfg);

// Runs one scenario into out_dir (created if missing) and writes
// summary.json there.
RunRecord run_scenario(const Config& cfg, const std::string& out_dir, std::uint64_t seed);

struct SweepAxis {
  std::string key;
  std::vector<double> values;
};
std::vector<SweepAxis> sweep_axes(const Config& cfg);

struct SweepResult {
  std::vector<RunRecord> runs;
  RunRecord aggregate;  // aggregated checks, sweep.csv
};
SweepResult run_sweep(const Config& cfg, const std::string& out_dir, std::uint64_t seed,
                      int threads);

}  // namespace nlsctl
