// Acceptance runner: one PASS/FAIL line per criterion. Tolerances and
// runtime limits are fixed here, not read from the scenario configs, and the
// scenario summaries are re-checked against them.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nlsctl/config.hpp"
#include "nlsctl/dynamics.hpp"
#include "nlsctl/feedback.hpp"
#include "nlsctl/ground_state.hpp"
#include "nlsctl/io.hpp"
#include "nlsctl/numerics.hpp"
#include "nlsctl/scenario.hpp"
#include "nlsctl/spectral.hpp"

using namespace nlsctl;
namespace fs = std::filesystem;
using std::numbers::pi;

namespace {

std::string config_dir = NLSCTL_CONFIG_DIR;
std::string out_root = "acceptance_out";

struct Outcome_ {
  bool ok = true;
  std::ostringstream detail;

  void need(bool cond, const std::string& what) {
    detail << (detail.tellp() > 0 ? "; " : "") << what << (cond ? "" : " [fail]");
    ok = ok && cond;
  }
};

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

Config load(const std::string& name) { return Config::load((fs::path(config_dir) / name).string()); }

std::string out_dir(const std::string& name) {
  fs::path p = fs::path(out_root) / name;
  fs::remove_all(p);
  return p.string();
}

double summary_num(const RunRecord& r, const char* key) {
  if (!r.summary.contains(key)) return NAN;
  return r.summary[key].get<double>();
}

std::string summary_str(const RunRecord& r, const char* key) {
  return r.summary.contains(key) ? r.summary[key].get<std::string>() : "";
}

void record_run(Outcome_& o, const RunRecord& r) {
  o.need(r.failure.empty(), "stage ok" + (r.failure.empty() ? "" : " (" + r.failure + ")"));
  std::string problem;
  o.need(verify_outputs(r, &problem), "outputs parse" + (problem.empty() ? "" : " (" + problem + ")"));
}

// 1. Closed-form 1D quintic ground state on a 1024-node sine grid.
void c1(Outcome_& o) {
  GroundState gs = ground_state_1d();
  Grid g(make_domain({60.0}), {1024});
  ComplexField q = assemble_Q_on_grid(gs, g, {30.0, 0.0}, 1.0);
  ComplexField lap = laplacian(q);
  double res = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    double v = q[i].real();
    res = std::max(res, std::abs(-lap[i].real() + v - std::pow(v, 5)));
  }
  const double exact = std::sqrt(3.0) * pi / 2;
  double grid_mass = mass(q);
  o.need(res < 1e-8, "spectral residual " + num(res) + " < 1e-8");
  o.need(std::abs(grid_mass - exact) < 1e-10, "grid mass error " + num(std::abs(grid_mass - exact)) + " < 1e-10");
  o.need(std::abs(radial_mass(gs) - exact) < 1e-10,
         "radial mass error " + num(std::abs(radial_mass(gs) - exact)) + " < 1e-10");
}

// 2. Townes profile by shooting.
void c2(Outcome_& o) {
  ShootingOptions opt = default_shooting(2);
  GroundState a = shoot_radial(2, 1e-8, opt);
  opt.dr *= 0.5;
  GroundState b = shoot_radial(2, 1e-8, opt);
  double res = ode_residual(a.profile);
  double stable = std::abs(a.mass_sq - b.mass_sq) / b.mass_sq;
  double poho = std::abs(radial_gradient_sq(a) / a.mass_sq - 1.0);
  o.need(res < 1e-8, "ODE residual " + num(res) + " < 1e-8");
  o.need(stable < 5e-5, "mass change under dr/2 " + num(stable) + " < 5e-5");
  o.need(poho <= 1e-4, "Pohozaev " + num(poho) + " <= 1e-4");
}

EvolveOptions fixed(double dt) {
  EvolveOptions e;
  e.cfl = 1e9;
  e.dt_max = dt;
  e.monitor_every = 1 << 30;
  return e;
}

// 3. Mass conservation and second-order energy drift.
void c3(Outcome_& o) {
  Grid g(make_domain({1.0, 1.0}), {127, 127});
  std::mt19937_64 rng(3);
  ComplexField f = random_low_mode_field(g, 6, rng);
  f = cplx(2.0 / l2_norm(f)) * f;
  const int steps = 1000;
  Trajectory tr = evolve({0.0, f, 0.0}, steps * 1e-4, nullptr, fixed(1e-4));
  double drift = std::abs(mass(tr.final_state.field) / mass(f) - 1.0);
  o.need(tr.steps == steps, std::to_string(tr.steps) + " steps");
  o.need(drift < 1e-12, "mass drift per 1e3 steps " + num(drift) + " < 1e-12");

  // Soliton-shaped data 0.9 Q on (0, 60). On the exact soliton (and its
  // boosts) the second-order part of the energy error cancels and the drift
  // is fourth order; that order is reported but not gated.
  GroundState gs = ground_state_1d();
  Grid g1(make_domain({60.0}), {1023});
  ComplexField q = assemble_Q_on_grid(gs, g1, {30.0, 0.0}, 1.0);
  auto drift_orders = [&](const ComplexField& u0) {
    double e0 = energy(u0, 5.0);
    std::vector<double> d, orders;
    for (double dt : {0.02, 0.01, 0.005}) {
      Trajectory s = evolve({0.0, u0, 0.0}, 1.0, nullptr, fixed(dt));
      d.push_back(std::abs(energy(s.final_state.field, 5.0) - e0));
    }
    for (std::size_t k = 0; k + 1 < d.size(); ++k) orders.push_back(std::log2(d[k] / d[k + 1]));
    return orders;
  };
  for (double order : drift_orders(cplx(0.9) * q))
    o.need(order >= 1.8 && order <= 2.2, "energy drift order " + num(order) + " in [1.8, 2.2]");
  std::vector<double> exact = drift_orders(q);
  o.detail << "; exact soliton drift order " << num(exact.back()) << " (info)";
}

// 4. Subcritical data stay bounded.
void c4(Outcome_& o) {
  RunRecord r = run_scenario(load("subcritical.toml"), out_dir("c4"), 0);
  record_run(o, r);
  double ratio = summary_num(r, "h1_max") / summary_num(r, "h1_initial");
  o.need(std::abs(summary_num(r, "mass_ratio") - 0.9) < 1e-12, "mass " + num(summary_num(r, "mass_ratio")) + " m_Q");
  o.need(summary_str(r, "outcome") == "completed", "outcome " + summary_str(r, "outcome") + " at t=10");
  o.need(ratio <= 3.0, "max h1 / h1(0) = " + num(ratio) + " <= 3");
}

// 5. Free blow-up from R_lambda(0).
void c5(Outcome_& o) {
  RunRecord r = run_scenario(load("free_blowup.toml"), out_dir("c5"), 0);
  record_run(o, r);
  double T = summary_num(r, "T_lambda"), t = summary_num(r, "t_detect"), slope = summary_num(r, "slope");
  o.need(summary_str(r, "outcome") == "blowup_detected", "outcome " + summary_str(r, "outcome"));
  o.need(t < 1.2 * T, "t_detect / T_lambda = " + num(t / T) + " < 1.2");
  o.need(std::abs(slope + 1.0) <= 0.3, "slope " + num(slope) + " in -1 +- 0.3");
}

// 6. Blow-up time scales as lambda^-2.
void c6(Outcome_& o) {
  SweepResult s = run_sweep(load("sweep_lambda.toml"), out_dir("c6"), 0, 1);
  std::vector<double> ll, lt;
  for (const RunRecord& r : s.runs) {
    record_run(o, r);
    double T_fit = summary_num(r, "T_fit"), T = summary_num(r, "T_lambda");
    double ratio = T_fit / T;
    o.need(summary_str(r, "outcome") == "blowup_detected" && std::abs(ratio - 1.0) <= 0.2,
           "T_fit / (a lambda^-2) = " + num(ratio));
    ll.push_back(0.5 * std::log(0.5 / T));  // lambda from T_lambda = a / lambda^2, a = 0.5
    lt.push_back(std::log(T_fit));
  }
  o.need(s.runs.size() == 3, std::to_string(s.runs.size()) + " runs");
  if (s.runs.size() == 3) {
    double exponent = fit_line(ll, lt).slope;
    o.need(std::abs(exponent + 2.0) <= 0.4, "fitted exponent " + num(exponent) + " in -2 +- 20%");
  }
}

// 7. Feedback stabilization from R_lambda(0) and 8 perturbations.
void c7(Outcome_& o) {
  double worst = 0.0;
  int passed = 0;
  for (int run = 0; run <= 8; ++run) {
    Config cfg = load("stabilize_global.toml");
    cfg.set("feedback.perturbation", run == 0 ? "0" : "0.9");
    cfg.set("feedback.free_horizon", "1.0");
    RunRecord r = run_scenario(cfg, out_dir("c7_" + std::to_string(run)), 100 + run);
    bool ok = r.failure.empty() && verify_outputs(r);
    const auto& sch = r.summary["schedule"];
    double eps = sch["epsilon"].get<double>(), delta = sch["delta"].get<double>();
    double qn = summary_num(r, "norm_Q"), t2 = summary_num(r, "norm_t2");
    double T = sch["T_lambda"].get<double>(), lam = sch["lambda"].get<double>();
    ok = ok && std::abs(eps - qn / 2) <= 1e-14 * qn && std::abs(delta - eps / 16) <= 1e-15 * eps;
    ok = ok && std::abs(sch["t1"].get<double>() - T * (1 - 2 * T)) <= 1e-15;
    ok = ok && std::abs(sch["mu"].get<double>() * T * T - 1.0 / (lam * T * T)) <= 1e-12 / (lam * T * T);
    ok = ok && summary_num(r, "initial_distance") <= delta;
    ok = ok && summary_str(r, "stage1") == "completed" && summary_str(r, "stage2") == "completed";
    ok = ok && t2 < qn && summary_str(r, "free_run") == "completed";
    worst = std::max(worst, t2 / qn);
    if (ok) ++passed;
    o.detail << (o.detail.tellp() > 0 ? "; " : "") << "run " << run << (ok ? " ok" : " [fail]")
             << " |psi(t2)|/|Q| " << num(t2 / qn);
    o.ok = o.ok && ok;
  }
  o.need(passed == 9, std::to_string(passed) + "/9 runs, worst ratio " + num(worst));
}

// 8. Open-loop null control.
void c8(Outcome_& o) {
  RunRecord r = run_scenario(load("open_loop.toml"), out_dir("c8"), 0);
  record_run(o, r);
  double ratio = summary_num(r, "terminal_ratio"), budget = summary_num(r, "budget");
  double bound = std::max(1e-3, 3.0 * budget);
  o.need(summary_str(r, "outcome") == "completed", "outcome " + summary_str(r, "outcome"));
  o.need(ratio <= bound, "terminal ratio " + num(ratio) + " <= " + num(bound));
  bool support = false;
  for (const auto& c : r.checks)
    if (c.name == "control_support") support = c.passed;
  o.need(support && summary_num(r, "support_checks") > 0,
         "support inside omega at " + num(summary_num(r, "support_checks")) + " steps");
}

// 9. Linear HUM control.
void c9(Outcome_& o) {
  Config cfg = load("hum_linear.toml");
  double L = cfg.get_list("domain.lengths")[0];
  o.need(cfg.get_int("hum.modes") == 32, "32 modes");
  o.need(std::abs(2 * cfg.get_double("hum.omega_outer") - 0.2 * L) < 1e-12, "omega length 0.2 L");
  RunRecord r = run_scenario(cfg, out_dir("c9"), 0);
  record_run(o, r);
  double it = summary_num(r, "cg_iterations"), res = summary_num(r, "cg_residual");
  double ratio = summary_num(r, "terminal_norm") / summary_num(r, "initial_norm");
  o.need(it < 200 && res <= 1e-10, num(it) + " CG iterations, residual " + num(res));
  o.need(ratio <= 1e-8, "terminal / initial " + num(ratio) + " <= 1e-8");
}

// 10. Nonlinear null control by the fixed point.
void c10(Outcome_& o) {
  RunRecord r = run_scenario(load("hum_nonlinear.toml"), out_dir("c10"), 0);
  record_run(o, r);
  double amp = summary_num(r, "amplitude_h2"), k = summary_num(r, "contraction_factor");
  double k2 = summary_num(r, "contraction_factor_doubled"), term = summary_num(r, "terminal_norm");
  o.need(std::abs(amp - 1e-2) < 1e-14, "|u0|_H2 = " + num(amp));
  o.need(r.summary["converged"].get<bool>() && k < 1.0, "contraction " + num(k) + " < 1");
  o.need(term <= 1e-6, "terminal norm " + num(term) + " <= 1e-6");
  double ratio = k2 / k;
  o.need(ratio > 1.0 && ratio >= 0.8 && ratio <= 20.0, "doubling ratio " + num(ratio) + " in (1, 20], quadratic 4");
}

// 11. Gagliardo-Nirenberg bound and virial concavity.
void c11(Outcome_& o) {
  GroundState gs = shoot_radial(2, 1e-8);
  Grid g(make_domain({1.0, 1.0}), {63, 63});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> m(0.05, 1.5);
  std::uniform_int_distribution<int> modes(1, 12);
  int ok = 0;
  double worst = INFINITY;
  for (int i = 0; i < 1000; ++i) {
    ComplexField f = random_low_mode_field(g, modes(rng), rng);
    f = cplx(std::sqrt(m(rng) * gs.mass_sq / mass(f))) * f;
    GnReport r = gn_energy_bound_check(f, gs, 1e-10);
    if (r.passed) ++ok;
    worst = std::min(worst, (r.energy - r.bound) / std::max(std::abs(r.bound), 1e-300));
  }
  o.need(ok == 1000, std::to_string(ok) + "/1000 fields satisfy the GN bound (min relative slack " + num(worst) + ")");

  Grid sq(make_domain({1.0, 1.0}), {255, 255});
  ComplexField psi = cplx(1.1 / 0.06) * assemble_Q_on_grid(gs, sq, {0.5, 0.5}, 0.06);
  double e0 = energy(psi, 3.0);
  EvolveOptions ev;
  ev.cfl = 0.02;
  ev.blowup_ratio = 4.0;
  Trajectory tr = evolve({0.0, psi, 0.0}, 0.01, nullptr, ev);
  const double tol = 1e-3 * 16.0 * std::abs(e0);
  ConcavityReport c = virial_concavity_check(tr, e0, tol, 4);
  o.need(e0 < 0.0, "E(psi0) = " + num(e0) + " < 0");
  o.need(tr.monitors.size() > 20, std::to_string(tr.monitors.size()) + " virial samples, " +
                                      outcome_name(tr.outcome) + " at t=" + num(tr.final_state.t));
  o.need(c.passed, "max V'' " + num(c.max_second_difference) + " <= 16 E + tol = " + num(c.bound + tol));
}

// 12. Feedback identities.
void c12(Outcome_& o) {
  Grid g(make_domain({1.0, 1.0}), {63, 63});
  std::mt19937_64 rng(12);
  CutoffSpec chi = make_cutoff({0.45, 0.55}, 0.15, 0.3);
  ComplexField psi = random_low_mode_field(g, 10, rng), ref = random_low_mode_field(g, 10, rng);
  o.need(max_abs(k1_feedback(psi, psi, chi)) == 0.0, "k1(psi, psi) == 0");
  ControlSchedule s = make_schedule(10.0, 0.005, 0.2);
  bool outside = true;
  std::size_t outside_nodes = 0;
  ComplexField v1 = k1_feedback(psi, ref, chi);
  for (double frac : {0.0, 0.3, 1.0}) {
    ComplexField v2 = k2_feedback(psi, ref, chi, s, s.t1 + frac * (s.t2 - s.t1));
    for (std::size_t i = 0; i < g.size(); ++i)
      if (distance(g.coords(i), chi.center, 2) >= chi.r_outer) {
        outside = outside && v1[i] == cplx(0.0) && v2[i] == cplx(0.0);
        ++outside_nodes;
      }
  }
  o.need(outside && outside_nodes > 0, "k1, k2 vanish at " + std::to_string(outside_nodes) + " exterior samples");
  double worst_gap = 0.0, worst_mu = 0.0;
  for (double lam : {1.5, 10.0, 80.0})
    for (double T : {0.2, 0.05, 1e-3}) {
      ControlSchedule c = make_schedule(lam, T, 0.1);
      worst_gap = std::max(worst_gap, std::abs((c.t2 - c.t1) / (T * T) - 1.0));
      worst_mu = std::max(worst_mu, std::abs(c.mu * (c.t2 - c.t1) * lam * T * T - 1.0));
    }
  o.need(worst_gap <= 1e-12, "t2 - t1 = T^2 to " + num(worst_gap));
  o.need(worst_mu <= 1e-14, "mu (t2 - t1) = 1/(lambda T^2) to " + num(worst_mu));
}

struct Criterion {
  const char* name;
  double limit_s;
  std::function<void(Outcome_&)> run;
};

const std::vector<Criterion> criteria = {
    {"ground state 1D", 1, c1},          {"ground state 2D", 10, c2},
    {"solver conservation", 30, c3},     {"subcritical global existence", 120, c4},
    {"free blow-up", 120, c5},           {"lambda scaling", 600, c6},
    {"feedback stabilization", 600, c7}, {"open-loop null control", 300, c8},
    {"HUM linear control", 60, c9},      {"nonlinear null control", 300, c10},
    {"inequality suites", 120, c11},     {"feedback identities", 1, c12},
};

bool run_criterion(int k) {
  const Criterion& c = criteria[k - 1];
  Outcome_ o;
  auto start = std::chrono::steady_clock::now();
  try {
    c.run(o);
  } catch (const std::exception& e) {
    o.need(false, std::string("exception: ") + e.what());
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.need(secs < c.limit_s, "runtime " + num(secs) + " s < " + num(c.limit_s) + " s");
  std::cout << "C" << k << " " << (o.ok ? "PASS" : "FAIL") << " " << c.name << ": " << o.detail.str()
            << std::endl;
  return o.ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-12)")->check(CLI::Range(1, 12));
  app.add_option("--configs", config_dir, "scenario configuration directory");
  app.add_option("--out", out_root, "output directory");
  CLI11_PARSE(app, argc, argv);

  bool ok = true;
  for (int k = 1; k <= 12; ++k)
    if (only == 0 || only == k) ok = run_criterion(k) && ok;
  return ok ? 0 : 1;
}
