#include "nlsctl/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "nlsctl/feedback.hpp"
#include "nlsctl/ground_state.hpp"
#include "nlsctl/numerics.hpp"
#include "nlsctl/profile.hpp"
#include "nlsctl/spectral.hpp"

namespace nlsctl {

namespace fs = std::filesystem;

namespace {

const std::vector<std::pair<ScenarioKind, const char*>> kKinds = {
    {ScenarioKind::ground_state, "ground_state"},
    {ScenarioKind::profile, "profile"},
    {ScenarioKind::free_blowup, "free_blowup"},
    {ScenarioKind::subcritical_global, "subcritical_global"},
    {ScenarioKind::stabilize_global, "stabilize_global"},
    {ScenarioKind::stabilize_then_null, "stabilize_then_null"},
    {ScenarioKind::open_loop_null, "open_loop_null"},
    {ScenarioKind::hum_linear, "hum_linear"},
    {ScenarioKind::hum_nonlinear, "hum_nonlinear"},
    {ScenarioKind::sweep, "sweep"},
};

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

// Output bookkeeping for one run.
struct Run {
  RunRecord rec;
  fs::path dir;

  std::string path(const std::string& name) {
    rec.outputs.push_back(name);
    return (dir / name).string();
  }
  void check(const std::string& name, bool ok, const std::string& detail) {
    rec.checks.push_back({name, ok, detail});
  }
};

void append_monitors_to(Monitors& dst, const Monitors& src, bool skip_first) {
  for (std::size_t i = skip_first ? 1 : 0; i < src.size(); ++i) {
    dst.t.push_back(src.t[i]);
    dst.mass.push_back(src.mass[i]);
    dst.energy.push_back(src.energy[i]);
    dst.h1.push_back(src.h1[i]);
    dst.h2.push_back(src.h2[i]);
    dst.virial.push_back(src.virial[i]);
    dst.linf.push_back(src.linf[i]);
  }
}

void write_trajectory(Run& run, const Trajectory& traj, const std::string& stem) {
  write_monitors_csv(traj.monitors, run.path(stem + "monitors.csv"));
  std::vector<double> idx, ts;
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    std::ostringstream name;
    name << stem << "snap_" << std::setw(4) << std::setfill('0') << k << ".nlsf";
    write_snapshot(run.path(name.str()), traj.snapshots[k].second);
    idx.push_back(static_cast<double>(k));
    ts.push_back(traj.snapshots[k].first);
  }
  write_csv(run.path(stem + "snapshots.csv"), {"index", "t"}, {idx, ts});
  write_svg_plot(run.path(stem + "h1.svg"), {"gradient norm", "t", "||grad psi||", false, true},
                 {{"h1", traj.monitors.t, traj.monitors.h1}});
}

double max_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

Point point_from(const std::vector<double>& v, int dim, const std::string& key) {
  require(static_cast<int>(v.size()) == dim, key + " needs " + std::to_string(dim) + " coordinates");
  Point p{0.0, 0.0};
  for (int j = 0; j < dim; ++j) p[j] = v[j];
  return p;
}

ControlShape hum_shape(const Config& cfg, const RectDomain& dom) {
  ControlShape s;
  std::vector<double> mid;
  for (double l : dom.lengths) mid.push_back(0.4 * l);
  Point c = point_from(cfg.get_list("hum.center", mid), dom.dim(), "hum.center");
  double lmin = *std::min_element(dom.lengths.begin(), dom.lengths.end());
  s.a = make_cutoff(c, cfg.get_double("hum.omega_inner", 0.05 * lmin),
                    cfg.get_double("hum.omega_outer", 0.1 * lmin));
  s.T = cfg.get_double("hum.T", 1.0);
  s.window_lo = cfg.get_double("hum.window_lo", 0.1);
  s.window_hi = cfg.get_double("hum.window_hi", 0.9);
  return s;
}

HumOptions hum_options(const Config& cfg) {
  HumOptions o;
  o.phase_step = cfg.get_double("hum.phase_step", o.phase_step);
  o.min_steps = cfg.get_int("hum.min_steps", o.min_steps);
  o.p = cfg.get_double("hum.p", 0.0);
  return o;
}

RectDomain domain_from_config(const Config& cfg) {
  std::vector<double> l = cfg.get_list("domain.lengths");
  for (double v : l) require(v > 0.0, "domain.lengths must be positive");
  require(l.size() == 1 || l.size() == 2, "domain.lengths needs 1 or 2 entries");
  return make_domain(l);
}

// Stage 1 and 2 of the feedback pipeline, shared by both stabilize kinds.
struct FeedbackSetup {
  Grid grid;
  GroundState gs;
  BlowupSpec spec;
  ControlSchedule sched;
  CutoffSpec chi;
  std::unique_ptr<ReferenceTrajectory> ref;
  ComplexField psi0;
};

FeedbackSetup feedback_setup(const Config& cfg, double epsilon, std::mt19937_64& rng) {
  FeedbackSetup f;
  f.grid = grid_from_config(cfg);
  f.gs = ground_state_for(f.grid.dim(), cfg);
  f.spec = blowup_from_config(cfg, f.grid);
  require(f.spec.points.size() == 1, "feedback scenarios take a single blow-up point");
  f.sched = make_schedule(f.spec.lambda, f.spec.T_lambda, epsilon);
  f.chi = make_cutoff(f.spec.points[0], cfg.get_double("feedback.chi_inner"),
                      cfg.get_double("feedback.chi_outer"));
  require(ball_inside(f.chi, f.grid), "feedback cutoff leaves the domain");
  std::string kind = cfg.get_string("feedback.reference", "analytic");
  if (kind == "analytic") {
    f.ref = std::make_unique<AnalyticReference>(f.spec, f.gs, f.grid);
  } else if (kind == "stored_free_run") {
    double dt = cfg.get_double("feedback.replay_dt", 1e-5);
    f.ref = std::make_unique<StoredFreeRunReference>(f.spec, f.gs, f.grid,
                                                     f.sched.t2 + 2 * dt, dt);
  } else {
    throw ConfigError("feedback.reference must be analytic or stored_free_run");
  }
  f.psi0 = f.ref->value(0.0);
  double frac = cfg.get_double("feedback.perturbation", 0.0);
  require(frac >= 0.0 && frac < 1.0, "feedback.perturbation must lie in [0, 1)");
  if (frac > 0.0) {
    ComplexField w = random_low_mode_field(f.grid, cfg.get_int("feedback.perturbation_modes", 4), rng);
    w = cplx(frac * f.sched.delta / sobolev_norm(w, 2.0)) * w;
    f.psi0 = f.psi0 + w;
  }
  return f;
}

void schedule_summary(nlohmann::json& j, const ControlSchedule& s) {
  j["schedule"] = {{"t1", s.t1}, {"t2", s.t2}, {"mu", s.mu}, {"epsilon", s.epsilon},
                   {"delta", s.delta}, {"lambda", s.lambda}, {"T_lambda", s.T_lambda}};
}

void write_stabilization(Run& run, const StabilizationResult& res) {
  Monitors all = res.stage1.monitors;
  append_monitors_to(all, res.stage2.monitors, true);
  if (res.stage3) append_monitors_to(all, res.stage3->monitors, true);
  write_monitors_csv(all, run.path("monitors.csv"));
  std::vector<double> t, v;
  for (const auto& e : res.control_log) t.push_back(e.t), v.push_back(e.norm);
  write_csv(run.path("control_log.csv"), {"t", "control_l2"}, {t, v});
  write_snapshot(run.path("psi_t1.nlsf"), res.stage1.final_state.field);
  write_snapshot(run.path("psi_t2.nlsf"), res.stage2.final_state.field);
  if (res.stage3) write_snapshot(run.path("psi_final.nlsf"), res.stage3->final_state.field);
  write_svg_plot(run.path("mass.svg"), {"mass", "t", "||psi||^2", false, false},
                 {{"mass", all.t, all.mass}});
  write_svg_plot(run.path("control.svg"), {"control norm", "t", "||v||", false, true},
                 {{"||v||", t, v}});
}

// --- kinds -----------------------------------------------------------------

void run_ground_state(const Config& cfg, Run& run) {
  int dim = cfg.get_int("ground_state.dim", 2);
  double tol = cfg.get_double("ground_state.tol", 1e-8);
  GroundState gs = dim == 1 ? ground_state_1d() : ground_state_for(dim, cfg);
  double res = ode_residual(gs.profile);
  double m = radial_mass(gs), g = radial_gradient_sq(gs);
  write_profile_csv(gs.profile, run.path("profile.csv"));
  write_svg_plot(run.path("profile.svg"), {"ground state", "r", "Q", false, false},
                 {{"Q", gs.profile.r, gs.profile.q}});
  auto& s = run.rec.summary;
  s["dim"] = dim;
  s["p"] = gs.profile.p;
  s["q0"] = gs.q0();
  s["mass_sq"] = gs.mass_sq;
  s["grad_sq"] = g;
  s["ode_residual"] = res;
  s["decay_C0"] = gs.decay.C0;
  s["decay_D0"] = gs.decay.D0;
  run.check("ode_residual", res < tol, num(res) + " < " + num(tol));
  if (dim == 1) {
    double exact = std::sqrt(3.0) * std::numbers::pi / 2.0;
    run.check("mass_closed_form", std::abs(m - exact) <= 1e-8, "|" + num(m) + " - " + num(exact) + "|");
  } else {
    double rel = std::abs(g - m) / m;
    s["pohozaev_rel"] = rel;
    run.check("pohozaev", rel <= 1e-4, num(rel) + " <= 1e-4");
  }
}

void run_profile(const Config& cfg, Run& run) {
  Grid grid = grid_from_config(cfg);
  GroundState gs = ground_state_for(grid.dim(), cfg);
  BlowupSpec spec = blowup_from_config(cfg, grid);
  std::vector<double> fr = cfg.get_list("profile.times", {0.0, 0.5, 0.9});
  std::vector<double> ts, ws, l2, h1, h2, res_a, res_fd, ext;
  for (std::size_t k = 0; k < fr.size(); ++k) {
    require(fr[k] >= 0.0 && fr[k] < 1.0, "profile.times are fractions of T_lambda in [0, 1)");
    double t = fr[k] * spec.T_lambda;
    ComplexField R = synth_profile(spec, gs, t, grid);
    write_snapshot(run.path("profile_" + std::to_string(k) + ".nlsf"), R);
    ts.push_back(t);
    ws.push_back(core_width(spec, t));
    l2.push_back(l2_norm(R));
    h1.push_back(sobolev_norm(R, 1.0));
    h2.push_back(sobolev_norm(R, 2.0));
    res_a.push_back(l2_norm(profile_residual_analytic(spec, gs, t, grid)));
    // Centered in time, so t = 0 is sampled one step later.
    double dt = 1e-6 * (spec.T_lambda - t);
    res_fd.push_back(nls_residual(spec, gs, std::max(t, 2.0 * dt), dt, grid));
    ext.push_back(exterior_norm(R, spec, 2));
  }
  write_csv(run.path("profile_diagnostics.csv"),
            {"t", "width", "l2", "h1", "h2", "residual_analytic", "residual_discrete", "exterior_h2"},
            {ts, ws, l2, h1, h2, res_a, res_fd, ext});
  auto& s = run.rec.summary;
  s["T_lambda"] = spec.T_lambda;
  s["mass_sq_Q"] = gs.mass_sq;
  double drift = 0.0;
  for (double v : l2) drift = std::max(drift, std::abs(v * v - l2[0] * l2[0]) / (l2[0] * l2[0]));
  s["mass_drift"] = drift;
  run.check("profile_mass_invariant", drift <= 1e-4, num(drift) + " <= 1e-4");
}

void run_free_blowup(const Config& cfg, Run& run) {
  Grid grid = grid_from_config(cfg);
  GroundState gs = ground_state_for(grid.dim(), cfg);
  BlowupSpec spec = blowup_from_config(cfg, grid);
  EvolveOptions ev = evolve_from_config(cfg);
  double factor = cfg.get_double("solver.horizon_factor", 1.2);
  Trajectory traj = evolve({0.0, synth_profile(spec, gs, 0.0, grid), 0.0},
                           spec.T_lambda * factor, nullptr, ev);
  write_trajectory(run, traj, "");
  BlowupFit fit = fit_blowup(traj.monitors);
  double t_det = traj.final_state.t;
  auto& s = run.rec.summary;
  s["outcome"] = outcome_name(traj.outcome);
  s["t_detect"] = t_det;
  s["T_lambda"] = spec.T_lambda;
  s["T_fit"] = fit.T_fit;
  s["slope"] = fit.slope;
  s["fit_rms"] = fit.rms;
  s["fit_samples"] = fit.samples;
  s["steps"] = traj.steps;
  bool flagged = traj.outcome == Outcome::blowup_detected;
  run.check("blowup_flagged", flagged && t_det < spec.T_lambda * factor,
            std::string(outcome_name(traj.outcome)) + " at t=" + num(t_det));
  run.check("rate_slope", fit.ok && std::abs(fit.slope + 1.0) <= 0.3, "slope " + num(fit.slope));
}

void run_subcritical(const Config& cfg, Run& run) {
  Grid grid = grid_from_config(cfg);
  const int d = grid.dim();
  GroundState gs = ground_state_for(d, cfg);
  double frac = cfg.get_double("initial.mass_fraction", 0.9);
  double width = cfg.get_double("initial.width", 0.1);
  require(frac > 0.0 && width > 0.0, "initial.mass_fraction and initial.width must be positive");
  std::vector<double> mid(grid.midpoint().begin(), grid.midpoint().begin() + d);
  Point c = point_from(cfg.get_list("initial.center", mid), d, "initial.center");
  // A smooth cutoff keeps the data in H^1_0; the mass is then set exactly.
  CutoffSpec cut = make_cutoff(c, cfg.get_double("initial.cutoff_inner", 0.3),
                               cfg.get_double("initial.cutoff_outer", 0.45));
  require(ball_inside(cut, grid), "initial cutoff ball must lie inside the domain");
  ComplexField psi0 = assemble_Q_on_grid(gs, grid, c, width);
  CutoffField chi = cutoff_on_grid(cut, grid);
  for (std::size_t i = 0; i < psi0.size(); ++i) psi0[i] *= chi.chi[i];
  psi0 = cplx(std::sqrt(frac * gs.mass_sq / mass(psi0))) * psi0;
  EvolveOptions ev = evolve_from_config(cfg);
  Trajectory traj = evolve({0.0, psi0, 0.0}, cfg.get_double("solver.t_end", 10.0), nullptr, ev);
  write_trajectory(run, traj, "");
  double h0 = traj.monitors.h1.front(), hmax = max_of(traj.monitors.h1);
  auto& s = run.rec.summary;
  s["mass_ratio"] = mass(psi0) / gs.mass_sq;
  s["energy0"] = energy(psi0, critical_power(d));
  s["h1_initial"] = h0;
  s["h1_max"] = hmax;
  s["outcome"] = outcome_name(traj.outcome);
  s["steps"] = traj.steps;
  run.check("no_blowup", traj.outcome == Outcome::completed, outcome_name(traj.outcome));
  run.check("h1_bounded", hmax <= 3.0 * h0, num(hmax / h0) + " <= 3");
}

void run_stabilize_global(const Config& cfg, Run& run, std::mt19937_64& rng) {
  int dim = static_cast<int>(cfg.get_list("domain.lengths").size());
  double eps = cfg.get_double("feedback.epsilon", 0.0);
  if (!(eps > 0.0)) eps = std::sqrt(ground_state_for(dim, cfg).mass_sq) / 2.0;
  FeedbackSetup f = feedback_setup(cfg, eps, rng);
  StabilizationOptions opt;
  opt.evolve = evolve_from_config(cfg);
  opt.free_horizon = cfg.get_double("feedback.free_horizon", 1.0);
  StabilizationResult res = stabilize_run(f.psi0, f.sched, *f.ref, f.chi, opt);
  write_stabilization(run, res);
  double qn = std::sqrt(f.gs.mass_sq);
  auto& s = run.rec.summary;
  schedule_summary(s, f.sched);
  s["reference"] = provenance_name(f.ref->provenance());
  s["initial_distance"] = res.initial_distance;
  s["norm_t1"] = res.norm_t1;
  s["norm_t2"] = res.norm_t2;
  s["norm_Q"] = qn;
  s["omega1_content_t1"] = res.omega1_content_t1;
  s["omega1_content_t2"] = res.omega1_content_t2;
  s["control_energy"] = res.control_energy;
  s["stage1"] = outcome_name(res.stage1.outcome);
  s["stage2"] = outcome_name(res.stage2.outcome);
  bool controlled = res.stage1.outcome == Outcome::completed && res.stage2.outcome == Outcome::completed;
  run.check("controlled_stages_complete", controlled,
            std::string(outcome_name(res.stage1.outcome)) + "/" + outcome_name(res.stage2.outcome));
  run.check("terminal_below_Q", controlled && res.norm_t2 < qn, num(res.norm_t2) + " < " + num(qn));
  if (opt.free_horizon > 0.0) {
    bool free_ok = res.stage3 && res.stage3->outcome == Outcome::completed;
    s["free_run"] = res.stage3 ? outcome_name(res.stage3->outcome) : "skipped";
    if (res.stage3) s["free_run_h1_max"] = max_of(res.stage3->monitors.h1);
    run.check("free_run_bounded", free_ok, s["free_run"].get<std::string>());
  }
}

void run_stabilize_then_null(const Config& cfg, Run& run, std::mt19937_64& rng) {
  RectDomain dom = domain_from_config(cfg);
  ControlShape shape = hum_shape(cfg, dom);
  const double T = shape.T;
  // The null-control stage only needs the horizon T/2, since t2 < T/2.
  shape.T = 0.5 * T;
  HumOperator S(dom, shape, cfg.get_int("hum.modes", 12), hum_options(cfg));
  double fp_tol = cfg.get_double("hum.fp_tol", 1e-7);
  auto& s = run.rec.summary;

  double eps = cfg.get_double("feedback.epsilon", 0.0);
  if (!(eps > 0.0)) {
    // epsilon = delta_{T/2}: largest H2 amplitude for which the fixed point converges.
    ModalVector dir = random_modal(S, cfg.get_int("hum.init_modes", 3), rng);
    dir /= S.h2_norm(dir);
    RadiusEstimate r = estimate_local_radius(S, dir, cfg.get_double("hum.radius_lo", 1e-3),
                                             cfg.get_double("hum.radius_hi", 10.0),
                                             cfg.get_int("hum.radius_steps", 12), fp_tol);
    eps = r.converging;
    s["delta_T_half"] = r.converging;
    s["delta_T_half_diverging"] = r.diverging;
  }
  FeedbackSetup f = feedback_setup(cfg, eps, rng);
  require(f.sched.t2 < 0.5 * T, "t2 must be below T/2");
  StabilizationOptions opt;
  opt.evolve = evolve_from_config(cfg);
  opt.free_horizon = 0.0;
  StabilizationResult res = stabilize_run(f.psi0, f.sched, *f.ref, f.chi, opt);
  write_stabilization(run, res);
  schedule_summary(s, f.sched);
  s["initial_distance"] = res.initial_distance;
  s["norm_t2"] = res.norm_t2;
  bool controlled = res.stage1.outcome == Outcome::completed && res.stage2.outcome == Outcome::completed;
  run.check("controlled_stages_complete", controlled,
            std::string(outcome_name(res.stage1.outcome)) + "/" + outcome_name(res.stage2.outcome));
  if (!controlled) return;

  const ComplexField& psi_t2 = res.stage2.final_state.field;
  ModalVector u = S.project(psi_t2);
  ComplexField back = S.to_field(u, psi_t2.grid);
  double spill = l2_norm(psi_t2 - back);
  s["h2_t2_projected"] = S.h2_norm(u);
  s["spillover_l2"] = spill;
  run.check("within_local_radius", S.h2_norm(u) <= eps, num(S.h2_norm(u)) + " <= " + num(eps));

  NonlinearControlResult nl = nonlinear_null_control(S, u, fp_tol, cfg.get_int("hum.max_fp_iter", 50));
  write_convergence_csv(nl.log, run.path("convergence.csv"));
  s["fixed_point_converged"] = nl.converged;
  s["contraction_factor"] = nl.contraction_factor;
  s["modal_terminal_norm"] = nl.terminal_norm;
  run.check("null_control", nl.converged && nl.terminal_norm <= 10.0 * fp_tol,
            num(nl.terminal_norm) + " <= " + num(10.0 * fp_tol));

  if (cfg.get_bool("hum.physical", false) && nl.converged) {
    HumController ctl(S, nl.dual, psi_t2.grid, f.sched.t2);
    EvolveOptions ev = opt.evolve;
    ev.h1_reference = res.stage1.h1_reference;
    Trajectory tail = evolve(res.stage2.final_state, f.sched.t2 + shape.T, &ctl, ev);
    write_monitors_csv(tail.monitors, run.path("hum_stage_monitors.csv"));
    s["physical_terminal_norm"] = l2_norm(tail.final_state.field);
    s["physical_outcome"] = outcome_name(tail.outcome);
  }
}

void run_open_loop(const Config& cfg, Run& run) {
  Grid grid = grid_from_config(cfg);
  GroundState gs = ground_state_for(grid.dim(), cfg);
  BlowupSpec spec = blowup_from_config(cfg, grid);
  require(spec.points.size() == 1, "open loop takes a single blow-up point");
  CutoffSpec chi = make_cutoff(spec.points[0], cfg.get_double("open_loop.chi_inner"),
                               cfg.get_double("open_loop.chi_outer"));
  require(ball_inside(chi, grid), "open loop cutoff leaves the domain");
  ThetaProfile theta{spec.T_lambda, !cfg.get_bool("open_loop.theta", true)};
  OpenLoopOptions opt;
  opt.evolve = evolve_from_config(cfg);
  opt.budget_samples = cfg.get_int("open_loop.budget_samples", 200);
  OpenLoopResult res = open_loop_run(spec, gs, theta, chi, grid, opt);
  write_trajectory(run, res.traj, "");
  auto& s = run.rec.summary;
  s["T_lambda"] = spec.T_lambda;
  s["outcome"] = outcome_name(res.traj.outcome);
  s["initial_norm"] = res.initial_norm;
  s["terminal_norm"] = res.terminal_norm;
  s["terminal_ratio"] = res.terminal_ratio;
  s["budget"] = res.budget;
  s["kappa_hat"] = res.kappa_hat;
  s["control_energy"] = res.control_energy;
  s["support_checks"] = res.support_checks;
  run.check("control_support", res.support_ok && res.support_checks > 0,
            std::to_string(res.support_checks) + " steps checked");
  if (!theta.disabled) {
    double bound = std::max(1e-3, 3.0 * res.budget);
    run.check("terminal_ratio", res.traj.outcome == Outcome::completed && res.terminal_ratio <= bound,
              num(res.terminal_ratio) + " <= " + num(bound));
  }
}

void run_hum_linear(const Config& cfg, Run& run, std::mt19937_64& rng) {
  RectDomain dom = domain_from_config(cfg);
  HumOperator S(dom, hum_shape(cfg, dom), cfg.get_int("hum.modes", 32), hum_options(cfg));
  ModalVector psi0 = random_modal(S, cfg.get_int("hum.init_modes", 4), rng);
  psi0 *= cfg.get_double("hum.amplitude", 1.0) / psi0.norm();
  double tol = cfg.get_double("hum.tol", 1e-10);
  int max_iter = cfg.get_int("hum.max_iter", 500);
  LinearControlResult res = linear_null_control(S, psi0, tol, max_iter);
  std::vector<double> it;
  for (std::size_t k = 0; k < res.solve.history.size(); ++k) it.push_back(static_cast<double>(k + 1));
  write_csv(run.path("cg_history.csv"), {"iter", "residual"}, {it, res.solve.history});
  write_csv(run.path("norms.csv"), {"t", "l2"}, {res.times, res.norms});
  write_svg_plot(run.path("norms.svg"), {"controlled linear trajectory", "t", "||psi||", false, true},
                 {{"||psi||", res.times, res.norms}});
  auto& s = run.rec.summary;
  s["modes"] = S.size();
  s["time_steps"] = S.time_steps();
  s["cg_iterations"] = res.solve.iterations;
  s["cg_residual"] = res.solve.residual;
  s["initial_norm"] = res.initial_norm;
  s["terminal_norm"] = res.terminal_norm;
  if (S.size() <= 64) s["condition_number"] = condition_number(S.assemble_dense());
  int cap = cfg.get_int("hum.iteration_cap", 200);
  run.check("cg_converged", res.solve.converged && res.solve.iterations < cap,
            std::to_string(res.solve.iterations) + " iterations, residual " + num(res.solve.residual));
  run.check("terminal_norm", res.terminal_norm <= 1e-8 * res.initial_norm,
            num(res.terminal_norm / res.initial_norm) + " <= 1e-8");
}

void run_hum_nonlinear(const Config& cfg, Run& run, std::mt19937_64& rng) {
  RectDomain dom = domain_from_config(cfg);
  HumOperator S(dom, hum_shape(cfg, dom), cfg.get_int("hum.modes", 32), hum_options(cfg));
  ModalVector u0 = random_modal(S, cfg.get_int("hum.init_modes", 4), rng);
  u0 *= cfg.get_double("hum.amplitude", 1e-2) / S.h2_norm(u0);
  double tol = cfg.get_double("hum.fp_tol", 1e-7);
  int max_fp = cfg.get_int("hum.max_fp_iter", 50);
  NonlinearControlResult res = nonlinear_null_control(S, u0, tol, max_fp);
  write_convergence_csv(res.log, run.path("convergence.csv"));
  write_csv(run.path("norms.csv"), {"t", "l2"}, {res.times, res.norms});
  auto& s = run.rec.summary;
  s["amplitude_h2"] = S.h2_norm(u0);
  s["converged"] = res.converged;
  s["iterations"] = res.log.size();
  s["contraction_factor"] = res.contraction_factor;
  s["max_contraction"] = res.max_contraction;
  s["terminal_norm"] = res.terminal_norm;
  run.check("fixed_point", res.converged && res.contraction_factor < 1.0,
            "factor " + num(res.contraction_factor));
  run.check("terminal_norm", res.converged && res.terminal_norm <= 10.0 * tol,
            num(res.terminal_norm) + " <= " + num(10.0 * tol));
  if (cfg.get_bool("hum.doubling", true)) {
    NonlinearControlResult twice = nonlinear_null_control(S, 2.0 * u0, tol, max_fp);
    write_convergence_csv(twice.log, run.path("convergence_doubled.csv"));
    double ratio = twice.contraction_factor / res.contraction_factor;
    s["contraction_factor_doubled"] = twice.contraction_factor;
    s["doubling_ratio"] = ratio;
    // Quadratic dependence predicts 4; a factor 5 either way is accepted.
    run.check("doubling_trend", ratio > 1.0 && ratio >= 4.0 / 5.0 && ratio <= 4.0 * 5.0,
              "ratio " + num(ratio));
  }
  if (cfg.get_bool("hum.radius", false)) {
    ModalVector dir = u0 / S.h2_norm(u0);
    RadiusEstimate r = estimate_local_radius(S, dir, S.h2_norm(u0), cfg.get_double("hum.radius_hi", 10.0),
                                             cfg.get_int("hum.radius_steps", 12), tol);
    s["delta_T"] = r.converging;
    s["delta_T_diverging"] = r.diverging;
  }
}

}  // namespace

ScenarioKind parse_kind(const std::string& name) {
  for (const auto& [k, n] : kKinds)
    if (name == n) return k;
  throw ConfigError("unknown scenario kind '" + name + "'");
}

const char* kind_name(ScenarioKind k) {
  for (const auto& [kk, n] : kKinds)
    if (kk == k) return n;
  return "?";
}

BlowupFit fit_blowup(const Monitors& m, double decade) {
  BlowupFit fit;
  if (m.size() < 8) return fit;
  const double top = m.h1.back();
  std::size_t first = m.size() - 1;
  while (first > 0 && m.h1[first - 1] >= top / decade) --first;
  std::vector<double> t(m.t.begin() + first, m.t.end());
  std::vector<double> h(m.h1.begin() + first, m.h1.end());
  fit.samples = t.size();
  if (t.size() < 8) return fit;
  std::vector<double> logh(h.size());
  std::transform(h.begin(), h.end(), logh.begin(), [](double v) { return std::log(v); });
  const double t_last = t.back(), span = t_last - t.front();
  if (!(span > 0.0)) return fit;
  auto misfit = [&](double Tf) {
    std::vector<double> x(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) x[i] = std::log(Tf - t[i]);
    return fit_line(x, logh).rms;
  };
  double lo = t_last + 1e-9 * span, hi = t_last + 2.0 * span;
  fit.T_fit = golden_minimize(misfit, lo, hi, 1e-10 * span);
  std::vector<double> x(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) x[i] = std::log(fit.T_fit - t[i]);
  LineFit lf = fit_line(x, logh);
  fit.slope = lf.slope;
  fit.rms = lf.rms;
  fit.ok = std::isfinite(fit.slope);
  return fit;
}

ComplexField random_low_mode_field(const Grid& grid, int modes, std::mt19937_64& rng) {
  if (modes < 1) throw std::invalid_argument("need at least one mode");
  std::normal_distribution<double> nd;
  SpectralCoeffs c(grid);
  for (std::size_t i = 0; i < c.size(); ++i) {
    auto mi = grid.multi_index(i);
    bool low = mi[0] < modes && (grid.dim() == 1 || mi[1] < modes);
    if (!low) continue;
    double re = nd(rng), im = nd(rng);
    c.coeffs[i] = cplx(re, im);
  }
  return dst_inverse(c);
}

ModalVector random_modal(const HumOperator& S, int modes, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  const int m = S.modes_per_axis();
  ModalVector c = ModalVector::Zero(S.size());
  for (std::size_t i = 0; i < S.size(); ++i) {
    int a = S.dim() == 1 ? static_cast<int>(i) : static_cast<int>(i) / m;
    int b = S.dim() == 1 ? 0 : static_cast<int>(i) % m;
    if (a >= modes || b >= modes) continue;
    double re = nd(rng), im = nd(rng);
    c[i] = cplx(re, im);
  }
  return c;
}

Grid grid_from_config(const Config& cfg) {
  RectDomain dom = domain_from_config(cfg);
  std::vector<double> nv = cfg.get_list("domain.n");
  if (nv.size() == 1 && dom.dim() == 2) nv.push_back(nv[0]);
  require(static_cast<int>(nv.size()) == dom.dim(), "domain.n needs one count per axis");
  std::vector<int> n;
  for (double v : nv) {
    require(v == std::floor(v) && v >= Grid::min_points, "domain.n must be integers >= 3");
    n.push_back(static_cast<int>(v));
  }
  return Grid(dom, n);
}

BlowupSpec blowup_from_config(const Config& cfg, const Grid& grid) {
  const int d = grid.dim();
  std::vector<double> mid(grid.midpoint().begin(), grid.midpoint().begin() + d);
  std::vector<double> flat = cfg.get_list("blowup.points", mid);
  require(!flat.empty() && flat.size() % d == 0, "blowup.points holds whole points");
  std::vector<Point> pts;
  std::vector<CutoffSpec> cuts;
  double ri = cfg.get_double("blowup.cutoff_inner"), ro = cfg.get_double("blowup.cutoff_outer");
  for (std::size_t k = 0; k < flat.size(); k += d) {
    Point p{flat[k], d == 2 ? flat[k + 1] : 0.0};
    pts.push_back(p);
    cuts.push_back(make_cutoff(p, ri, ro));
  }
  return make_blowup_spec(grid, pts, cfg.get_double("blowup.lambda"), cfg.get_double("blowup.a"),
                          cuts, cfg.get_double("blowup.c_bound", 1.0));
}

GroundState ground_state_for(int dim, const Config& cfg) {
  if (dim == 1) return ground_state_1d();
  ShootingOptions opt = default_shooting(dim);
  opt.dr = cfg.get_double("ground_state.dr", opt.dr);
  return shoot_radial(dim, cfg.get_double("ground_state.tol", 1e-8), opt);
}

EvolveOptions evolve_from_config(const Config& cfg) {
  EvolveOptions o;
  std::string st = cfg.get_string("solver.stepper", "strang");
  if (st == "strang")
    o.stepper = StepperKind::strang;
  else if (st == "relaxation")
    o.stepper = StepperKind::relaxation;
  else
    throw ConfigError("solver.stepper must be strang or relaxation");
  o.cfl = cfg.get_double("solver.cfl", o.cfl);
  o.dt_max = cfg.get_double("solver.dt_max", o.dt_max);
  o.dt_min = cfg.get_double("solver.dt_min", o.dt_min);
  o.blowup_ratio = cfg.get_double("solver.blowup_ratio", o.blowup_ratio);
  o.monitor_every = cfg.get_int("solver.monitor_every", o.monitor_every);
  o.snapshot_every = cfg.get_double("solver.snapshot_every", o.snapshot_every);
  require(o.cfl > 0 && o.dt_max > 0 && o.dt_min > 0 && o.blowup_ratio > 1,
          "solver parameters must be positive (blowup_ratio > 1)");
  require(o.snapshot_every >= 0 && o.monitor_every >= 1, "invalid monitor or snapshot cadence");
  return o;
}

void validate_config(const Config& cfg) {
  ScenarioKind k = parse_kind(cfg.get_string("scenario.kind"));
  auto positive = [&](const std::string& key) {
    require(cfg.get_double(key) > 0.0, key + " must be positive");
  };
  if (k == ScenarioKind::ground_state) {
    int d = cfg.get_int("ground_state.dim", 2);
    require(d == 1 || d == 2, "ground_state.dim must be 1 or 2");
    require(cfg.get_double("ground_state.tol", 1e-8) > 0.0, "ground_state.tol must be positive");
    return;
  }
  if (k == ScenarioKind::sweep) {
    parse_kind(cfg.get_string("sweep.kind"));
    require(cfg.get_string("sweep.kind") != "sweep", "sweeps do not nest");
    sweep_axes(cfg);
    return;
  }
  Grid g;
  if (k != ScenarioKind::hum_linear && k != ScenarioKind::hum_nonlinear) {
    g = grid_from_config(cfg);
    evolve_from_config(cfg);
  } else {
    domain_from_config(cfg);
  }
  bool uses_profile = k == ScenarioKind::profile || k == ScenarioKind::free_blowup ||
                      k == ScenarioKind::stabilize_global || k == ScenarioKind::stabilize_then_null ||
                      k == ScenarioKind::open_loop_null;
  if (uses_profile) {
    positive("blowup.lambda");
    positive("blowup.a");
    positive("blowup.cutoff_inner");
    require(cfg.get_double("blowup.cutoff_outer") > cfg.get_double("blowup.cutoff_inner"),
            "blowup.cutoff_outer must exceed cutoff_inner");
  }
  if (k == ScenarioKind::stabilize_global || k == ScenarioKind::stabilize_then_null) {
    double lam = cfg.get_double("blowup.lambda"), a = cfg.get_double("blowup.a");
    double T = a / (lam * lam);
    require(T < 0.25, "T_lambda = a/lambda^2 must be below 1/4");
    positive("feedback.chi_inner");
    require(cfg.get_double("feedback.chi_outer") > cfg.get_double("feedback.chi_inner"),
            "feedback.chi_outer must exceed chi_inner");
    if (k == ScenarioKind::stabilize_then_null) {
      double t2 = T * (1.0 - T);
      double horizon = cfg.get_double("hum.T", 1.0);
      require(horizon > 0.0, "hum.T must be positive");
      require(t2 < 0.5 * horizon, "t2 = T_lambda(1 - T_lambda) must be below T/2");
    }
  }
  if (k == ScenarioKind::open_loop_null) {
    positive("open_loop.chi_inner");
    require(cfg.get_double("open_loop.chi_outer") > cfg.get_double("open_loop.chi_inner"),
            "open_loop.chi_outer must exceed chi_inner");
  }
  if (k == ScenarioKind::hum_linear || k == ScenarioKind::hum_nonlinear ||
      k == ScenarioKind::stabilize_then_null) {
    require(cfg.get_int("hum.modes", 32) >= 1, "hum.modes must be positive");
    require(cfg.get_double("hum.T", 1.0) > 0.0, "hum.T must be positive");
  }
}

RunRecord run_scenario(const Config& cfg, const std::string& out_dir, std::uint64_t seed) {
  validate_config(cfg);
  ScenarioKind k = parse_kind(cfg.get_string("scenario.kind"));
  if (k == ScenarioKind::sweep) throw ConfigError("use run_sweep for sweep configurations");
  auto start = std::chrono::steady_clock::now();
  Run run;
  run.dir = out_dir;
  fs::create_directories(run.dir);
  run.rec.scenario = kind_name(k);
  run.rec.seed = seed;
  run.rec.out_dir = out_dir;
  std::mt19937_64 rng(seed);
  try {
    switch (k) {
      case ScenarioKind::ground_state: run_ground_state(cfg, run); break;
      case ScenarioKind::profile: run_profile(cfg, run); break;
      case ScenarioKind::free_blowup: run_free_blowup(cfg, run); break;
      case ScenarioKind::subcritical_global: run_subcritical(cfg, run); break;
      case ScenarioKind::stabilize_global: run_stabilize_global(cfg, run, rng); break;
      case ScenarioKind::stabilize_then_null: run_stabilize_then_null(cfg, run, rng); break;
      case ScenarioKind::open_loop_null: run_open_loop(cfg, run); break;
      case ScenarioKind::hum_linear: run_hum_linear(cfg, run, rng); break;
      case ScenarioKind::hum_nonlinear: run_hum_nonlinear(cfg, run, rng); break;
      case ScenarioKind::sweep: break;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    run.rec.failure = e.what();
  }
  std::string problem;
  if (!verify_outputs(run.rec, &problem)) run.check("outputs_parse", false, problem);
  run.rec.config = cfg.resolved();
  run.rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_run_record(run.rec);
  return run.rec;
}

std::vector<SweepAxis> sweep_axes(const Config& cfg) {
  std::vector<SweepAxis> axes;
  for (int i = 1;; ++i) {
    std::string key = "sweep.axis" + std::to_string(i);
    if (!cfg.has(key)) break;
    SweepAxis a{cfg.get_string(key), cfg.get_list("sweep.values" + std::to_string(i))};
    require(a.key.find('.') != std::string::npos, key + " must name section.key");
    require(!a.values.empty(), "sweep.values" + std::to_string(i) + " is empty");
    for (double v : a.values) require(std::isfinite(v), "sweep values must be finite");
    axes.push_back(std::move(a));
  }
  return axes;
}

SweepResult run_sweep(const Config& cfg, const std::string& out_dir, std::uint64_t seed,
                      int threads) {
  validate_config(cfg);
  std::vector<SweepAxis> axes = sweep_axes(cfg);
  std::string base = cfg.get_string("sweep.kind");
  auto start = std::chrono::steady_clock::now();

  // Cartesian product; the first axis varies slowest.
  std::vector<std::vector<double>> combos{{}};
  for (const auto& a : axes) {
    std::vector<std::vector<double>> next;
    for (const auto& c : combos)
      for (double v : a.values) {
        auto e = c;
        e.push_back(v);
        next.push_back(std::move(e));
      }
    combos = std::move(next);
  }

  SweepResult out;
  out.runs.resize(combos.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < combos.size();) {
      Config c = cfg;
      c.set("scenario.kind", base);
      std::ostringstream dir;
      dir << "run_" << std::setw(3) << std::setfill('0') << i;
      std::string path = (fs::path(out_dir) / dir.str()).string();
      for (std::size_t j = 0; j < axes.size(); ++j) {
        std::ostringstream v;
        v.precision(17);
        v << combos[i][j];
        c.set(axes[j].key, v.str());
      }
      try {
        out.runs[i] = run_scenario(c, path, seed);
      } catch (const std::exception& e) {
        RunRecord r;
        r.scenario = base;
        r.seed = seed;
        r.out_dir = path;
        r.failure = e.what();
        out.runs[i] = r;
      }
    }
  };
  int nthreads = std::max(1, std::min<int>(threads, static_cast<int>(combos.size())));
  std::vector<std::thread> pool;
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  // Aggregation, single threaded and in run order.
  RunRecord& agg = out.aggregate;
  agg.scenario = "sweep";
  agg.seed = seed;
  agg.out_dir = out_dir;
  std::set<std::string> metric_keys;
  for (const auto& r : out.runs)
    for (auto it = r.summary.begin(); it != r.summary.end(); ++it)
      if (it.value().is_number()) metric_keys.insert(it.key());
  std::vector<std::string> header{"run"};
  for (const auto& a : axes) header.push_back(a.key);
  header.push_back("passed");
  for (const auto& k : metric_keys) header.push_back(k);
  std::vector<std::vector<double>> cols(header.size());
  for (std::size_t i = 0; i < out.runs.size(); ++i) {
    const auto& r = out.runs[i];
    std::size_t c = 0;
    cols[c++].push_back(static_cast<double>(i));
    for (double v : combos[i]) cols[c++].push_back(v);
    cols[c++].push_back(r.passed() ? 1.0 : 0.0);
    for (const auto& k : metric_keys)
      cols[c++].push_back(r.summary.contains(k) ? r.summary[k].get<double>() : NAN);
    agg.checks.push_back({"run_" + std::to_string(i), r.passed(),
                          r.failure.empty() ? "" : "failure: " + r.failure});
  }
  fs::create_directories(out_dir);
  write_csv((fs::path(out_dir) / "sweep.csv").string(), header, cols);
  agg.outputs.push_back("sweep.csv");
  for (const auto& r : out.runs)
    agg.outputs.push_back((fs::path(r.out_dir).filename() / "summary.json").string());

  // Blow-up time scaling, when the sweep runs over lambda alone.
  if (base == "free_blowup" && axes.size() == 1 && axes[0].key == "blowup.lambda" &&
      axes[0].values.size() >= 2) {
    std::vector<double> ll, lt, scaled;
    for (std::size_t i = 0; i < out.runs.size(); ++i) {
      const auto& s = out.runs[i].summary;
      if (!s.contains("T_fit")) continue;
      double lam = combos[i][0], Tf = s["T_fit"].get<double>();
      ll.push_back(std::log(lam));
      lt.push_back(std::log(Tf));
      scaled.push_back(Tf * lam * lam);
    }
    bool ok = scaled.size() == out.runs.size();
    double worst = INFINITY, exponent = NAN;
    if (ok) {
      double mean = 0.0;
      for (double v : scaled) mean += v / scaled.size();
      worst = 0.0;
      for (double v : scaled) worst = std::max(worst, std::abs(v / mean - 1.0));
      exponent = fit_line(ll, lt).slope;
    }
    agg.summary["T_fit_lambda2_spread"] = worst;
    agg.summary["T_fit_exponent"] = exponent;
    agg.checks.push_back({"T_fit_scaling", ok && worst <= 0.2,
                          "max |T_fit lambda^2 / mean - 1| = " + num(worst)});
  }
  agg.summary["runs"] = out.runs.size();
  agg.config = cfg.resolved();
  agg.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::string problem;
  if (!verify_outputs(agg, &problem)) agg.checks.push_back({"outputs_parse", false, problem});
  write_run_record(agg);
  return out;
}

}  // namespace nlsctl
