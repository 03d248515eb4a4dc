#include "nlsctl/feedback.hpp"

#include <cmath>
#include <stdexcept>

#include "nlsctl/numerics.hpp"
#include "nlsctl/spectral.hpp"

namespace nlsctl {

namespace {

inline double nl_pow(double a2, double p) {
  if (p == 3.0) return a2;
  if (p == 5.0) return a2 * a2;
  return std::pow(a2, 0.5 * (p - 1.0));
}

void require_match(const ComplexField& a, const ComplexField& b) {
  require_same_shape(a.grid, b.grid, "feedback");
  if (a.size() != b.size()) throw std::invalid_argument("feedback field size mismatch");
}

// Small per-time cache shared by controllers queried at RK4 stage times.
template <class F>
ComplexField cached(std::mutex& m, std::vector<std::pair<double, ComplexField>>& cache,
                    double t, F&& make) {
  {
    std::lock_guard<std::mutex> lock(m);
    for (const auto& e : cache)
      if (e.first == t) return e.second;
  }
  ComplexField f = make();
  std::lock_guard<std::mutex> lock(m);
  cache.emplace_back(t, f);
  if (cache.size() > 4) cache.erase(cache.begin());
  return f;
}

}  // namespace

ControlSchedule make_schedule(double lambda, double T, double epsilon) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(T > 0.0) || !(T < 0.25)) throw std::invalid_argument("schedule needs 0 < T_lambda < 1/4");
  ControlSchedule s;
  s.lambda = lambda;
  s.T_lambda = T;
  s.epsilon = epsilon;
  s.delta = epsilon / 16.0;
  s.t1 = T * (1.0 - 2.0 * T);
  s.t2 = T * (1.0 - T);
  s.mu = 1.0 / (lambda * T * T) / (s.t2 - s.t1);
  return s;
}

BallRadii ball_radii(const FixedPointConstants& k) {
  double l2 = 1.0 / (k.lambda0 * k.lambda0);
  if (!(1.0 - 2.0 * k.c * l2 > 0.0)) throw std::invalid_argument("lambda0 too small for M1");
  BallRadii r;
  r.M2 = std::sqrt(std::pow(k.lambda0, 4) / (4.0 * k.C_tilde * k.c * k.c));
  r.M1 = std::min(std::sqrt(1.0 / (4.0 * k.C * k.c * l2 * (1.0 - 2.0 * k.c * l2))), r.M2 / 4.0);
  return r;
}

const char* provenance_name(Provenance p) {
  return p == Provenance::analytic_Rlambda ? "analytic_Rlambda" : "stored_free_run";
}

std::vector<ComplexField> ReferenceTrajectory::gradient(double t) const {
  return nlsctl::gradient(value(t));
}

AnalyticReference::AnalyticReference(BlowupSpec spec, GroundState gs, Grid grid)
    : spec_(std::move(spec)), gs_(std::move(gs)), grid_(std::move(grid)) {}

ComplexField AnalyticReference::value(double t) const {
  return cached(mutex_, cache_, t, [&] { return synth_profile(spec_, gs_, t, grid_); });
}

std::vector<ComplexField> AnalyticReference::gradient(double t) const {
  return synth_profile_gradient(spec_, gs_, t, grid_);
}

StoredFreeRunReference::StoredFreeRunReference(const BlowupSpec& spec, const GroundState& gs,
                                               const Grid& grid, double t_end,
                                               double dt_replay, std::size_t keep_every)
    : grid_(grid),
      p_(gs.profile.p),
      dt_(dt_replay),
      t_end_(t_end),
      keep_every_(std::max<std::size_t>(1, keep_every)) {
  if (!(dt_replay > 0.0) || !(t_end > 0.0) || !(t_end < spec.T_lambda))
    throw std::invalid_argument("stored run needs 0 < t_end < T_lambda and dt > 0");
  StrangStepper stepper(p_);
  SimState s{0.0, synth_profile(spec, gs, 0.0, grid), dt_};
  std::size_t steps = static_cast<std::size_t>(std::ceil(t_end / dt_)) + 1;
  stored_.push_back(s.field);
  for (std::size_t j = 1; j <= steps; ++j) {
    stepper.step(s, dt_, nullptr);
    if (j % keep_every_ == 0) stored_.push_back(s.field);
  }
  cursor_ = stored_.front();
}

ComplexField StoredFreeRunReference::value(double t) const {
  if (!(t >= 0.0) || t > t_end_ + dt_) throw std::invalid_argument("stored run queried outside its window");
  std::size_t j = static_cast<std::size_t>(std::floor(t / dt_));
  std::lock_guard<std::mutex> lock(mutex_);
  std::size_t base = (j / keep_every_) * keep_every_;
  if (!(cursor_index_ >= base && cursor_index_ <= j)) {
    cursor_index_ = base;
    cursor_ = stored_.at(base / keep_every_);
  }
  StrangStepper stepper(p_);
  SimState s{0.0, cursor_, dt_};
  for (; cursor_index_ < j; ++cursor_index_) stepper.step(s, dt_, nullptr);
  cursor_ = s.field;
  double rest = t - j * dt_;
  if (rest > 0.0) stepper.step(s, rest, nullptr);
  return s.field;
}

ComplexField k1_feedback(const ComplexField& psi, const ComplexField& ref,
                         const std::vector<double>& chi, double p) {
  require_match(psi, ref);
  ComplexField v(psi.grid);
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (chi[i] == 0.0) continue;
    v[i] = chi[i] * (nl_pow(std::norm(psi[i]), p) * psi[i] -
                     nl_pow(std::norm(ref[i]), p) * ref[i]);
  }
  return v;
}

ComplexField k1_feedback(const ComplexField& psi, const ComplexField& ref,
                         const CutoffSpec& chi) {
  return k1_feedback(psi, ref, cutoff_on_grid(chi, psi.grid).chi,
                     critical_power(psi.grid.dim()));
}

ComplexField k2_feedback(const ComplexField& psi, const ComplexField& ref,
                         const std::vector<double>& chi, const ControlSchedule& sched,
                         double t, double p) {
  require_match(psi, ref);
  const double slack = 1e-12 * sched.T_lambda;
  if (t < sched.t1 - slack || t > sched.t2 + slack)
    throw std::invalid_argument("k2 feedback evaluated outside [t1, t2]");
  const double damp = std::exp(-sched.mu * (t - sched.t1));
  const cplx imu(0.0, sched.mu);
  ComplexField v(psi.grid);
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (chi[i] == 0.0) continue;
    v[i] = chi[i] * (nl_pow(std::norm(psi[i]), p) * psi[i] -
                     damp * (nl_pow(std::norm(ref[i]), p) * ref[i] + imu * ref[i]));
  }
  return v;
}

ComplexField k2_feedback(const ComplexField& psi, const ComplexField& ref,
                         const CutoffSpec& chi, const ControlSchedule& sched, double t) {
  return k2_feedback(psi, ref, cutoff_on_grid(chi, psi.grid).chi, sched, t,
                     critical_power(psi.grid.dim()));
}

void K1Controller::evaluate(double t, const ComplexField& psi, ComplexField& v) const {
  v = k1_feedback(psi, ref_.value(t), chi_, p_);
}

void K2Controller::evaluate(double t, const ComplexField& psi, ComplexField& v) const {
  v = k2_feedback(psi, ref_.value(t), chi_, sched_, t, p_);
}

namespace {

double plateau_norm(const ComplexField& f, const std::vector<double>& chi) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (chi[i] == 1.0) s += std::norm(f[i]);
  return std::sqrt(s * f.grid.cell_volume());
}

}  // namespace

StabilizationResult stabilize_run(const ComplexField& psi0, const ControlSchedule& sched,
                                  const ReferenceTrajectory& ref, const CutoffSpec& chi_spec,
                                  const StabilizationOptions& opt) {
  require_same_shape(psi0.grid, ref.grid(), "stabilize_run");
  StabilizationResult res;
  res.initial_distance = sobolev_norm(psi0 - ref.value(0.0), 2.0);
  if (!(res.initial_distance < sched.delta))
    throw std::invalid_argument("initial datum is not within delta of the reference");
  const Grid& grid = psi0.grid;
  std::vector<double> chi = cutoff_on_grid(chi_spec, grid).chi;
  EvolveOptions ev = opt.evolve;
  if (!(ev.p > 0)) ev.p = critical_power(grid.dim());

  const Controller* active = nullptr;
  auto log_step = [&](const SimState& s, double) {
    ComplexField v(grid);
    active->evaluate(s.t, s.field, v);
    res.control_log.push_back({s.t, l2_norm(v)});
  };
  auto log_start = [&](const SimState& s) {
    if (!opt.log_control) return;
    ComplexField v(grid);
    active->evaluate(s.t, s.field, v);
    res.control_log.push_back({s.t, l2_norm(v)});
  };
  if (opt.log_control) ev.observer = log_step;

  K1Controller k1(ref, chi, ev.p);
  active = &k1;
  SimState s0{0.0, psi0, 0.0};
  log_start(s0);
  res.stage1 = evolve(s0, sched.t1, &k1, ev);
  res.stage1.final_state.t = sched.t1;
  res.norm_t1 = l2_norm(res.stage1.final_state.field);
  res.omega1_content_t1 = plateau_norm(res.stage1.final_state.field, chi);
  if (res.stage1.outcome != Outcome::completed) return res;

  ev.h1_reference = res.stage1.h1_reference;
  K2Controller k2(ref, chi, sched, ev.p);
  active = &k2;
  log_start(res.stage1.final_state);
  res.stage2 = evolve(res.stage1.final_state, sched.t2, &k2, ev);
  res.norm_t2 = l2_norm(res.stage2.final_state.field);
  res.omega1_content_t2 = plateau_norm(res.stage2.final_state.field, chi);

  for (std::size_t i = 1; i < res.control_log.size(); ++i) {
    const auto& a = res.control_log[i - 1];
    const auto& b = res.control_log[i];
    res.control_energy += 0.5 * (b.t - a.t) * (a.norm * a.norm + b.norm * b.norm);
  }
  if (res.stage2.outcome != Outcome::completed || !(opt.free_horizon > 0.0)) return res;

  EvolveOptions free_ev = ev;
  free_ev.observer = nullptr;
  res.stage3 = evolve(res.stage2.final_state, sched.t2 + opt.free_horizon, nullptr, free_ev);
  return res;
}

double ThetaProfile::value(double t) const {
  if (disabled) return 0.0;
  return smooth_step((t - 0.25 * T) / (0.25 * T));
}

double ThetaProfile::derivative(double t) const {
  if (disabled) return 0.0;
  return smooth_step_d1((t - 0.25 * T) / (0.25 * T)) / (0.25 * T);
}

ComplexField open_loop_reference(const ThetaProfile& theta, const CutoffField& chi,
                                 const ReferenceTrajectory& ref, double t) {
  if (t < 0.0) throw std::invalid_argument("open loop time must be nonnegative");
  ComplexField out(ref.grid());
  if (t >= theta.T) return out;
  ComplexField phi = ref.value(t);
  double th = theta.value(t);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - th * chi.chi[i]) * phi[i];
  return out;
}

ComplexField open_loop_control(const ThetaProfile& theta, const CutoffField& chi,
                               const ReferenceTrajectory& ref, double t, double p) {
  if (t < 0.0) throw std::invalid_argument("open loop time must be nonnegative");
  const Grid& g = ref.grid();
  ComplexField v(g);
  if (t >= theta.T) return v;
  const double th = theta.value(t), dth = theta.derivative(t);
  if (th == 0.0 && dth == 0.0) return v;
  ComplexField phi = ref.value(t);
  std::vector<ComplexField> gphi = ref.gradient(t);
  const cplx I(0.0, 1.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double c = chi.chi[i];
    cplx dot = 0.0;
    for (int j = 0; j < g.dim(); ++j) dot += chi.grad[i][j] * gphi[j][i];
    const double u = 1.0 - th * c;
    v[i] = -I * dth * c * phi[i] - 2.0 * th * dot - th * chi.lap[i] * phi[i] +
           (std::pow(u, p) - u) * nl_pow(std::norm(phi[i]), p) * phi[i];
  }
  return v;
}

ComplexField OpenLoopController::control_at(double t) const {
  return cached(mutex_, cache_, t, [&] { return open_loop_control(theta_, chi_, ref_, t, p_); });
}

void OpenLoopController::evaluate(double t, const ComplexField&, ComplexField& v) const {
  v = control_at(t);
}

OpenLoopBudget open_loop_budget(const BlowupSpec& spec, const GroundState& gs,
                                const ThetaProfile& theta, const CutoffField& chi,
                                const Grid& grid, int samples) {
  if (samples < 4) throw std::invalid_argument("budget needs at least 4 samples");
  const double T = spec.T_lambda;
  std::vector<double> ts, norms;
  for (int k = 0; k < samples; ++k) {
    double t = T * k / samples;
    ComplexField r = profile_residual_analytic(spec, gs, t, grid);
    double th = theta.value(t);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] *= 1.0 - th * chi.chi[i];
    ts.push_back(t);
    norms.push_back(l2_norm(r));
  }
  ts.push_back(T);
  norms.push_back(0.0);  // the residual vanishes as the core concentrates
  OpenLoopBudget b;
  double integral = 0.0;
  for (std::size_t k = 1; k < ts.size(); ++k)
    integral += 0.5 * (ts[k] - ts[k - 1]) * (norms[k] + norms[k - 1]);
  b.budget = integral / l2_norm(synth_profile(spec, gs, 0.0, grid));
  std::vector<double> x, y;
  for (std::size_t k = 0; k + 1 < ts.size(); ++k)
    if (norms[k] > 1e-280) {
      x.push_back(1.0 / core_width(spec, ts[k]));
      y.push_back(std::log(norms[k]));
    }
  if (x.size() >= 2) b.kappa_hat = -fit_line(x, y).slope;
  return b;
}

OpenLoopResult open_loop_run(const BlowupSpec& spec, const GroundState& gs,
                             const ThetaProfile& theta, const CutoffSpec& chi_spec,
                             const Grid& grid, const OpenLoopOptions& opt) {
  AnalyticReference ref(spec, gs, grid);
  CutoffField chi = cutoff_on_grid(chi_spec, grid);
  EvolveOptions ev = opt.evolve;
  if (!(ev.p > 0)) ev.p = gs.profile.p;
  OpenLoopController ctl(theta, chi, ref, ev.p);

  OpenLoopResult res;
  double prev_t = 0.0;
  double prev_sq = std::pow(l2_norm(ctl.control_at(0.0)), 2);
  auto check = [&](const SimState& s, double) {
    ComplexField v = ctl.control_at(s.t);
    // Geometric support: chi can underflow to 0 where its derivatives do not.
    for (std::size_t i = 0; i < v.size(); ++i) {
      Point x = grid.coords(i);
      double r2 = 0.0;
      for (int j = 0; j < grid.dim(); ++j) r2 += std::pow(x[j] - chi_spec.center[j], 2);
      if (r2 >= chi_spec.r_outer * chi_spec.r_outer && v[i] != cplx(0.0)) res.support_ok = false;
    }
    ++res.support_checks;
    double sq = std::pow(l2_norm(v), 2);
    res.control_energy += 0.5 * (s.t - prev_t) * (sq + prev_sq);
    prev_t = s.t;
    prev_sq = sq;
  };
  ev.observer = check;
  SimState s0{0.0, ref.value(0.0), 0.0};
  res.initial_norm = l2_norm(s0.field);
  res.traj = evolve(s0, spec.T_lambda, &ctl, ev);
  res.terminal_norm = l2_norm(res.traj.final_state.field);
  res.terminal_ratio = res.terminal_norm / res.initial_norm;
  OpenLoopBudget b = open_loop_budget(spec, gs, theta, chi, grid, opt.budget_samples);
  res.budget = b.budget;
  res.kappa_hat = b.kappa_hat;
  return res;
}

}  // namespace nlsctl
