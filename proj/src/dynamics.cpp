#include "nlsctl/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <stdexcept>

#include "nlsctl/spectral.hpp"

namespace nlsctl {

namespace {

// |psi|^{p-1} from |psi|^2.
inline double nl_pow(double a2, double p) {
  if (p == 3.0) return a2;
  if (p == 5.0) return a2 * a2;
  return std::pow(a2, 0.5 * (p - 1.0));
}

std::vector<std::vector<double>> axis_eigenvalues(const Grid& g) {
  std::vector<std::vector<double>> mu(g.dim());
  for (int j = 0; j < g.dim(); ++j)
    for (int i = 0; i < g.n(j); ++i) {
      double k = (i + 1) * std::numbers::pi / g.length(j);
      mu[j].push_back(k * k);
    }
  return mu;
}

StepDiagnostics coefficient_sums(const Grid& g, const std::vector<cplx>& c,
                                 const std::vector<std::vector<double>>& mu) {
  StepDiagnostics d;
  if (g.dim() == 1) {
    for (int i = 0; i < g.n(0); ++i) {
      double a = std::norm(c[i]), m = mu[0][i];
      d.mass += a;
      d.grad_sq += m * a;
      d.h2_sq += (1 + m) * (1 + m) * a;
    }
    return d;
  }
  const int n0 = g.n(0), n1 = g.n(1);
  for (int i = 0; i < n0; ++i)
    for (int j = 0; j < n1; ++j) {
      double a = std::norm(c[static_cast<std::size_t>(i) * n1 + j]);
      double m = mu[0][i] + mu[1][j];
      d.mass += a;
      d.grad_sq += m * a;
      d.h2_sq += (1 + m) * (1 + m) * a;
    }
  return d;
}

}  // namespace

StepDiagnostics spectral_diagnostics(const ComplexField& field) {
  std::vector<cplx> c = field.values;
  dst_forward_inplace(field.grid, c);
  return coefficient_sums(field.grid, c, axis_eigenvalues(field.grid));
}

// Unscaled transforms with the round-trip factor 1/(2(n_j+1)) folded into the
// phases: for n_j + 1 a power of two the rescaling is exact, so the step
// carries no systematic mass drift from the normalization.
void StrangStepper::half_linear(const Grid& g, std::vector<cplx>& data, double dt,
                                StepDiagnostics* diag) {
  dst_raw_inplace(g, data);
  if (diag) {
    *diag = coefficient_sums(g, data, axis_mu_);
    double s2 = std::pow(dst_forward_scale(g), 2);
    diag->mass *= s2;
    diag->grad_sq *= s2;
    diag->h2_sq *= s2;
  }
  std::vector<std::vector<cplx>> f(g.dim());
  for (int j = 0; j < g.dim(); ++j) {
    const double norm = 1.0 / (2.0 * (g.n(j) + 1));
    for (double m : axis_mu_[j]) f[j].push_back(norm * std::polar(1.0, -0.5 * dt * m));
  }
  if (g.dim() == 1) {
    for (int i = 0; i < g.n(0); ++i) data[i] *= f[0][i];
  } else {
    const int n0 = g.n(0), n1 = g.n(1);
    for (int i = 0; i < n0; ++i) {
      cplx* row = data.data() + static_cast<std::size_t>(i) * n1;
      for (int j = 0; j < n1; ++j) row[j] *= f[0][i] * f[1][j];
    }
  }
  dst_raw_inplace(g, data);
}

StepDiagnostics StrangStepper::step(SimState& s, double dt, const Controller* control) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  const Grid& g = s.field.grid;
  if (axis_mu_.size() != static_cast<std::size_t>(g.dim()) ||
      axis_mu_[0].size() != static_cast<std::size_t>(g.n(0)) ||
      (g.dim() == 2 && axis_mu_[1].size() != static_cast<std::size_t>(g.n(1))))
    axis_mu_ = axis_eigenvalues(g);
  auto& psi = s.field.values;
  half_linear(g, psi, dt, nullptr);

  const std::size_t n = psi.size();
  if (!control) {
    for (std::size_t i = 0; i < n; ++i)
      psi[i] *= std::polar(1.0, dt * nl_pow(std::norm(psi[i]), p_));
  } else {
    // psi' = i (|psi|^{p-1} psi - v(t, psi)), one RK4 step per node.
    if (!stage_.grid.same_shape(g)) {
      stage_ = ComplexField(g);
      v_ = ComplexField(g);
      k1_.resize(n);
      k2_.resize(n);
      k3_.resize(n);
      k4_.resize(n);
    }
    const cplx I(0.0, 1.0);
    auto rhs = [&](double t, const ComplexField& y, std::vector<cplx>& k) {
      control->evaluate(t, y, v_);
      for (std::size_t i = 0; i < n; ++i)
        k[i] = I * (nl_pow(std::norm(y[i]), p_) * y[i] - v_[i]);
    };
    const double t0 = s.t;
    stage_.values = psi;
    rhs(t0, stage_, k1_);
    for (std::size_t i = 0; i < n; ++i) stage_[i] = psi[i] + 0.5 * dt * k1_[i];
    rhs(t0 + 0.5 * dt, stage_, k2_);
    for (std::size_t i = 0; i < n; ++i) stage_[i] = psi[i] + 0.5 * dt * k2_[i];
    rhs(t0 + 0.5 * dt, stage_, k3_);
    for (std::size_t i = 0; i < n; ++i) stage_[i] = psi[i] + dt * k3_[i];
    rhs(t0 + dt, stage_, k4_);
    for (std::size_t i = 0; i < n; ++i)
      psi[i] += dt / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
  }

  StepDiagnostics diag;
  half_linear(g, psi, dt, &diag);
  s.t += dt;
  s.dt = dt;
  return diag;
}

StepDiagnostics RelaxationStepper::step(SimState& s, double dt, const Controller* control) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  const Grid& g = s.field.grid;
  auto& psi = s.field.values;
  const std::size_t n = psi.size();
  if (phi_.size() != n) {
    phi_.resize(n);
    for (std::size_t i = 0; i < n; ++i) phi_[i] = nl_pow(std::norm(psi[i]), p_);
    prev_dt_ = dt;
  }
  const double r = dt / prev_dt_;
  for (std::size_t i = 0; i < n; ++i)
    phi_[i] = (1.0 + r) * nl_pow(std::norm(psi[i]), p_) - r * phi_[i];
  prev_dt_ = dt;

  const std::vector<double> mu = g.eigenvalues();
  const cplx I(0.0, 1.0);
  // (i/dt + lap/2 + Phi/2) psi^{n+1} = (i/dt - lap/2 - Phi/2) psi^n + v^{n+1/2}
  std::vector<cplx> lin = psi;
  dst_forward_inplace(g, lin);
  for (std::size_t k = 0; k < n; ++k) lin[k] *= I / dt + 0.5 * mu[k];
  dst_inverse_inplace(g, lin);
  for (std::size_t i = 0; i < n; ++i) lin[i] -= 0.5 * phi_[i] * psi[i];

  // The constant part c of Phi goes into the diagonal solve, so the fixed
  // point contracts like dt max|Phi - c| / 2.
  auto [lo, hi] = std::minmax_element(phi_.begin(), phi_.end());
  const double c = 0.5 * (*lo + *hi);
  ComplexField next(g, psi), mid(g), v(g);
  std::vector<cplx> rhs(n);
  bool converged = false;
  for (int it = 0; it < 200 && !converged; ++it) {
    if (control) {
      for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (psi[i] + next[i]);
      control->evaluate(s.t + 0.5 * dt, mid, v);
    }
    for (std::size_t i = 0; i < n; ++i)
      rhs[i] = lin[i] - 0.5 * (phi_[i] - c) * next[i] + (control ? v[i] : cplx(0.0));
    dst_forward_inplace(g, rhs);
    for (std::size_t k = 0; k < n; ++k) rhs[k] /= I / dt - 0.5 * mu[k] + 0.5 * c;
    dst_inverse_inplace(g, rhs);
    double change = 0.0, size = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      change = std::max(change, std::abs(rhs[i] - next[i]));
      size = std::max(size, std::abs(rhs[i]));
    }
    next.values.swap(rhs);
    converged = change <= tol_ * std::max(size, 1e-300);
  }
  if (!converged) throw std::runtime_error("relaxation fixed point did not converge");
  psi.swap(next.values);
  s.t += dt;
  s.dt = dt;
  return spectral_diagnostics(s.field);
}

std::unique_ptr<Stepper> make_stepper(StepperKind kind, double p) {
  if (kind == StepperKind::relaxation) return std::make_unique<RelaxationStepper>(p);
  return std::make_unique<StrangStepper>(p);
}

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::completed: return "completed";
    case Outcome::blowup_detected: return "blowup_detected";
    case Outcome::dt_underflow: return "dt_underflow";
  }
  return "unknown";
}

double adaptive_dt(const SimState& state, const EvolveOptions& opt, double rate) {
  double p = opt.p > 0 ? opt.p : critical_power(state.field.grid.dim());
  double m2 = 0.0;
  for (const auto& v : state.field.values) m2 = std::max(m2, std::norm(v));
  return std::min(opt.dt_max, opt.cfl / (1.0 + nl_pow(m2, p) + rate));
}

bool detect_blowup(double h1, double h1_reference, double natural_dt,
                   const EvolveOptions& opt) {
  if (!std::isfinite(h1)) return true;
  if (natural_dt < opt.dt_min) return true;
  return h1_reference > 0.0 && h1 > opt.blowup_ratio * h1_reference;
}

double mass(const ComplexField& field) {
  double s = 0.0;
  for (const auto& v : field.values) s += std::norm(v);
  return s * field.grid.cell_volume();
}

double potential_term(const ComplexField& field, double p) {
  double s = 0.0;
  for (const auto& v : field.values) {
    double a2 = std::norm(v);
    s += a2 * nl_pow(a2, p);
  }
  return s * field.grid.cell_volume() / (p + 1.0);
}

double energy(const ComplexField& field, double p) {
  return 0.5 * gradient_norm_sq(dst_forward(field)) - potential_term(field, p);
}

double virial(const ComplexField& field, const Point& center) {
  const Grid& g = field.grid;
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double r = distance(g.coords(i), center, g.dim());
    s += r * r * std::norm(field[i]);
  }
  return s * g.cell_volume();
}

void append_monitors(Monitors& m, double t, const ComplexField& field, double p,
                     const Point& center, const StepDiagnostics& diag) {
  const Grid& g = field.grid;
  double pot = 0.0, vir = 0.0, linf2 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double a2 = std::norm(field[i]);
    pot += a2 * nl_pow(a2, p);
    double r = distance(g.coords(i), center, g.dim());
    vir += r * r * a2;
    linf2 = std::max(linf2, a2);
  }
  const double w = g.cell_volume();
  m.t.push_back(t);
  m.mass.push_back(diag.mass);
  m.energy.push_back(0.5 * diag.grad_sq - pot * w / (p + 1.0));
  m.h1.push_back(std::sqrt(diag.grad_sq));
  m.h2.push_back(std::sqrt(diag.h2_sq));
  m.virial.push_back(vir * w);
  m.linf.push_back(std::sqrt(linf2));
}

Trajectory evolve(SimState state, double t_end, const Controller* control,
                  const EvolveOptions& opt) {
  if (!(t_end > state.t)) throw std::invalid_argument("evolve needs t_end > t");
  EvolveOptions o = opt;
  if (!(o.p > 0)) o.p = critical_power(state.field.grid.dim());
  const Point center = o.virial_center.value_or(state.field.grid.midpoint());
  auto stepper = make_stepper(o.stepper, o.p);

  Trajectory traj;
  StepDiagnostics diag = spectral_diagnostics(state.field);
  traj.h1_reference = o.h1_reference > 0 ? o.h1_reference : std::sqrt(diag.grad_sq);
  traj.snapshots.emplace_back(state.t, state.field);
  append_monitors(traj.monitors, state.t, state.field, o.p, center, diag);
  double next_snapshot = state.t + o.snapshot_every;
  const int cadence = std::max(1, o.monitor_every);

  while (state.t < t_end) {
    if (traj.steps >= o.max_steps) throw std::runtime_error("evolve exceeded max_steps");
    double rate = control ? control->rate(state.t) : 0.0;
    double natural = adaptive_dt(state, o, rate);
    if (natural < o.dt_min) {
      traj.outcome = Outcome::dt_underflow;
      break;
    }
    double dt = natural;
    bool last = false;
    if (state.t + dt * (1.0 + 1e-9) >= t_end) {
      dt = t_end - state.t;
      last = true;
    }
    diag = stepper->step(state, dt, control);
    if (last) state.t = t_end;
    ++traj.steps;
    if (o.observer) o.observer(state, dt);
    double h1 = std::sqrt(diag.grad_sq);
    bool blown = detect_blowup(h1, traj.h1_reference, natural, o);
    if (last || blown || traj.steps % cadence == 0)
      append_monitors(traj.monitors, state.t, state.field, o.p, center, diag);
    if (o.snapshot_every > 0 && state.t >= next_snapshot && !last) {
      traj.snapshots.emplace_back(state.t, state.field);
      while (next_snapshot <= state.t) next_snapshot += o.snapshot_every;
    }
    if (blown) {
      traj.outcome = Outcome::blowup_detected;
      break;
    }
  }
  traj.snapshots.emplace_back(state.t, state.field);
  traj.final_state = std::move(state);
  return traj;
}

ConcavityReport virial_concavity_check(const Trajectory& traj, double energy0, double tol,
                                       std::size_t stride) {
  ConcavityReport rep;
  rep.bound = 16.0 * energy0;
  const auto& m = traj.monitors;
  std::vector<double> t, V;
  for (std::size_t i = 0; i < m.size(); i += std::max<std::size_t>(1, stride)) {
    t.push_back(m.t[i]);
    V.push_back(m.virial[i]);
  }
  rep.max_second_difference = -INFINITY;
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    double a = (V[i + 1] - V[i]) / (t[i + 1] - t[i]);
    double b = (V[i] - V[i - 1]) / (t[i] - t[i - 1]);
    rep.max_second_difference =
        std::max(rep.max_second_difference, 2.0 * (a - b) / (t[i + 1] - t[i - 1]));
  }
  rep.passed = t.size() >= 3 && rep.max_second_difference <= rep.bound + tol;
  return rep;
}

GnReport gn_energy_bound_check(const ComplexField& field, const GroundState& gs,
                               double rel_tol) {
  const double p = gs.profile.p;
  const int d = field.grid.dim();
  SpectralCoeffs c = dst_forward(field);
  double grad = gradient_norm_sq(c);
  double pot = potential_term(field, p);
  double m = mass(field);
  GnReport rep;
  rep.energy = 0.5 * grad - pot;
  rep.bound = 0.5 * grad * (1.0 - std::pow(m / gs.mass_sq, 2.0 / d));
  double scale = std::max({std::abs(rep.energy), std::abs(rep.bound), 0.5 * grad, pot});
  rep.passed = rep.energy - rep.bound >= -rel_tol * scale;
  return rep;
}

void write_monitors_csv(const Monitors& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "t,mass,energy,h1,h2,virial,linf\n" << std::setprecision(17);
  for (std::size_t i = 0; i < m.size(); ++i)
    out << m.t[i] << ',' << m.mass[i] << ',' << m.energy[i] << ',' << m.h1[i] << ','
        << m.h2[i] << ',' << m.virial[i] << ',' << m.linf[i] << '\n';
}

}  // namespace nlsctl
