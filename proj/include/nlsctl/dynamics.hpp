#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nlsctl/ground_state.hpp"
#include "nlsctl/grid.hpp"

namespace nlsctl {

// Solves i psi_t + lap psi = -|psi|^{p-1} psi + v with Dirichlet conditions.

struct SimState {
  double t = 0.0;
  ComplexField field;
  double dt = 0.0;
};

// A control v(t, x) that may depend on the current state. Evaluation must be
// a pure function of (t, psi).
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void evaluate(double t, const ComplexField& psi, ComplexField& v) const = 0;
  // Inverse time scale of explicit time dependence, used by the step size rule.
  virtual double rate(double /*t*/) const { return 0.0; }
};

// Norm data read off the spectral coefficients at the end of a step.
struct StepDiagnostics {
  double mass = 0.0;
  double grad_sq = 0.0;
  double h2_sq = 0.0;
};

StepDiagnostics spectral_diagnostics(const ComplexField& field);

class Stepper {
 public:
  virtual ~Stepper() = default;
  virtual StepDiagnostics step(SimState& s, double dt, const Controller* control) = 0;
};

// Half linear step, nonlinear (and control) step, half linear step.
class StrangStepper : public Stepper {
 public:
  explicit StrangStepper(double p) : p_(p) {}
  StepDiagnostics step(SimState& s, double dt, const Controller* control) override;

 private:
  void half_linear(const Grid& g, std::vector<cplx>& data, double dt,
                   StepDiagnostics* diag);
  double p_;
  std::vector<std::vector<double>> axis_mu_;
  std::vector<cplx> k1_, k2_, k3_, k4_;
  ComplexField stage_, v_;
};

// Crank-Nicolson with the relaxation potential Phi^{n+1/2} of Besse,
// extended to variable steps. Stateful: carries Phi^{n-1/2}.
class RelaxationStepper : public Stepper {
 public:
  explicit RelaxationStepper(double p, double iteration_tol = 1e-12)
      : p_(p), tol_(iteration_tol) {}
  StepDiagnostics step(SimState& s, double dt, const Controller* control) override;

 private:
  double p_;
  double tol_;
  std::vector<double> phi_;
  double prev_dt_ = 0.0;
};

enum class StepperKind { strang, relaxation };
std::unique_ptr<Stepper> make_stepper(StepperKind kind, double p);

struct Monitors {
  std::vector<double> t, mass, energy, h1, h2, virial, linf;
  std::size_t size() const { return t.size(); }
};

enum class Outcome { completed, blowup_detected, dt_underflow };
const char* outcome_name(Outcome o);

struct Trajectory {
  std::vector<std::pair<double, ComplexField>> snapshots;
  Monitors monitors;
  Outcome outcome = Outcome::completed;
  SimState final_state;
  std::size_t steps = 0;
  double h1_reference = 0.0;
};

struct EvolveOptions {
  double p = 0.0;  // 0 selects the mass-critical power of the grid dimension
  double cfl = 0.1;
  double dt_max = 1e-3;
  double dt_min = 1e-12;
  double blowup_ratio = 50.0;
  double h1_reference = 0.0;  // 0 uses the initial gradient norm
  int monitor_every = 1;
  double snapshot_every = 0.0;  // 0 keeps only the initial and final fields
  std::optional<Point> virial_center;
  StepperKind stepper = StepperKind::strang;
  std::size_t max_steps = 50'000'000;
  // Called after every accepted step.
  std::function<void(const SimState&, double dt)> observer;
};

double adaptive_dt(const SimState& state, const EvolveOptions& opt, double rate = 0.0);
bool detect_blowup(double h1, double h1_reference, double natural_dt,
                   const EvolveOptions& opt);

Trajectory evolve(SimState state, double t_end, const Controller* control,
                  const EvolveOptions& opt);

double mass(const ComplexField& field);
double energy(const ComplexField& field, double p);
double potential_term(const ComplexField& field, double p);  // (1/(p+1)) ||psi||_{p+1}^{p+1}
double virial(const ComplexField& field, const Point& center);

void append_monitors(Monitors& m, double t, const ComplexField& field, double p,
                     const Point& center, const StepDiagnostics& diag);

struct ConcavityReport {
  bool passed = false;
  double max_second_difference = 0.0;
  double bound = 0.0;  // 16 E(psi_0)
};

// Second divided differences of V over monitor samples taken every `stride`
// entries, compared against 16 E(psi_0) + tol.
ConcavityReport virial_concavity_check(const Trajectory& traj, double energy0, double tol,
                                       std::size_t stride = 1);

struct GnReport {
  bool passed = false;
  double energy = 0.0;
  double bound = 0.0;  // (1/2)||grad psi||^2 (1 - (m/m_Q)^{2/d})
};

GnReport gn_energy_bound_check(const ComplexField& field, const GroundState& gs,
                               double rel_tol = 1e-10);

void write_monitors_csv(const Monitors& m, const std::string& path);

}  // namespace nlsctl
