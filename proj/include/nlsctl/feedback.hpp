#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "nlsctl/dynamics.hpp"
#include "nlsctl/ground_state.hpp"
#include "nlsctl/profile.hpp"

namespace nlsctl {

struct ControlSchedule {
  double t1 = 0.0;
  double t2 = 0.0;
  double mu = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  double lambda = 0.0;
  double T_lambda = 0.0;
};

// t1 = T(1 - 2T), t2 = T(1 - T), mu (t2 - t1) = 1/(lambda T^2), delta = eps/16.
ControlSchedule make_schedule(double lambda, double T_lambda, double epsilon);

// Radii of the fixed point balls, from constants that are only known to exist.
struct FixedPointConstants {
  double C = 1.0;
  double C_tilde = 1.0;
  double c = 1.0;
  double lambda0 = 1.0;
};
struct BallRadii {
  double M1 = 0.0;
  double M2 = 0.0;
};
BallRadii ball_radii(const FixedPointConstants& k);

enum class Provenance { analytic_Rlambda, stored_free_run };
const char* provenance_name(Provenance p);

class ReferenceTrajectory {
 public:
  virtual ~ReferenceTrajectory() = default;
  virtual ComplexField value(double t) const = 0;
  virtual std::vector<ComplexField> gradient(double t) const;  // spectral by default
  virtual Provenance provenance() const = 0;
  virtual const Grid& grid() const = 0;
};

class AnalyticReference : public ReferenceTrajectory {
 public:
  AnalyticReference(BlowupSpec spec, GroundState gs, Grid grid);
  ComplexField value(double t) const override;
  std::vector<ComplexField> gradient(double t) const override;
  Provenance provenance() const override { return Provenance::analytic_Rlambda; }
  const Grid& grid() const override { return grid_; }
  const BlowupSpec& spec() const { return spec_; }
  const GroundState& ground_state() const { return gs_; }

 private:
  BlowupSpec spec_;
  GroundState gs_;
  Grid grid_;
  mutable std::mutex mutex_;
  mutable std::vector<std::pair<double, ComplexField>> cache_;
};

// Replays an uncontrolled run started from R_lambda(0). States are stored on
// a fixed step lattice so value(t) does not depend on query order.
class StoredFreeRunReference : public ReferenceTrajectory {
 public:
  StoredFreeRunReference(const BlowupSpec& spec, const GroundState& gs, const Grid& grid,
                         double t_end, double dt_replay, std::size_t keep_every = 64);
  ComplexField value(double t) const override;
  Provenance provenance() const override { return Provenance::stored_free_run; }
  const Grid& grid() const override { return grid_; }

 private:
  Grid grid_;
  double p_;
  double dt_;
  double t_end_;
  std::size_t keep_every_;
  std::vector<ComplexField> stored_;  // lattice states j * keep_every
  mutable std::mutex mutex_;
  mutable std::size_t cursor_index_ = 0;
  mutable ComplexField cursor_;
};

ComplexField k1_feedback(const ComplexField& psi, const ComplexField& ref,
                         const std::vector<double>& chi, double p);
ComplexField k1_feedback(const ComplexField& psi, const ComplexField& ref,
                         const CutoffSpec& chi);
ComplexField k2_feedback(const ComplexField& psi, const ComplexField& ref,
                         const std::vector<double>& chi, const ControlSchedule& sched,
                         double t, double p);
ComplexField k2_feedback(const ComplexField& psi, const ComplexField& ref,
                         const CutoffSpec& chi, const ControlSchedule& sched, double t);

class K1Controller : public Controller {
 public:
  K1Controller(const ReferenceTrajectory& ref, std::vector<double> chi, double p)
      : ref_(ref), chi_(std::move(chi)), p_(p) {}
  void evaluate(double t, const ComplexField& psi, ComplexField& v) const override;

 private:
  const ReferenceTrajectory& ref_;
  std::vector<double> chi_;
  double p_;
};

class K2Controller : public Controller {
 public:
  K2Controller(const ReferenceTrajectory& ref, std::vector<double> chi,
               ControlSchedule sched, double p)
      : ref_(ref), chi_(std::move(chi)), sched_(sched), p_(p) {}
  void evaluate(double t, const ComplexField& psi, ComplexField& v) const override;
  double rate(double) const override { return sched_.mu; }

 private:
  const ReferenceTrajectory& ref_;
  std::vector<double> chi_;
  ControlSchedule sched_;
  double p_;
};

struct ControlLogEntry {
  double t = 0.0;
  double norm = 0.0;  // ||v(t)||_{L2}
};

struct StabilizationOptions {
  EvolveOptions evolve;
  double free_horizon = 0.0;  // length of the uncontrolled run after t2
  bool log_control = true;
};

struct StabilizationResult {
  Trajectory stage1;
  Trajectory stage2;
  std::optional<Trajectory> stage3;
  double initial_distance = 0.0;  // ||psi0 - ref(0)||_{H2,spec}
  double norm_t1 = 0.0;
  double norm_t2 = 0.0;
  double omega1_content_t1 = 0.0;  // L2 norm over the plateau of chi
  double omega1_content_t2 = 0.0;
  std::vector<ControlLogEntry> control_log;
  double control_energy = 0.0;  // int ||v||^2 dt
};

StabilizationResult stabilize_run(const ComplexField& psi0, const ControlSchedule& sched,
                                  const ReferenceTrajectory& ref, const CutoffSpec& chi,
                                  const StabilizationOptions& opt);

// theta = 0 on [0, T/4], 1 on [T/2, T], smooth step in between.
struct ThetaProfile {
  double T = 0.0;
  bool disabled = false;  // theta identically 0
  double value(double t) const;
  double derivative(double t) const;
};

ComplexField open_loop_reference(const ThetaProfile& theta, const CutoffField& chi,
                                 const ReferenceTrajectory& ref, double t);
ComplexField open_loop_control(const ThetaProfile& theta, const CutoffField& chi,
                               const ReferenceTrajectory& ref, double t, double p);

class OpenLoopController : public Controller {
 public:
  OpenLoopController(const ThetaProfile& theta, CutoffField chi,
                     const ReferenceTrajectory& ref, double p)
      : theta_(theta), chi_(std::move(chi)), ref_(ref), p_(p) {}
  void evaluate(double t, const ComplexField& psi, ComplexField& v) const override;
  ComplexField control_at(double t) const;

 private:
  ThetaProfile theta_;
  CutoffField chi_;
  const ReferenceTrajectory& ref_;
  double p_;
  mutable std::mutex mutex_;
  mutable std::vector<std::pair<double, ComplexField>> cache_;
};

struct OpenLoopResult {
  Trajectory traj;
  double initial_norm = 0.0;
  double terminal_norm = 0.0;
  double terminal_ratio = 0.0;
  double control_energy = 0.0;
  bool support_ok = true;
  std::size_t support_checks = 0;
  double budget = 0.0;      // int ||(1 - theta chi) res|| dt / ||psi(0)||
  double kappa_hat = 0.0;   // fitted decay rate of ||res|| in 1/(lambda (T - t))
};

struct OpenLoopOptions {
  EvolveOptions evolve;
  int budget_samples = 200;
};

OpenLoopResult open_loop_run(const BlowupSpec& spec, const GroundState& gs,
                             const ThetaProfile& theta, const CutoffSpec& chi,
                             const Grid& grid, const OpenLoopOptions& opt);

// Duhamel budget of the open-loop reference and the fitted residual decay.
struct OpenLoopBudget {
  double budget = 0.0;
  double kappa_hat = 0.0;
};
OpenLoopBudget open_loop_budget(const BlowupSpec& spec, const GroundState& gs,
                                const ThetaProfile& theta, const CutoffField& chi,
                                const Grid& grid, int samples);

}  // namespace nlsctl
