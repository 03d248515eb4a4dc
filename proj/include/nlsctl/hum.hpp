#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "nlsctl/dynamics.hpp"
#include "nlsctl/grid.hpp"
#include "nlsctl/profile.hpp"

namespace nlsctl {

using ModalVector = Eigen::VectorXcd;

// a(x) from smooth_bump and a time bump phi(t) supported on
// [window_lo T, window_hi T].
struct ControlShape {
  CutoffSpec a;
  double T = 1.0;
  double window_lo = 0.1;
  double window_hi = 0.9;

  double phi_t(double t) const;
};

struct HumOptions {
  // Time step rule for the quadrature: dt * mu_max <= phase_step.
  double phase_step = 0.05;
  int min_steps = 200;
  int quadrature_points = 0;  // per axis for A = <e_j, a^2 e_k>; 0 picks a default
  double p = 0.0;             // nonlinearity power; 0 selects 1 + 4/d
};

// S psi0 = psi(0) where i psi_t + lap psi = a^2 phi^2 e^{it lap} psi0, psi(T) = 0,
// on the span of the first `modes` Dirichlet modes per axis. In the
// interaction picture the source does not depend on the state, so the RK4
// step reduces to Simpson's rule and S = i int phi^2 U* A U dt exactly.
class HumOperator {
 public:
  HumOperator(const RectDomain& domain, const ControlShape& shape, int modes,
              const HumOptions& opt = {});

  int dim() const { return domain_.dim(); }
  int modes_per_axis() const { return m_; }
  std::size_t size() const { return mu_.size(); }
  int time_steps() const { return nt_; }
  double horizon() const { return shape_.T; }
  double power() const { return p_; }
  const RectDomain& domain() const { return domain_; }
  const ControlShape& shape() const { return shape_; }
  const std::vector<double>& eigenvalues() const { return mu_; }
  const Eigen::MatrixXd& observation() const { return A_; }

  ModalVector apply_S(const ModalVector& dual) const;
  ModalVector apply_S(const ModalVector& dual, int nt) const;
  // Forward-time accumulation of the adjoint problem.
  ModalVector apply_S_adjoint(const ModalVector& w) const;
  Eigen::MatrixXcd assemble_dense() const;

  // Modal forcing phi^2(t) A U(t) dual of the control.
  ModalVector control_modal(const ModalVector& dual, double t) const;
  // Physical control a^2 phi^2(t) e^{it lap} dual on a grid of the same domain.
  ComplexField control_field(const ModalVector& dual, double t, const Grid& grid) const;

  ModalVector project(const ComplexField& field) const;
  ComplexField to_field(const ModalVector& c, const Grid& grid) const;
  double h2_norm(const ModalVector& c) const;

  // Nonlinear term P_M(-|psi|^{p-1} psi) for psi = sum c_k e_k, through a
  // dealiased physical grid.
  ModalVector nonlinear_term(const ModalVector& c) const;

  // Integrates i psi_t + lap psi = -|psi|^{p-1} psi + v (dual) backward from
  // psi(T) = 0; returns L dual = psi(0) and K dual = phi(0), where phi solves
  // the linear problem sourced by the same nonlinear term.
  void backward_nonlinear(const ModalVector& dual, ModalVector& L, ModalVector& K) const;
  // Forward controlled trajectory from c0; returns c(T) and optionally norms.
  ModalVector forward(const ModalVector& c0, const ModalVector& dual, bool nonlinear,
                      int nt, std::vector<double>* times = nullptr,
                      std::vector<double>* norms = nullptr) const;

 private:
  ModalVector phases(double t) const;  // e^{-i mu t}
  RectDomain domain_;
  ControlShape shape_;
  int m_;
  int nt_;
  double p_;
  std::vector<double> mu_;
  Eigen::MatrixXd A_;
  Grid phys_;  // dealiasing grid for the nonlinearity
};

struct SolveReport {
  ModalVector x;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;  // ||S x - b|| / ||b||
  std::vector<double> history;
};

// CG on the normal equations S* S x = S* b (CGLS form).
SolveReport solve_S_inverse(const HumOperator& S, const ModalVector& target, double tol,
                            int max_iter);

double condition_number(const Eigen::MatrixXcd& M);

struct LinearControlResult {
  SolveReport solve;
  ModalVector dual;
  double initial_norm = 0.0;
  double terminal_norm = 0.0;  // on a twice finer time grid
  std::vector<double> times, norms;
};

LinearControlResult linear_null_control(const HumOperator& S, const ModalVector& psi0,
                                        double tol, int max_iter = 500);

struct ConvergenceEntry {
  int iter = 0;
  double residual = 0.0;  // ||x_k - x_{k-1}||_{H2} / ||x_k||_{H2}
  double contraction_estimate = 0.0;
};

struct NonlinearControlResult {
  bool converged = false;
  bool diverged = false;
  ModalVector dual;
  double contraction_factor = 0.0;  // first measured ratio
  double max_contraction = 0.0;
  std::vector<ConvergenceEntry> log;
  double initial_norm = 0.0;
  double terminal_norm = 0.0;
  std::vector<double> times, norms;
};

NonlinearControlResult nonlinear_null_control(const HumOperator& S, const ModalVector& u0,
                                              double tol, int max_fp_iter = 50);

// Bisection on the amplitude s of u0 = s u_hat between a converging and a
// diverging amplitude.
struct RadiusEstimate {
  double converging = 0.0;
  double diverging = 0.0;
  int evaluations = 0;
};
RadiusEstimate estimate_local_radius(const HumOperator& S, const ModalVector& u_hat,
                                     double lo, double hi, int steps, double tol);

// Drives the physical solver with the HUM control of a dual datum, time
// measured from t0.
class HumController : public Controller {
 public:
  HumController(const HumOperator& S, ModalVector dual, Grid grid, double t0)
      : S_(S), dual_(std::move(dual)), grid_(std::move(grid)), t0_(t0) {}
  void evaluate(double t, const ComplexField& psi, ComplexField& v) const override;

 private:
  const HumOperator& S_;
  ModalVector dual_;
  Grid grid_;
  double t0_;
};

void write_convergence_csv(const std::vector<ConvergenceEntry>& log, const std::string& path);

}  // namespace nlsctl
