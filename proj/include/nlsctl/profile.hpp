#pragma once

#include <vector>

#include "nlsctl/ground_state.hpp"
#include "nlsctl/grid.hpp"

namespace nlsctl {

struct CutoffSpec {
  Point center{0.0, 0.0};
  double r_inner = 0.0;
  double r_outer = 0.0;
};

CutoffSpec make_cutoff(const Point& center, double r_inner, double r_outer);
bool ball_inside(const CutoffSpec& c, const Grid& grid);

// Normalized integral of the bump exp(1 - 1/(1 - u^2)), u = 2s - 1:
// 0 for s <= 0, 1 for s >= 1, H(1/2) = 1/2, H(s) + H(1-s) = 1.
double smooth_step(double s);
double smooth_step_d1(double s);
double smooth_step_d2(double s);

double smooth_bump(const CutoffSpec& spec, const Point& x, int dim = 2);

// chi, grad chi and laplacian of chi sampled at the nodes (closed form).
struct CutoffField {
  std::vector<double> chi;
  std::vector<Point> grad;
  std::vector<double> lap;
};

CutoffField cutoff_on_grid(const CutoffSpec& spec, const Grid& grid);

struct BlowupSpec {
  std::vector<Point> points;
  double lambda = 0.0;
  double T_lambda = 0.0;
  std::vector<CutoffSpec> cutoffs;  // phi_k, one per point
};

// T_lambda = a lambda^-2; requires a < c_bound, distinct interior points and
// pairwise disjoint cutoff supports contained in the domain.
BlowupSpec make_blowup_spec(const Grid& grid, std::vector<Point> points, double lambda,
                            double a, std::vector<CutoffSpec> cutoffs,
                            double c_bound = 1.0);

double core_width(const BlowupSpec& spec, double t);  // lambda (T - t)

ComplexField synth_profile(const BlowupSpec& spec, const GroundState& gs, double t,
                           const Grid& grid);
std::vector<ComplexField> synth_profile_gradient(const BlowupSpec& spec,
                                                 const GroundState& gs, double t,
                                                 const Grid& grid);

// i dR/dt + lap R + |R|^{p-1} R in closed form. The uncut profile is an
// exact solution, so only cutoff-annulus terms survive.
ComplexField profile_residual_analytic(const BlowupSpec& spec, const GroundState& gs,
                                       double t, const Grid& grid);

// Same quantity with a centered time difference and the spectral Laplacian.
ComplexField nls_residual_field(const BlowupSpec& spec, const GroundState& gs, double t,
                                double dt, const Grid& grid);
double nls_residual(const BlowupSpec& spec, const GroundState& gs, double t, double dt,
                    const Grid& grid);

// H^s-type norm over the nodes outside every inner ball of the given radii.
double exterior_norm(const ComplexField& field, const std::vector<Point>& centers,
                     const std::vector<double>& radii, int s);
double exterior_norm(const ComplexField& field, const BlowupSpec& spec, int s);

double profile_h2_growth(const BlowupSpec& spec, const GroundState& gs, double t,
                         const Grid& grid);

}  // namespace nlsctl
