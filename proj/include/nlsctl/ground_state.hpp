#pragma once

#include <string>
#include <vector>

#include "nlsctl/grid.hpp"

namespace nlsctl {

// Radial samples of Q on a uniform abscissa r_i = i dr, with Q' stored for
// cubic Hermite interpolation.
struct RadialProfile {
  int dim = 0;
  double p = 0.0;
  double dr = 0.0;
  std::vector<double> r;
  std::vector<double> q;
  std::vector<double> dq;
};

struct DecayFit {
  double C0 = 0.0;
  double D0 = 0.0;
};

struct GroundState {
  RadialProfile profile;
  double mass_sq = 0.0;
  DecayFit decay;

  double q0() const { return profile.q.front(); }
  // Interpolated Q(r), extended past the last sample by q_last e^{-D0 (r - r_last)}.
  double value(double r) const;
  double derivative(double r) const;
};

double critical_power(int dim);  // 1 + 4/d

GroundState ground_state_1d();

struct ShootingOptions {
  double dr = 1e-3;
  double r_max = 20.0;
  double q0_lo = 2.0;
  double q0_hi = 2.5;
  double bracket_width = 1e-12;
  // Samples are kept while the two bracketing solutions agree to this
  // relative tolerance; beyond that the shooting instability dominates.
  double trust_rel = 1e-6;
};

ShootingOptions default_shooting(int dim);

GroundState shoot_radial(int dim, double tol);
GroundState shoot_radial(int dim, double tol, const ShootingOptions& opt);

DecayFit decay_fit(const RadialProfile& profile);

// Sup norm of Q'' + (d-1)/r Q' - Q + Q^p from fourth-order central
// differences of the stored samples (even reflection at r = 0).
double ode_residual(const RadialProfile& profile);

// Radial integrals over R^d of Q^2 and |Q'|^2 (Simpson plus analytic tail).
double radial_mass(const GroundState& gs);
double radial_gradient_sq(const GroundState& gs);

ComplexField assemble_Q_on_grid(const GroundState& gs, const Grid& grid,
                                const Point& center, double scale);

void write_profile_csv(const RadialProfile& profile, const std::string& path);

}  // namespace nlsctl
