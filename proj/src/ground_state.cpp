#include "nlsctl/ground_state.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <stdexcept>

namespace nlsctl {

double critical_power(int dim) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("dimension must be 1 or 2");
  return 1.0 + 4.0 / dim;
}

double GroundState::value(double r) const {
  r = std::abs(r);
  const auto& P = profile;
  const std::size_t last = P.r.size() - 1;
  if (r >= P.r[last]) return P.q[last] * std::exp(-decay.D0 * (r - P.r[last]));
  std::size_t i = static_cast<std::size_t>(r / P.dr);
  if (i >= last) i = last - 1;
  double h = P.dr;
  double t = (r - P.r[i]) / h;
  double t2 = t * t, t3 = t2 * t;
  double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
  double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  return h00 * P.q[i] + h10 * h * P.dq[i] + h01 * P.q[i + 1] + h11 * h * P.dq[i + 1];
}

double GroundState::derivative(double r) const {
  double sign = r < 0 ? -1.0 : 1.0;
  r = std::abs(r);
  const auto& P = profile;
  const std::size_t last = P.r.size() - 1;
  if (r >= P.r[last])
    return -sign * decay.D0 * P.q[last] * std::exp(-decay.D0 * (r - P.r[last]));
  std::size_t i = static_cast<std::size_t>(r / P.dr);
  if (i >= last) i = last - 1;
  double h = P.dr;
  double t = (r - P.r[i]) / h;
  double t2 = t * t;
  double d00 = (6 * t2 - 6 * t) / h, d10 = 3 * t2 - 4 * t + 1;
  double d01 = (-6 * t2 + 6 * t) / h, d11 = 3 * t2 - 2 * t;
  return sign * (d00 * P.q[i] + d10 * P.dq[i] + d01 * P.q[i + 1] + d11 * P.dq[i + 1]);
}

namespace {

double simpson(const std::vector<double>& f, double h) {
  std::size_t n = f.size() - 1;  // intervals
  if (n < 3) throw std::invalid_argument("too few samples for quadrature");
  std::size_t m = (n % 2 == 0) ? n : n - 3;
  double s = f[0] + f[m];
  for (std::size_t i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * f[i];
  s *= h / 3.0;
  if (m != n)
    s += 3.0 * h / 8.0 * (f[m] + 3 * f[m + 1] + 3 * f[m + 2] + f[m + 3]);
  return s;
}

double radial_weight(int dim, double r) {
  return dim == 1 ? 2.0 : 2.0 * std::numbers::pi * r;
}

// Integral over |x| > r_c of (q_c e^{-D(|x| - r_c)})^2.
double tail_integral(int dim, double rc, double qc, double D) {
  if (dim == 1) return qc * qc / D;
  return 2.0 * std::numbers::pi * qc * qc * (rc / (2 * D) + 1.0 / (4 * D * D));
}

GroundState finish(RadialProfile prof) {
  GroundState gs;
  gs.profile = std::move(prof);
  gs.decay = decay_fit(gs.profile);
  gs.mass_sq = radial_mass(gs);
  return gs;
}

enum class Branch { crosses, turns, undecided };

struct Trial {
  Branch branch = Branch::undecided;
  std::vector<double> q, dq;
};

// RK4 for Q'' + (d-1)/r Q' = Q - Q^p from the series start at r = dr.
Trial integrate(int d, double p, double q0, const ShootingOptions& o, bool keep) {
  auto rhs = [&](double r, double q, double v, double& dq, double& dv) {
    dq = v;
    dv = q - std::pow(std::abs(q), p - 1) * q - (d - 1) / r * v;
  };
  Trial tr;
  const double h = o.dr;
  const std::size_t steps = static_cast<std::size_t>(std::llround(o.r_max / h));
  // Even series q0 + a r^2 + b r^4 + c r^6 + e r^8 of the regular solution,
  // used for the first samples where RK4 meets the 1/r coefficient.
  const double f0 = q0 - std::pow(q0, p);
  const double f1 = 1.0 - p * std::pow(q0, p - 1);
  const double f2 = -p * (p - 1) * std::pow(q0, p - 2);
  const double f3 = -p * (p - 1) * (p - 2) * std::pow(q0, p - 3);
  const double a = f0 / (2.0 * d);
  const double b = f1 * a / (4.0 * (d + 2));
  const double c = (f1 * b + 0.5 * f2 * a * a) / (6.0 * (d + 4));
  const double e = (f1 * c + f2 * a * b + f3 * a * a * a / 6.0) / (8.0 * (d + 6));
  auto series = [&](double r, double& q, double& v) {
    double r2 = r * r;
    q = q0 + r2 * (a + r2 * (b + r2 * (c + r2 * e)));
    v = r * (2 * a + r2 * (4 * b + r2 * (6 * c + 8 * e * r2)));
  };
  const std::size_t start = 8;
  double q = q0, v = 0.0;
  if (keep) {
    tr.q = {q0};
    tr.dq = {0.0};
  }
  for (std::size_t i = 1; i <= start; ++i) {
    series(i * h, q, v);
    if (keep) {
      tr.q.push_back(q);
      tr.dq.push_back(v);
    }
  }
  for (std::size_t i = start; i < steps; ++i) {
    double r = i * h;
    double k1q, k1v, k2q, k2v, k3q, k3v, k4q, k4v;
    rhs(r, q, v, k1q, k1v);
    rhs(r + h / 2, q + h / 2 * k1q, v + h / 2 * k1v, k2q, k2v);
    rhs(r + h / 2, q + h / 2 * k2q, v + h / 2 * k2v, k3q, k3v);
    rhs(r + h, q + h * k3q, v + h * k3v, k4q, k4v);
    q += h / 6 * (k1q + 2 * k2q + 2 * k3q + k4q);
    v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
    if (keep) {
      tr.q.push_back(q);
      tr.dq.push_back(v);
    }
    if (q <= 0.0) {
      tr.branch = Branch::crosses;
      return tr;
    }
    if (v > 0.0) {
      tr.branch = Branch::turns;
      return tr;
    }
  }
  return tr;
}

}  // namespace

GroundState ground_state_1d() {
  RadialProfile P;
  P.dim = 1;
  P.p = 5.0;
  P.dr = 1e-3;
  const std::size_t n = 30000;
  const double a = std::pow(3.0, 0.25);
  for (std::size_t i = 0; i <= n; ++i) {
    double r = i * P.dr;
    double s = 1.0 / std::cosh(2 * r);
    P.r.push_back(r);
    P.q.push_back(a * std::sqrt(s));
    P.dq.push_back(-a * std::sqrt(s) * std::tanh(2 * r));
  }
  return finish(std::move(P));
}

ShootingOptions default_shooting(int dim) {
  ShootingOptions o;
  if (dim == 1) {
    o.q0_lo = 1.2;
    o.q0_hi = 1.5;
  }
  return o;
}

GroundState shoot_radial(int dim, double tol) {
  return shoot_radial(dim, tol, default_shooting(dim));
}

GroundState shoot_radial(int dim, double tol, const ShootingOptions& o) {
  if (!(tol > 0.0)) throw std::invalid_argument("shooting tolerance must be positive");
  if (!(o.dr > 0.0) || !(o.r_max > 20 * o.dr))
    throw std::invalid_argument("invalid shooting step or range");
  const double p = critical_power(dim);
  double lo = o.q0_lo, hi = o.q0_hi;
  if (integrate(dim, p, lo, o, false).branch != Branch::turns ||
      integrate(dim, p, hi, o, false).branch != Branch::crosses)
    throw std::runtime_error("shooting bracket does not enclose the ground state");
  // Bisect down to machine precision; the width criterion is a floor.
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    Branch b = integrate(dim, p, mid, o, false).branch;
    if (b == Branch::crosses)
      hi = mid;
    else if (b == Branch::turns)
      lo = mid;
    else {
      lo = hi = mid;
      break;
    }
  }
  if (hi - lo > o.bracket_width) throw std::runtime_error("bisection did not reach bracket width");
  double q0 = 0.5 * (lo + hi);
  Trial tm = integrate(dim, p, q0, o, true);
  Trial tl = integrate(dim, p, lo, o, true);
  Trial th = integrate(dim, p, hi, o, true);
  std::size_t cut = std::min({tm.q.size(), tl.q.size(), th.q.size()}) - 1;
  for (std::size_t i = 1; i <= cut; ++i) {
    if (std::abs(th.q[i] - tl.q[i]) > o.trust_rel * tm.q[i] || tm.dq[i] >= 0.0 ||
        tm.q[i] <= 0.0) {
      cut = i - 1;
      break;
    }
  }
  if (cut % 2) --cut;
  if (cut < 40) throw std::runtime_error("non-monotone profile: shooting selected the wrong branch");
  RadialProfile P;
  P.dim = dim;
  P.p = p;
  P.dr = o.dr;
  for (std::size_t i = 0; i <= cut; ++i) {
    P.r.push_back(i * o.dr);
    P.q.push_back(tm.q[i]);
    P.dq.push_back(tm.dq[i]);
  }
  for (std::size_t i = 1; i < P.q.size(); ++i)
    if (!(P.q[i] < P.q[i - 1]) || !(P.q[i] > 0.0))
      throw std::runtime_error("non-monotone profile: shooting selected the wrong branch");
  double res = ode_residual(P);
  if (!(res < tol))
    throw std::runtime_error("shooting residual " + std::to_string(res) +
                             " exceeds tolerance");
  return finish(std::move(P));
}

DecayFit decay_fit(const RadialProfile& P) {
  if (P.r.size() != P.q.size() || P.r.empty())
    throw std::invalid_argument("profile arrays inconsistent");
  double r_half = 0.5 * P.r.back();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < P.r.size(); ++i) {
    if (P.r[i] < r_half) continue;
    if (!(P.q[i] > 0.0)) throw std::invalid_argument("decay fit needs a positive tail");
    double x = P.r[i], y = std::log(P.q[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 10) throw std::invalid_argument("profile tail has fewer than 10 samples");
  double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  DecayFit f;
  f.D0 = -slope;
  if (!(f.D0 > 1e-10)) throw std::runtime_error("decay fit is not decaying (D0 <= 0)");
  // Raise C0 until the bound holds at every sample.
  for (std::size_t i = 0; i < P.r.size(); ++i)
    f.C0 = std::max(f.C0, std::abs(P.q[i]) * std::exp(f.D0 * P.r[i]));
  return f;
}

double ode_residual(const RadialProfile& P) {
  const auto& q = P.q;
  const double h = P.dr;
  const int d = P.dim;
  const std::size_t n = q.size();
  if (n < 5) throw std::invalid_argument("profile too short for residual");
  auto at = [&](long i) { return q[static_cast<std::size_t>(std::abs(i))]; };
  double worst = 0.0;
  for (std::size_t k = 0; k + 2 < n; ++k) {
    long i = static_cast<long>(k);
    double d2 = (-at(i + 2) + 16 * at(i + 1) - 30 * at(i) + 16 * at(i - 1) - at(i - 2)) /
                (12 * h * h);
    double lap;
    if (k == 0) {
      lap = d * d2;
    } else {
      double d1 = (-at(i + 2) + 8 * at(i + 1) - 8 * at(i - 1) + at(i - 2)) / (12 * h);
      lap = d2 + (d - 1) / P.r[k] * d1;
    }
    double res = lap - q[k] + std::pow(std::abs(q[k]), P.p - 1) * q[k];
    worst = std::max(worst, std::abs(res));
  }
  return worst;
}

double radial_mass(const GroundState& gs) {
  const auto& P = gs.profile;
  std::vector<double> f(P.r.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = radial_weight(P.dim, P.r[i]) * P.q[i] * P.q[i];
  return simpson(f, P.dr) + tail_integral(P.dim, P.r.back(), P.q.back(), gs.decay.D0);
}

double radial_gradient_sq(const GroundState& gs) {
  const auto& P = gs.profile;
  std::vector<double> f(P.r.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = radial_weight(P.dim, P.r[i]) * P.dq[i] * P.dq[i];
  double D = gs.decay.D0;
  return simpson(f, P.dr) + D * D * tail_integral(P.dim, P.r.back(), P.q.back(), D);
}

ComplexField assemble_Q_on_grid(const GroundState& gs, const Grid& grid,
                                const Point& center, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("scale must be positive");
  if (!grid.contains(center)) throw std::invalid_argument("center outside domain");
  ComplexField f(grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    f[i] = gs.value(distance(grid.coords(i), center, grid.dim()) / scale);
  return f;
}

void write_profile_csv(const RadialProfile& P, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "r,q\n" << std::setprecision(17);
  for (std::size_t i = 0; i < P.r.size(); ++i) out << P.r[i] << ',' << P.q[i] << '\n';
}

}  // namespace nlsctl
