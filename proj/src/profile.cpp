#include "nlsctl/profile.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <stdexcept>

#include "nlsctl/spectral.hpp"

namespace nlsctl {

namespace {

double bump(double u) {
  if (std::abs(u) >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - u * u));
}

double bump_d1(double u) {
  if (std::abs(u) >= 1.0) return 0.0;
  double w = 1.0 - u * u;
  return bump(u) * (-2.0 * u / (w * w));
}

// Tabulated H on [0, 1/2] with H' known exactly; cubic Hermite in between.
struct StepTable {
  static constexpr int N = 2048;
  double norm = 0.0;
  std::vector<double> H;

  StepTable() {
    using boost::math::quadrature::gauss;
    auto g = [](double s) { return bump(2.0 * s - 1.0); };
    const double h = 0.5 / N;
    H.assign(N + 1, 0.0);
    for (int i = 0; i < N; ++i)
      H[i + 1] = H[i] + gauss<double, 20>::integrate(g, i * h, (i + 1) * h);
    norm = 2.0 * H[N];
    for (auto& v : H) v /= norm;
  }

  double eval(double s) const {
    const double h = 0.5 / N;
    int i = static_cast<int>(s / h);
    if (i >= N) return H[N];
    double t = (s - i * h) / h, t2 = t * t, t3 = t2 * t;
    double d0 = bump(2.0 * (i * h) - 1.0) / norm;
    double d1 = bump(2.0 * ((i + 1) * h) - 1.0) / norm;
    return (2 * t3 - 3 * t2 + 1) * H[i] + (t3 - 2 * t2 + t) * h * d0 +
           (-2 * t3 + 3 * t2) * H[i + 1] + (t3 - t2) * h * d1;
  }
};

const StepTable& step_table() {
  static const StepTable table;
  return table;
}

}  // namespace

double smooth_step(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  const auto& T = step_table();
  return s <= 0.5 ? T.eval(s) : 1.0 - T.eval(1.0 - s);
}

double smooth_step_d1(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  return bump(2.0 * s - 1.0) / step_table().norm;
}

double smooth_step_d2(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  return 2.0 * bump_d1(2.0 * s - 1.0) / step_table().norm;
}

CutoffSpec make_cutoff(const Point& center, double r_inner, double r_outer) {
  if (!(r_inner > 0.0) || !(r_outer > r_inner))
    throw std::invalid_argument("cutoff radii must satisfy 0 < r_inner < r_outer");
  return CutoffSpec{center, r_inner, r_outer};
}

bool ball_inside(const CutoffSpec& c, const Grid& grid) {
  for (int j = 0; j < grid.dim(); ++j)
    if (c.center[j] - c.r_outer <= 0.0 || c.center[j] + c.r_outer >= grid.length(j))
      return false;
  return true;
}

double smooth_bump(const CutoffSpec& spec, const Point& x, int dim) {
  double rho = distance(x, spec.center, dim);
  return 1.0 - smooth_step((rho - spec.r_inner) / (spec.r_outer - spec.r_inner));
}

CutoffField cutoff_on_grid(const CutoffSpec& spec, const Grid& grid) {
  const int d = grid.dim();
  const double width = spec.r_outer - spec.r_inner;
  CutoffField f;
  f.chi.assign(grid.size(), 0.0);
  f.grad.assign(grid.size(), Point{0.0, 0.0});
  f.lap.assign(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Point x = grid.coords(i);
    double rho = distance(x, spec.center, d);
    double s = (rho - spec.r_inner) / width;
    f.chi[i] = 1.0 - smooth_step(s);
    if (s > 0.0 && s < 1.0) {
      double h1 = smooth_step_d1(s) / width, h2 = smooth_step_d2(s) / (width * width);
      for (int j = 0; j < d; ++j) f.grad[i][j] = -h1 * (x[j] - spec.center[j]) / rho;
      f.lap[i] = -h2 - h1 * (d - 1) / rho;
    }
  }
  return f;
}

BlowupSpec make_blowup_spec(const Grid& grid, std::vector<Point> points, double lambda,
                            double a, std::vector<CutoffSpec> cutoffs, double c_bound) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (!(a > 0.0) || !(a < c_bound))
    throw std::invalid_argument("T_lambda = a lambda^-2 needs 0 < a < c");
  if (points.empty() || points.size() != cutoffs.size())
    throw std::invalid_argument("one cutoff per blow-up point required");
  const int d = grid.dim();
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (!grid.contains(points[k])) throw std::invalid_argument("blow-up point outside domain");
    cutoffs[k].center = points[k];
    make_cutoff(points[k], cutoffs[k].r_inner, cutoffs[k].r_outer);
    if (!ball_inside(cutoffs[k], grid))
      throw std::invalid_argument("cutoff support leaves the domain");
    for (std::size_t m = 0; m < k; ++m) {
      double dist = distance(points[k], points[m], d);
      if (dist == 0.0) throw std::invalid_argument("blow-up points must be distinct");
      if (dist < cutoffs[k].r_outer + cutoffs[m].r_outer)
        throw std::invalid_argument("cutoff supports overlap");
    }
  }
  BlowupSpec s;
  s.points = std::move(points);
  s.lambda = lambda;
  s.T_lambda = a / (lambda * lambda);
  s.cutoffs = std::move(cutoffs);
  return s;
}

double core_width(const BlowupSpec& spec, double t) {
  return spec.lambda * (spec.T_lambda - t);
}

namespace {

void check_time(const BlowupSpec& spec, double t) {
  if (!(t >= 0.0) || !(t < spec.T_lambda))
    throw std::invalid_argument("profile time must lie in [0, T_lambda)");
}

// Visits every node in the support of phi_k with the exact self-similar
// solution S and its gradient.
template <class F>
void for_each_core(const BlowupSpec& spec, const GroundState& gs, double t,
                   const Grid& grid, bool need_grad, F&& visit) {
  check_time(spec, t);
  const int d = grid.dim();
  const double tau = spec.T_lambda - t;
  const double w = spec.lambda * tau;
  const double amp = std::pow(w, -0.5 * d);
  const double phase0 = 1.0 / (spec.lambda * spec.lambda * tau);
  for (std::size_t k = 0; k < spec.points.size(); ++k) {
    const CutoffSpec& c = spec.cutoffs[k];
    const double width = c.r_outer - c.r_inner;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      Point x = grid.coords(i);
      double rho = distance(x, spec.points[k], d);
      if (rho >= c.r_outer) continue;
      double s = (rho - c.r_inner) / width;
      double phi = 1.0 - smooth_step(s);
      cplx e = std::polar(amp, phase0 - rho * rho / (4.0 * tau));
      cplx S = e * gs.value(rho / w);
      Point gphi{0.0, 0.0};
      double lphi = 0.0;
      std::array<cplx, 2> gS{0.0, 0.0};
      if (need_grad) {
        if (s > 0.0 && s < 1.0) {
          double h1 = smooth_step_d1(s) / width, h2 = smooth_step_d2(s) / (width * width);
          for (int j = 0; j < d; ++j) gphi[j] = -h1 * (x[j] - spec.points[k][j]) / rho;
          lphi = -h2 - h1 * (d - 1) / rho;
        }
        double dq = rho > 0.0 ? gs.derivative(rho / w) / (w * rho) : 0.0;
        for (int j = 0; j < d; ++j) {
          double xj = x[j] - spec.points[k][j];
          gS[j] = S * cplx(0.0, -xj / (2.0 * tau)) + e * dq * xj;
        }
      }
      visit(i, phi, gphi, lphi, S, gS);
    }
  }
}

}  // namespace

ComplexField synth_profile(const BlowupSpec& spec, const GroundState& gs, double t,
                           const Grid& grid) {
  ComplexField f(grid);
  for_each_core(spec, gs, t, grid, false,
                [&](std::size_t i, double phi, const Point&, double, cplx S,
                    const std::array<cplx, 2>&) { f[i] += phi * S; });
  return f;
}

std::vector<ComplexField> synth_profile_gradient(const BlowupSpec& spec,
                                                 const GroundState& gs, double t,
                                                 const Grid& grid) {
  std::vector<ComplexField> g(grid.dim(), ComplexField(grid));
  for_each_core(spec, gs, t, grid, true,
                [&](std::size_t i, double phi, const Point& gphi, double, cplx S,
                    const std::array<cplx, 2>& gS) {
                  for (int j = 0; j < grid.dim(); ++j) g[j][i] += gphi[j] * S + phi * gS[j];
                });
  return g;
}

ComplexField profile_residual_analytic(const BlowupSpec& spec, const GroundState& gs,
                                       double t, const Grid& grid) {
  const double p = gs.profile.p;
  ComplexField r(grid);
  for_each_core(spec, gs, t, grid, true,
                [&](std::size_t i, double phi, const Point& gphi, double lphi, cplx S,
                    const std::array<cplx, 2>& gS) {
                  cplx v = (std::pow(phi, p) - phi) * std::pow(std::abs(S), p - 1) * S +
                           lphi * S;
                  for (int j = 0; j < grid.dim(); ++j) v += 2.0 * gphi[j] * gS[j];
                  r[i] += v;
                });
  return r;
}

ComplexField nls_residual_field(const BlowupSpec& spec, const GroundState& gs, double t,
                                double dt, const Grid& grid) {
  if (!(dt > 0.0) || !(t - dt > 0.0) || !(t + dt < spec.T_lambda))
    throw std::invalid_argument("residual needs 0 < t - dt and t + dt < T_lambda");
  const double p = gs.profile.p;
  ComplexField R = synth_profile(spec, gs, t, grid);
  ComplexField Rp = synth_profile(spec, gs, t + dt, grid);
  ComplexField Rm = synth_profile(spec, gs, t - dt, grid);
  ComplexField L = laplacian(R);
  ComplexField out(grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    out[i] = cplx(0.0, 1.0) * (Rp[i] - Rm[i]) / (2.0 * dt) + L[i] +
             std::pow(std::abs(R[i]), p - 1) * R[i];
  return out;
}

double nls_residual(const BlowupSpec& spec, const GroundState& gs, double t, double dt,
                    const Grid& grid) {
  return l2_norm(nls_residual_field(spec, gs, t, dt, grid));
}

double exterior_norm(const ComplexField& field, const std::vector<Point>& centers,
                     const std::vector<double>& radii, int s) {
  if (s < 0 || s > 2) throw std::invalid_argument("exterior_norm supports s = 0, 1, 2");
  const Grid& g = field.grid;
  const int d = g.dim();
  std::vector<char> mask(g.size(), 1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    Point x = g.coords(i);
    for (std::size_t k = 0; k < centers.size(); ++k)
      if (distance(x, centers[k], d) < radii[k]) mask[i] = 0;
  }
  auto masked_sq = [&](const ComplexField& f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (mask[i]) acc += std::norm(f[i]);
    return acc;
  };
  double total = masked_sq(field);
  if (s >= 1) {
    SpectralCoeffs c = dst_forward(field);
    double grad = 0.0;
    for (int j = 0; j < d; ++j) {
      std::array<int, 2> o{0, 0};
      o[j] = 1;
      grad += masked_sq(spectral_derivative(c, o));
    }
    total += (s == 1 ? 1.0 : 2.0) * grad;
    if (s == 2) {
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
          std::array<int, 2> o{0, 0};
          o[a] += 1;
          o[b] += 1;
          total += masked_sq(spectral_derivative(c, o));
        }
    }
  }
  return std::sqrt(total * g.cell_volume());
}

double exterior_norm(const ComplexField& field, const BlowupSpec& spec, int s) {
  std::vector<double> radii;
  for (const auto& c : spec.cutoffs) radii.push_back(c.r_inner);
  return exterior_norm(field, spec.points, radii, s);
}

double profile_h2_growth(const BlowupSpec& spec, const GroundState& gs, double t,
                         const Grid& grid) {
  return sobolev_norm(synth_profile(spec, gs, t, grid), 2.0);
}

}  // namespace nlsctl
