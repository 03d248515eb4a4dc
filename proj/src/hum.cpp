#include "nlsctl/hum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <stdexcept>

#include "nlsctl/spectral.hpp"

namespace nlsctl {

namespace {

int pow2_above(double x) {
  int n = 8;
  while (n < x) n *= 2;
  return n;
}

// Copies modal coefficients (first m per axis) into a full grid coefficient
// array, or back.
void scatter_modes(const ModalVector& c, int m, const Grid& g, std::vector<cplx>& out) {
  out.assign(g.size(), 0.0);
  if (g.dim() == 1) {
    for (int k = 0; k < m; ++k) out[k] = c[k];
    return;
  }
  const int n1 = g.n(1);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) out[static_cast<std::size_t>(a) * n1 + b] = c[a * m + b];
}

ModalVector gather_modes(const std::vector<cplx>& full, int m, const Grid& g) {
  const int d = g.dim();
  ModalVector c(d == 1 ? m : m * m);
  if (d == 1) {
    for (int k = 0; k < m; ++k) c[k] = full[k];
    return c;
  }
  const int n1 = g.n(1);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) c[a * m + b] = full[static_cast<std::size_t>(a) * n1 + b];
  return c;
}

void require_capacity(const Grid& g, int m, const RectDomain& dom) {
  if (g.domain().lengths != dom.lengths)
    throw std::invalid_argument("grid domain differs from the control domain");
  for (int j = 0; j < g.dim(); ++j)
    if (g.n(j) < m) throw std::invalid_argument("mode count exceeds grid capacity");
}

}  // namespace

double ControlShape::phi_t(double t) const {
  double a = window_lo * T, b = window_hi * T;
  if (t <= a || t >= b) return 0.0;
  double u = 2.0 * (t - a) / (b - a) - 1.0;
  return std::exp(1.0 - 1.0 / (1.0 - u * u));
}

HumOperator::HumOperator(const RectDomain& domain, const ControlShape& shape, int modes,
                         const HumOptions& opt)
    : domain_(make_domain(domain.lengths)), shape_(shape), m_(modes) {
  if (m_ < 1) throw std::invalid_argument("need at least one mode");
  if (!(shape_.T > 0.0) || !(shape_.window_lo >= 0.0) ||
      !(shape_.window_hi > shape_.window_lo) || !(shape_.window_hi <= 1.0))
    throw std::invalid_argument("invalid temporal control profile");
  const int d = domain_.dim();
  p_ = opt.p > 0 ? opt.p : 1.0 + 4.0 / d;
  const std::size_t N = d == 1 ? m_ : static_cast<std::size_t>(m_) * m_;
  mu_.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    int k0 = d == 1 ? static_cast<int>(i) + 1 : static_cast<int>(i) / m_ + 1;
    double v = std::pow(k0 * std::numbers::pi / domain_.lengths[0], 2);
    if (d == 2) v += std::pow((static_cast<int>(i) % m_ + 1) * std::numbers::pi / domain_.lengths[1], 2);
    mu_[i] = v;
  }
  double mu_max = *std::max_element(mu_.begin(), mu_.end());
  nt_ = std::max(opt.min_steps, static_cast<int>(std::ceil(shape_.T * mu_max / opt.phase_step)));

  // A_jk = <e_j, a^2 e_k> by sine quadrature on a fine grid.
  int nq = opt.quadrature_points > 0
               ? opt.quadrature_points
               : pow2_above(d == 1 ? std::max(1024, 16 * m_) : std::max(128, 8 * m_)) - 1;
  Grid q(domain_, std::vector<int>(d, nq));
  if (!ball_inside(shape_.a, q)) throw std::invalid_argument("control profile leaves the domain");
  std::vector<double> a2(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    double a = smooth_bump(shape_.a, q.coords(i), d);
    a2[i] = a * a;
  }
  A_.resize(N, N);
  std::vector<cplx> col(q.size());
  for (std::size_t k = 0; k < N; ++k) {
    ModalVector unit = ModalVector::Zero(N);
    unit[k] = 1.0;
    scatter_modes(unit, m_, q, col);
    dst_inverse_inplace(q, col);
    for (std::size_t i = 0; i < q.size(); ++i) col[i] *= a2[i];
    dst_forward_inplace(q, col);
    ModalVector c = gather_modes(col, m_, q);
    for (std::size_t j = 0; j < N; ++j) A_(j, k) = c[j].real();
  }
  A_ = 0.5 * (A_ + A_.transpose()).eval();
  if (A_.norm() == 0.0) throw std::invalid_argument("control profile a vanishes on the modes");

  // (p+1)/2 times the band limit keeps the projected nonlinearity exact.
  int np = pow2_above(0.5 * (p_ + 1.0) * (m_ + 1)) - 1;
  phys_ = Grid(domain_, std::vector<int>(d, np));
}

ModalVector HumOperator::phases(double t) const {
  ModalVector u(mu_.size());
  for (std::size_t i = 0; i < mu_.size(); ++i) u[i] = std::polar(1.0, -mu_[i] * t);
  return u;
}

ModalVector HumOperator::control_modal(const ModalVector& dual, double t) const {
  double ph = shape_.phi_t(t);
  if (ph == 0.0) return ModalVector::Zero(dual.size());
  ModalVector u = phases(t).cwiseProduct(dual);
  return (ph * ph) * (A_ * u);
}

ModalVector HumOperator::apply_S(const ModalVector& dual) const { return apply_S(dual, nt_); }

ModalVector HumOperator::apply_S(const ModalVector& dual, int nt) const {
  if (static_cast<std::size_t>(dual.size()) != size())
    throw std::invalid_argument("dual datum has wrong mode count");
  const cplx I(0.0, 1.0);
  const double h = shape_.T / nt;
  auto g = [&](double t) -> ModalVector {
    if (shape_.phi_t(t) == 0.0) return ModalVector::Zero(dual.size());
    return -I * phases(t).conjugate().cwiseProduct(control_modal(dual, t));
  };
  // Backward RK4 from c(T) = 0; the source is state independent.
  ModalVector c = ModalVector::Zero(dual.size());
  ModalVector g_hi = g(shape_.T);
  for (int j = nt; j > 0; --j) {
    double t = j * h;
    ModalVector g_mid = g(t - 0.5 * h), g_lo = g(t - h);
    c -= (h / 6.0) * (g_hi + 4.0 * g_mid + g_lo);
    g_hi = g_lo;
  }
  return c;
}

ModalVector HumOperator::apply_S_adjoint(const ModalVector& w) const {
  if (static_cast<std::size_t>(w.size()) != size())
    throw std::invalid_argument("adjoint argument has wrong mode count");
  const cplx I(0.0, 1.0);
  const double h = shape_.T / nt_;
  // y' = -i phi^2 U* A U w, y(0) = 0, integrated forward; S* w = y(T).
  auto g = [&](double t) -> ModalVector {
    double ph = shape_.phi_t(t);
    if (ph == 0.0) return ModalVector::Zero(w.size());
    ModalVector u = phases(t);
    return (-I * ph * ph) * u.conjugate().cwiseProduct(A_ * u.cwiseProduct(w));
  };
  ModalVector y = ModalVector::Zero(w.size());
  ModalVector g_lo = g(0.0);
  for (int j = 0; j < nt_; ++j) {
    double t = j * h;
    ModalVector g_mid = g(t + 0.5 * h), g_hi = g(t + h);
    y += (h / 6.0) * (g_lo + 4.0 * g_mid + g_hi);
    g_lo = g_hi;
  }
  return y;
}

Eigen::MatrixXcd HumOperator::assemble_dense() const {
  const std::size_t N = size();
  Eigen::MatrixXcd M(N, N);
  for (std::size_t k = 0; k < N; ++k) {
    ModalVector e = ModalVector::Zero(N);
    e[k] = 1.0;
    M.col(k) = apply_S(e);
  }
  return M;
}

ComplexField HumOperator::control_field(const ModalVector& dual, double t,
                                        const Grid& grid) const {
  require_capacity(grid, m_, domain_);
  ComplexField v(grid);
  double ph = shape_.phi_t(t);
  if (ph == 0.0) return v;
  scatter_modes(phases(t).cwiseProduct(dual), m_, grid, v.values);
  dst_inverse_inplace(grid, v.values);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double a = smooth_bump(shape_.a, grid.coords(i), grid.dim());
    v[i] *= a * a * ph * ph;
  }
  return v;
}

ModalVector HumOperator::project(const ComplexField& field) const {
  require_capacity(field.grid, m_, domain_);
  std::vector<cplx> c = field.values;
  dst_forward_inplace(field.grid, c);
  return gather_modes(c, m_, field.grid);
}

ComplexField HumOperator::to_field(const ModalVector& c, const Grid& grid) const {
  require_capacity(grid, m_, domain_);
  ComplexField f(grid);
  scatter_modes(c, m_, grid, f.values);
  dst_inverse_inplace(grid, f.values);
  return f;
}

double HumOperator::h2_norm(const ModalVector& c) const {
  double s = 0.0;
  for (std::size_t i = 0; i < mu_.size(); ++i) s += std::pow(1.0 + mu_[i], 2) * std::norm(c[i]);
  return std::sqrt(s);
}

ModalVector HumOperator::nonlinear_term(const ModalVector& c) const {
  std::vector<cplx> buf;
  scatter_modes(c, m_, phys_, buf);
  dst_inverse_inplace(phys_, buf);
  const double e = 0.5 * (p_ - 1.0);
  for (auto& v : buf) v *= -std::pow(std::norm(v), e);
  dst_forward_inplace(phys_, buf);
  return gather_modes(buf, m_, phys_);
}

void HumOperator::backward_nonlinear(const ModalVector& dual, ModalVector& L,
                                     ModalVector& K) const {
  const cplx I(0.0, 1.0);
  const double h = -shape_.T / nt_;
  // Interaction picture: psi = U(t) c, c' = -i U* (N(psi) + v).
  auto nl = [&](double t, const ModalVector& c) -> ModalVector {
    ModalVector u = phases(t);
    return -I * u.conjugate().cwiseProduct(nonlinear_term(u.cwiseProduct(c)));
  };
  auto src = [&](double t) -> ModalVector {
    if (shape_.phi_t(t) == 0.0) return ModalVector::Zero(dual.size());
    return -I * phases(t).conjugate().cwiseProduct(control_modal(dual, t));
  };
  ModalVector c = ModalVector::Zero(dual.size());
  K = ModalVector::Zero(dual.size());
  for (int j = nt_; j > 0; --j) {
    double t = -j * h;  // current time, moving toward 0
    ModalVector s1 = src(t), s2 = src(t + 0.5 * h), s4 = src(t + h);
    ModalVector n1 = nl(t, c);
    ModalVector n2 = nl(t + 0.5 * h, c + 0.5 * h * (n1 + s1));
    ModalVector n3 = nl(t + 0.5 * h, c + 0.5 * h * (n2 + s2));
    ModalVector n4 = nl(t + h, c + h * (n3 + s2));
    ModalVector dn = (h / 6.0) * (n1 + 2.0 * n2 + 2.0 * n3 + n4);
    c += dn + (h / 6.0) * (s1 + 4.0 * s2 + s4);
    K += dn;
  }
  L = c;
}

ModalVector HumOperator::forward(const ModalVector& c0, const ModalVector& dual,
                                 bool nonlinear, int nt, std::vector<double>* times,
                                 std::vector<double>* norms) const {
  const cplx I(0.0, 1.0);
  const double h = shape_.T / nt;
  auto f = [&](double t, const ModalVector& c) -> ModalVector {
    ModalVector u = phases(t);
    ModalVector rhs = control_modal(dual, t);
    if (nonlinear) rhs += nonlinear_term(u.cwiseProduct(c));
    return -I * u.conjugate().cwiseProduct(rhs);
  };
  ModalVector c = c0;
  if (times) times->assign(1, 0.0);
  if (norms) norms->assign(1, c.norm());
  for (int j = 0; j < nt; ++j) {
    double t = j * h;
    ModalVector k1 = f(t, c);
    ModalVector k2 = f(t + 0.5 * h, c + 0.5 * h * k1);
    ModalVector k3 = f(t + 0.5 * h, c + 0.5 * h * k2);
    ModalVector k4 = f(t + h, c + h * k3);
    c += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (times) times->push_back(t + h);
    if (norms) norms->push_back(c.norm());
  }
  return phases(shape_.T).cwiseProduct(c);
}

SolveReport solve_S_inverse(const HumOperator& S, const ModalVector& b, double tol,
                            int max_iter) {
  if (!(tol > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
  SolveReport rep;
  rep.x = ModalVector::Zero(b.size());
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    rep.converged = true;
    return rep;
  }
  ModalVector r = b;
  ModalVector s = S.apply_S_adjoint(r);
  ModalVector p = s;
  double gamma = s.squaredNorm();
  for (int k = 1; k <= max_iter; ++k) {
    ModalVector q = S.apply_S(p);
    double alpha = gamma / q.squaredNorm();
    rep.x += alpha * p;
    r -= alpha * q;
    rep.iterations = k;
    rep.residual = r.norm() / bnorm;
    rep.history.push_back(rep.residual);
    if (rep.residual <= tol) {
      // Confirm against the true residual before stopping.
      r = b - S.apply_S(rep.x);
      rep.residual = r.norm() / bnorm;
      if (rep.residual <= tol) {
        rep.converged = true;
        return rep;
      }
    }
    s = S.apply_S_adjoint(r);
    double gamma_new = s.squaredNorm();
    p = s + (gamma_new / gamma) * p;
    gamma = gamma_new;
  }
  return rep;
}

double condition_number(const Eigen::MatrixXcd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
  const auto& s = svd.singularValues();
  return s[0] / s[s.size() - 1];
}

LinearControlResult linear_null_control(const HumOperator& S, const ModalVector& psi0,
                                        double tol, int max_iter) {
  LinearControlResult res;
  res.initial_norm = psi0.norm();
  res.solve = solve_S_inverse(S, psi0, tol, max_iter);
  res.dual = res.solve.x;
  // Controlled system: i psi_t + lap psi = v, v = a^2 phi^2 e^{it lap} dual.
  ModalVector end = S.forward(psi0, res.dual, false, 2 * S.time_steps(), &res.times, &res.norms);
  res.terminal_norm = end.norm();
  return res;
}

namespace {

// Exact inverse of the discrete S through its dense assembly for small
// truncations, CGLS otherwise.
class SInverse {
 public:
  SInverse(const HumOperator& S, double tol) : S_(S), tol_(tol) {
    if (S.size() <= 64) lu_.compute(S.assemble_dense()), dense_ = true;
  }
  ModalVector solve(const ModalVector& b) const {
    if (dense_) return lu_.solve(b);
    SolveReport r = solve_S_inverse(S_, b, tol_, 2000);
    if (!r.converged) throw std::runtime_error("S inversion did not converge");
    return r.x;
  }

 private:
  const HumOperator& S_;
  double tol_;
  bool dense_ = false;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
};

}  // namespace

NonlinearControlResult nonlinear_null_control(const HumOperator& S, const ModalVector& u0,
                                              double tol, int max_fp_iter) {
  if (!(tol > 0.0)) throw std::invalid_argument("fixed point tolerance must be positive");
  NonlinearControlResult res;
  res.initial_norm = u0.norm();
  res.dual = ModalVector::Zero(u0.size());
  if (res.initial_norm == 0.0) {
    res.converged = true;
    return res;
  }
  SInverse inv(S, 1e-13);
  ModalVector x = inv.solve(u0);  // B(0)
  ModalVector d = x;              // x_0 - x_{-1}
  ModalVector K_prev = ModalVector::Zero(u0.size());
  ModalVector L, K;
  for (int k = 0; k < max_fp_iter; ++k) {
    S.backward_nonlinear(x, L, K);
    ModalVector d_next = -inv.solve(K - K_prev);
    double est = S.h2_norm(d_next) / S.h2_norm(d);
    ModalVector x_next = x + d_next;
    double rel = S.h2_norm(d_next) / S.h2_norm(x_next);
    res.log.push_back({k + 1, rel, est});
    if (!std::isfinite(est) || !std::isfinite(rel) || est >= 1.0) {
      res.diverged = true;
      res.contraction_factor = std::isfinite(est) ? est : INFINITY;
      res.max_contraction = res.contraction_factor;
      return res;
    }
    // Ratios of differences near roundoff carry no information.
    if (S.h2_norm(d) > 1e-12 * S.h2_norm(x)) {
      res.max_contraction = std::max(res.max_contraction, est);
      if (k == 0) res.contraction_factor = est;
    }
    x = x_next;
    d = d_next;
    K_prev = K;
    if (rel < tol) {
      res.converged = true;
      break;
    }
  }
  res.dual = x;
  if (res.converged) {
    ModalVector end = S.forward(u0, x, true, 2 * S.time_steps(), &res.times, &res.norms);
    res.terminal_norm = end.norm();
  }
  return res;
}

RadiusEstimate estimate_local_radius(const HumOperator& S, const ModalVector& u_hat,
                                     double lo, double hi, int steps, double tol) {
  RadiusEstimate est;
  auto ok = [&](double s) {
    ++est.evaluations;
    NonlinearControlResult r = nonlinear_null_control(S, s * u_hat, tol, 60);
    return r.converged && !r.diverged;
  };
  if (!ok(lo)) throw std::runtime_error("radius bisection: lower amplitude does not converge");
  if (ok(hi)) throw std::runtime_error("radius bisection: upper amplitude still converges");
  for (int i = 0; i < steps; ++i) {
    double mid = std::sqrt(lo * hi);
    if (ok(mid))
      lo = mid;
    else
      hi = mid;
  }
  est.converging = lo;
  est.diverging = hi;
  return est;
}

void HumController::evaluate(double t, const ComplexField&, ComplexField& v) const {
  v = S_.control_field(dual_, t - t0_, grid_);
}

void write_convergence_csv(const std::vector<ConvergenceEntry>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "iter,residual,contraction_estimate\n" << std::setprecision(17);
  for (const auto& e : log) out << e.iter << ',' << e.residual << ',' << e.contraction_estimate << '\n';
}

}  // namespace nlsctl
