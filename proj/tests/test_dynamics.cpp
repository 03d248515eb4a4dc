#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "nlsctl/dynamics.hpp"
#include "nlsctl/ground_state.hpp"
#include "nlsctl/numerics.hpp"
#include "nlsctl/spectral.hpp"

using namespace nlsctl;
using std::numbers::pi;

namespace {

// Quintic soliton Q centered in (0, 60); e^{it} Q solves the equation there
// up to the e^{-30} tail at the walls.
ComplexField soliton(int n) {
  Grid g(make_domain({60.0}), {n});
  ComplexField f(g);
  for (int i = 0; i < n; ++i)
    f[i] = std::pow(3.0, 0.25) / std::sqrt(std::cosh(2 * (g.node(0, i) - 30.0)));
  return f;
}

EvolveOptions fixed_step(double dt) {
  EvolveOptions o;
  o.cfl = 1e9;
  o.dt_max = dt;
  o.monitor_every = 1 << 30;
  return o;
}

double max_diff(const ComplexField& a, const ComplexField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

ComplexField smooth_random(const Grid& g, unsigned seed, int modes, double amp) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  SpectralCoeffs c(g);
  for (std::size_t k = 0; k < g.size(); ++k) {
    auto idx = g.multi_index(k);
    bool low = idx[0] < modes && (g.dim() == 1 || idx[1] < modes);
    if (low) c.coeffs[k] = amp * cplx(n(rng), n(rng));
  }
  return dst_inverse(c);
}

class ConstantControl : public Controller {
 public:
  explicit ConstantControl(ComplexField v) : v_(std::move(v)) {}
  void evaluate(double, const ComplexField&, ComplexField& v) const override { v = v_; }

 private:
  ComplexField v_;
};

}  // namespace

TEST_CASE("mass and energy of a sine mode") {
  Grid g(make_domain({pi}), {127});
  const double a = 0.3;
  ComplexField f(g);
  for (int i = 0; i < g.n(0); ++i) f[i] = a * std::sin(g.node(0, i));
  CHECK(mass(f) == doctest::Approx(a * a * pi / 2).epsilon(1e-14));
  double kinetic = 0.5 * gradient_norm_sq(dst_forward(f));
  CHECK(kinetic == doctest::Approx(a * a * pi / 4).epsilon(1e-13));
  // Quintic potential of a sin: a^6/6 * int sin^6 = a^6/6 * 5 pi/16.
  CHECK(potential_term(f, 5.0) == doctest::Approx(std::pow(a, 6) / 6 * 5 * pi / 16).epsilon(1e-12));
  CHECK(energy(f, 5.0) == doctest::Approx(kinetic - std::pow(a, 6) / 6 * 5 * pi / 16).epsilon(1e-12));
}

TEST_CASE("energy of the critical soliton vanishes") {
  // Pohozaev: E(Q) = 0 at the mass-critical power.
  ComplexField q = soliton(1023);
  CHECK(std::abs(energy(q, 5.0)) < 1e-10);
  CHECK(mass(q) == doctest::Approx(std::sqrt(3.0) * pi / 2).epsilon(1e-12));
}

TEST_CASE("one step conserves mass") {
  Grid g(make_domain({1.0, 1.0}), {63, 63});
  ComplexField f = smooth_random(g, 3, 6, 2.0);
  double m0 = mass(f);
  for (auto kind : {StepperKind::strang, StepperKind::relaxation}) {
    SimState s{0.0, f, 0.0};
    auto st = make_stepper(kind, 3.0);
    st->step(s, 1e-3, nullptr);
    CHECK(std::abs(mass(s.field) / m0 - 1.0) < 1e-13 * (kind == StepperKind::strang ? 1 : 100));
  }
}

TEST_CASE("small amplitude follows the linear propagator") {
  Grid g(make_domain({pi}), {63});
  SpectralCoeffs c(g);
  c.coeffs[2] = 1.0;
  double prev = INFINITY;
  for (double amp : {1e-2, 1e-3, 1e-4}) {
    SpectralCoeffs ca = c;
    ca.coeffs[2] *= amp;
    SimState s{0.0, dst_inverse(ca), 0.0};
    StrangStepper st(5.0);
    st.step(s, 0.01, nullptr);
    ComplexField lin = dst_inverse(linear_propagator(ca, 0.01));
    double rel = max_diff(s.field, lin) / amp;
    CHECK(rel < prev);
    prev = rel;
  }
  CHECK(prev < 1e-15);
}

TEST_CASE("soliton: exact phase rotation, second order in dt") {
  ComplexField q = soliton(1023);
  const double T = 2 * pi;
  std::vector<double> errs;
  for (double dt : {4e-3, 2e-3, 1e-3}) {
    Trajectory tr = evolve({0.0, q, 0.0}, T, nullptr, fixed_step(dt));
    ComplexField exact = cplx(std::polar(1.0, T)) * q;
    errs.push_back(max_diff(tr.final_state.field, exact));
    // |psi| changes only at second order.
    double mod = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
      mod = std::max(mod, std::abs(std::abs(tr.final_state.field[i]) - std::abs(q[i])));
    CHECK(mod <= errs.back());
  }
  CHECK(std::log2(errs[0] / errs[1]) == doctest::Approx(2.0).epsilon(0.1));
  CHECK(std::log2(errs[1] / errs[2]) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("Strang global order against a dt/8 reference") {
  Grid g(make_domain({1.0, 1.0}), {31, 31});
  ComplexField f = smooth_random(g, 9, 4, 0.2);
  const double T = 0.05, dt = 2e-3;
  ComplexField ref = evolve({0.0, f, 0.0}, T, nullptr, fixed_step(dt / 8)).final_state.field;
  double e1 = max_diff(evolve({0.0, f, 0.0}, T, nullptr, fixed_step(dt)).final_state.field, ref);
  double e2 = max_diff(evolve({0.0, f, 0.0}, T, nullptr, fixed_step(dt / 2)).final_state.field, ref);
  double slope = std::log2(e1 / e2);
  // Richardson: the dt/8 reference biases the pair by 1/64 of e1 at most.
  CHECK(slope == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("relaxation scheme cross-check on the soliton") {
  ComplexField q = soliton(511);
  const double T = 1.0;
  EvolveOptions o = fixed_step(1e-3);
  o.stepper = StepperKind::relaxation;
  Trajectory tr = evolve({0.0, q, 0.0}, T, nullptr, o);
  ComplexField exact = cplx(std::polar(1.0, T)) * q;
  CHECK(max_diff(tr.final_state.field, exact) < 1e-3);
  Trajectory st = evolve({0.0, q, 0.0}, T, nullptr, fixed_step(1e-3));
  CHECK(max_diff(tr.final_state.field, st.final_state.field) < 2e-3);
}

TEST_CASE("controlled step reproduces the Duhamel formula") {
  // psi(0) = 0, v = e_1 frozen: psi(dt) = -v (1 - e^{-i mu dt}) / mu on mode 1;
  // the cubic term enters at O(dt^4).
  Grid g(make_domain({pi}), {63});
  ComplexField v(g);
  for (int i = 0; i < g.n(0); ++i) v[i] = std::sin(g.node(0, i));
  ConstantControl ctl(v);
  std::vector<double> errs;
  for (double dt : {0.04, 0.02, 0.01}) {
    SimState s{0.0, ComplexField(g), 0.0};
    StrangStepper st(5.0);
    st.step(s, dt, &ctl);
    cplx factor = -(1.0 - std::polar(1.0, -dt)) / 1.0;
    errs.push_back(max_diff(s.field, factor * v));
  }
  CHECK(std::log2(errs[0] / errs[1]) == doctest::Approx(3.0).epsilon(0.1));
  CHECK(std::log2(errs[1] / errs[2]) == doctest::Approx(3.0).epsilon(0.1));
}

TEST_CASE("evolve: zero data, linear mode, step rule") {
  Grid g(make_domain({pi}), {63});
  Trajectory z = evolve({0.0, ComplexField(g), 0.0}, 0.5, nullptr, EvolveOptions{});
  CHECK(max_abs(z.final_state.field) == 0.0);
  CHECK(z.outcome == Outcome::completed);

  ComplexField mode(g);
  for (int i = 0; i < g.n(0); ++i) mode[i] = 1e-3 * std::sin(3 * g.node(0, i));
  Trajectory m = evolve({0.0, mode, 0.0}, 2.0, nullptr, EvolveOptions{});
  CHECK(m.outcome == Outcome::completed);
  CHECK(*std::max_element(m.monitors.h1.begin(), m.monitors.h1.end()) ==
        doctest::Approx(m.monitors.h1.front()).epsilon(1e-12));
  CHECK(m.final_state.t == 2.0);
  CHECK_THROWS(evolve({1.0, mode, 0.0}, 0.5, nullptr, EvolveOptions{}));

  // dt = cfl / (1 + max|psi|^{p-1}): doubling max|psi| in the cubic,
  // nonlinear-dominated regime shrinks the step by about four.
  Grid g2(make_domain({1.0, 1.0}), {15, 15});
  ComplexField f(g2);
  f[7 * 15 + 7] = 100.0;
  EvolveOptions o;
  o.p = 3.0;
  double dt1 = adaptive_dt({0.0, f, 0.0}, o);
  double dt2 = adaptive_dt({0.0, cplx(2.0) * f, 0.0}, o);
  CHECK(dt1 / dt2 == doctest::Approx(4.0).epsilon(1e-3));
  CHECK(adaptive_dt({0.0, ComplexField(g2), 0.0}, o) == o.dt_max);
}

TEST_CASE("blow-up detection rule") {
  EvolveOptions o;
  CHECK_FALSE(detect_blowup(10.0, 1.0, 1e-3, o));
  CHECK(detect_blowup(51.0, 1.0, 1e-3, o));
  CHECK(detect_blowup(1.0, 1.0, 1e-13, o));
  CHECK(detect_blowup(NAN, 1.0, 1e-3, o));
  o.blowup_ratio = 5.0;
  CHECK(detect_blowup(6.0, 1.0, 1e-3, o));
}

TEST_CASE("virial") {
  Grid g(make_domain({1.0, 1.0}), {63, 63});
  CHECK(virial(ComplexField(g), {0.5, 0.5}) == 0.0);
  GroundState gs = shoot_radial(2, 1e-8);
  double near = virial(assemble_Q_on_grid(gs, g, {0.5, 0.5}, 0.05), {0.5, 0.5});
  double far = virial(assemble_Q_on_grid(gs, g, {0.7, 0.6}, 0.05), {0.5, 0.5});
  CHECK(far > near);
}

TEST_CASE("Gagliardo-Nirenberg energy bound") {
  GroundState gs = shoot_radial(2, 1e-8);
  Grid g(make_domain({1.0, 1.0}), {63, 63});
  GnReport zero = gn_energy_bound_check(ComplexField(g), gs);
  CHECK(zero.passed);
  CHECK(zero.energy == 0.0);
  for (unsigned seed = 0; seed < 50; ++seed) {
    ComplexField f = smooth_random(g, seed, 5, 1.0);
    f = cplx(std::sqrt((0.2 + 0.015 * seed) * gs.mass_sq / mass(f))) * f;
    GnReport r = gn_energy_bound_check(f, gs);
    CHECK(r.passed);
    CHECK(r.energy > 0.0);
  }
}

TEST_CASE("virial concavity along a negative-energy run") {
  GroundState gs = shoot_radial(2, 1e-8);
  Grid g(make_domain({1.0, 1.0}), {127, 127});
  ComplexField f = cplx(1.1 / 0.08) * assemble_Q_on_grid(gs, g, {0.5, 0.5}, 0.08);
  double e0 = energy(f, 3.0);
  REQUIRE(e0 < 0.0);
  EvolveOptions o;
  o.cfl = 0.02;
  o.blowup_ratio = 3.0;
  Trajectory tr = evolve({0.0, f, 0.0}, 0.01, nullptr, o);
  ConcavityReport c = virial_concavity_check(tr, e0, 1e-6 * std::abs(16 * e0), 4);
  CHECK(c.passed);
  CHECK(c.max_second_difference < 0.0);
}

TEST_CASE("monitor csv") {
  Grid g(make_domain({pi}), {31});
  ComplexField mode(g);
  for (int i = 0; i < g.n(0); ++i) mode[i] = std::sin(g.node(0, i));
  Trajectory tr = evolve({0.0, mode, 0.0}, 0.1, nullptr, EvolveOptions{});
  auto path = std::filesystem::temp_directory_path() / "nlsctl_monitors_test.csv";
  write_monitors_csv(tr.monitors, path.string());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,mass,energy,h1,h2,virial,linf");
  std::filesystem::remove(path);
  for (std::size_t i = 1; i < tr.monitors.size(); ++i) CHECK(tr.monitors.t[i] > tr.monitors.t[i - 1]);
}
