#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nlsctl/grid.hpp"
#include "nlsctl/spectral.hpp"

using namespace nlsctl;
using std::numbers::pi;

namespace {

ComplexField random_field(const Grid& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexField f(g);
  for (auto& v : f.values) v = {n(rng), n(rng)};
  return f;
}

double max_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Direct O(n^2) evaluation of the orthonormal sine coefficients in 1D.
std::vector<cplx> naive_dst(const ComplexField& f) {
  const Grid& g = f.grid;
  const int n = g.n(0);
  const double l = g.length(0), h = g.h(0);
  std::vector<cplx> c(n);
  for (int k = 1; k <= n; ++k)
    for (int i = 0; i < n; ++i)
      c[k - 1] += h * std::sqrt(2.0 / l) * std::sin(k * pi * g.node(0, i) / l) * f[i];
  return c;
}

}  // namespace

TEST_CASE("grid nodes and spacing") {
  Grid a(make_domain({pi}), {3});
  CHECK(a.node(0, 0) == doctest::Approx(pi / 4).epsilon(1e-15));
  CHECK(a.node(0, 1) == doctest::Approx(pi / 2).epsilon(1e-15));
  CHECK(a.node(0, 2) == doctest::Approx(3 * pi / 4).epsilon(1e-15));

  Grid b(make_domain({1.0, 2.0}), {4, 8});
  CHECK(b.h(0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(b.h(1) == doctest::Approx(2.0 / 9.0).epsilon(1e-15));
  CHECK(b.size() == 32);

  CHECK_THROWS(Grid(make_domain({1.0}), {2}));
  CHECK_THROWS(make_domain({-1.0}));
  CHECK_THROWS(Grid(make_domain({1.0, 1.0}), {8}));
}

TEST_CASE("eigenfunction maps to a single coefficient") {
  const double l = 2.5;
  Grid g(make_domain({l}), {63});
  ComplexField f(g);
  for (int i = 0; i < g.n(0); ++i) f[i] = std::sin(pi * g.node(0, i) / l);
  SpectralCoeffs c = dst_forward(f);
  // sin = sqrt(l/2) e_1 in the orthonormal basis.
  CHECK(std::abs(c.coeffs[0] - std::sqrt(l / 2)) < 1e-13);
  for (std::size_t k = 1; k < c.size(); ++k) CHECK(std::abs(c.coeffs[k]) < 1e-13);
}

TEST_CASE("forward transform matches direct summation") {
  Grid g(make_domain({1.7}), {37});
  ComplexField f = random_field(g, 3);
  CHECK(max_diff(dst_forward(f).coeffs, naive_dst(f)) < 1e-12);
}

TEST_CASE("round trip and Parseval") {
  for (auto [dom, n] : {std::pair{std::vector<double>{pi}, std::vector<int>{64}},
                        {std::vector<double>{1.0}, std::vector<int>{1023}},
                        {std::vector<double>{1.0, 2.0}, std::vector<int>{31, 48}},
                        {std::vector<double>{10.0, 10.0}, std::vector<int>{127, 127}}}) {
    Grid g(make_domain(dom), n);
    ComplexField f = random_field(g, 11);
    SpectralCoeffs c = dst_forward(f);
    ComplexField back = dst_inverse(c);
    CHECK(max_diff(back.values, f.values) < 1e-12 * max_abs(f));
    double field_sq = 0.0, coeff_sq = 0.0;
    for (auto v : f.values) field_sq += std::norm(v) * g.cell_volume();
    for (auto v : c.coeffs) coeff_sq += std::norm(v);
    CHECK(std::abs(coeff_sq - field_sq) < 1e-12 * field_sq);
  }
}

TEST_CASE("shape mismatch is rejected") {
  Grid g(make_domain({1.0}), {15});
  std::vector<cplx> data(14);
  CHECK_THROWS(dst_forward_inplace(g, data));
}

TEST_CASE("laplacian multipliers") {
  Grid g(make_domain({pi}), {15});
  SpectralCoeffs c(g);
  c.coeffs[0] = 1.0;
  CHECK(apply_laplacian(c).coeffs[0].real() == doctest::Approx(-1.0).epsilon(1e-15));

  Grid sq(make_domain({1.0, 1.0}), {7, 7});
  SpectralCoeffs s(sq);
  s.coeffs[0] = 1.0;
  CHECK(apply_laplacian(s).coeffs[0].real() == doctest::Approx(-2 * pi * pi).epsilon(1e-14));

  SpectralCoeffs zero(sq);
  for (auto v : apply_laplacian(zero).coeffs) CHECK(v == cplx(0.0));
}

TEST_CASE("sobolev norms of a single mode") {
  Grid g(make_domain({pi}), {31});
  SpectralCoeffs c(g);
  c.coeffs[0] = 1.0;
  CHECK(sobolev_norm(c, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(sobolev_norm(c, 2) == doctest::Approx(2.0).epsilon(1e-15));
  const double a = 0.7;
  ComplexField f(g);
  for (int i = 0; i < g.n(0); ++i) f[i] = a * std::sin(g.node(0, i));
  // a sin = a sqrt(pi/2) e_1, so s = 1 gives a sqrt(pi/2) sqrt(2) = a sqrt(pi).
  CHECK(sobolev_norm(f, 1) == doctest::Approx(a * std::sqrt(pi)).epsilon(1e-13));
  CHECK_THROWS(sobolev_norm(c, 1.5));
}

TEST_CASE("linear propagator") {
  Grid g(make_domain({pi}), {31});
  SpectralCoeffs c(g);
  c.coeffs[0] = {0.3, -0.4};
  CHECK(max_diff(linear_propagator(c, 0.0).coeffs, c.coeffs) == 0.0);
  CHECK(max_diff(linear_propagator(c, 2 * pi).coeffs, c.coeffs) < 1e-15);
  CHECK_THROWS(linear_propagator(c, INFINITY));

  Grid g2(make_domain({1.0, 1.5}), {24, 30});
  SpectralCoeffs r = dst_forward(random_field(g2, 5));
  double n0 = sobolev_norm(r, 0);
  SpectralCoeffs a = linear_propagator(linear_propagator(r, 0.013), 0.029);
  SpectralCoeffs b = linear_propagator(r, 0.042);
  CHECK(std::abs(sobolev_norm(a, 0) - n0) < 1e-13 * n0);
  CHECK(max_diff(a.coeffs, b.coeffs) < 1e-12 * n0);
}

TEST_CASE("spectral laplacian against second differences") {
  // sin^3 lies in the sine span, so the spectral value is exact and the
  // three-point stencil error must fall by four per halving of h.
  auto fd_error = [](int n) {
    Grid g(make_domain({1.0}), {n});
    ComplexField f(g);
    auto u = [](double x) { return std::pow(std::sin(pi * x), 3); };
    for (int i = 0; i < n; ++i) f[i] = u(g.node(0, i));
    ComplexField lap = laplacian(f);
    double h = g.h(0), err = 0.0;
    for (int i = 0; i < n; ++i) {
      double x = g.node(0, i);
      double fd = (u(x - h) - 2 * u(x) + u(x + h)) / (h * h);
      err = std::max(err, std::abs(lap[i].real() - fd));
    }
    return err;
  };
  double e1 = fd_error(63), e2 = fd_error(127);
  CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("gradient of a product mode") {
  Grid g(make_domain({1.0, 2.0}), {31, 47});
  ComplexField f(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    Point x = g.coords(i);
    f[i] = std::sin(pi * x[0]) * std::sin(3 * pi * x[1] / 2);
  }
  auto grad = gradient(f);
  double err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    Point x = g.coords(i);
    err = std::max(err, std::abs(grad[0][i] - pi * std::cos(pi * x[0]) * std::sin(1.5 * pi * x[1])));
    err = std::max(err, std::abs(grad[1][i] - 1.5 * pi * std::sin(pi * x[0]) * std::cos(1.5 * pi * x[1])));
  }
  CHECK(err < 1e-11);
}
