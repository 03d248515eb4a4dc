#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

namespace nlsctl {

using cplx = std::complex<double>;
using Point = std::array<double, 2>;  // second coordinate unused in 1D

struct RectDomain {
  std::vector<double> lengths;

  int dim() const { return static_cast<int>(lengths.size()); }
};

RectDomain make_domain(std::vector<double> lengths);

// Interior nodes x = (i+1) h, i = 0..n-1, h = l/(n+1). Row-major storage,
// last axis fastest.
class Grid {
 public:
  static constexpr int min_points = 3;

  Grid() = default;
  Grid(RectDomain domain, std::vector<int> n);

  const RectDomain& domain() const { return domain_; }
  int dim() const { return domain_.dim(); }
  int n(int axis) const { return n_[axis]; }
  const std::vector<int>& counts() const { return n_; }
  double h(int axis) const { return h_[axis]; }
  double length(int axis) const { return domain_.lengths[axis]; }
  std::size_t size() const { return size_; }
  double cell_volume() const { return volume_; }

  double node(int axis, int i) const { return (i + 1) * h_[axis]; }
  std::array<int, 2> multi_index(std::size_t idx) const;
  Point coords(std::size_t idx) const;
  Point midpoint() const;
  bool contains(const Point& x) const;

  // Dirichlet eigenvalue of the mode stored at idx, (k_j = i_j + 1).
  double eigenvalue(std::size_t idx) const;
  std::vector<double> eigenvalues() const;

  bool same_shape(const Grid& other) const;

 private:
  RectDomain domain_;
  std::vector<int> n_;
  std::vector<double> h_;
  std::size_t size_ = 0;
  double volume_ = 0.0;
};

Grid build_grid(const RectDomain& domain, const std::vector<int>& n);

double distance(const Point& a, const Point& b, int dim);

struct ComplexField {
  Grid grid;
  std::vector<cplx> values;

  ComplexField() = default;
  explicit ComplexField(const Grid& g) : grid(g), values(g.size()) {}
  ComplexField(const Grid& g, std::vector<cplx> v);

  std::size_t size() const { return values.size(); }
  cplx& operator[](std::size_t i) { return values[i]; }
  const cplx& operator[](std::size_t i) const { return values[i]; }
};

// Coefficients in the L2-orthonormal Dirichlet basis
// e_k(x) = prod_j sqrt(2/l_j) sin(k_j pi x_j / l_j), same layout as the field.
struct SpectralCoeffs {
  Grid grid;
  std::vector<cplx> coeffs;

  SpectralCoeffs() = default;
  explicit SpectralCoeffs(const Grid& g) : grid(g), coeffs(g.size()) {}

  std::size_t size() const { return coeffs.size(); }
  double eigenvalue(std::size_t idx) const { return grid.eigenvalue(idx); }
};

void require_same_shape(const Grid& a, const Grid& b, const char* what);

ComplexField operator+(const ComplexField& a, const ComplexField& b);
ComplexField operator-(const ComplexField& a, const ComplexField& b);
ComplexField operator*(cplx s, const ComplexField& a);

// Trapezoid inner product and norm on interior nodes (boundary values are 0).
cplx inner(const ComplexField& a, const ComplexField& b);
double l2_norm(const ComplexField& f);
double max_abs(const ComplexField& f);

}  // namespace nlsctl
