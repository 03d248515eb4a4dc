#include "nlsctl/grid.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace nlsctl {

RectDomain make_domain(std::vector<double> lengths) {
  if (lengths.empty() || lengths.size() > 2)
    throw std::invalid_argument("domain dimension must be 1 or 2");
  for (double l : lengths)
    if (!(l > 0.0) || !std::isfinite(l))
      throw std::invalid_argument("domain lengths must be positive");
  return RectDomain{std::move(lengths)};
}

Grid::Grid(RectDomain domain, std::vector<int> n)
    : domain_(make_domain(std::move(domain.lengths))), n_(std::move(n)) {
  if (static_cast<int>(n_.size()) != domain_.dim())
    throw std::invalid_argument("grid counts do not match domain dimension");
  size_ = 1;
  volume_ = 1.0;
  for (int j = 0; j < dim(); ++j) {
    if (n_[j] < min_points)
      throw std::invalid_argument("grid needs at least " +
                                  std::to_string(min_points) +
                                  " interior points per axis");
    h_.push_back(domain_.lengths[j] / (n_[j] + 1));
    size_ *= static_cast<std::size_t>(n_[j]);
    volume_ *= h_.back();
  }
}

Grid build_grid(const RectDomain& domain, const std::vector<int>& n) {
  return Grid(domain, n);
}

std::array<int, 2> Grid::multi_index(std::size_t idx) const {
  if (dim() == 1) return {static_cast<int>(idx), 0};
  return {static_cast<int>(idx / n_[1]), static_cast<int>(idx % n_[1])};
}

Point Grid::coords(std::size_t idx) const {
  auto m = multi_index(idx);
  if (dim() == 1) return {node(0, m[0]), 0.0};
  return {node(0, m[0]), node(1, m[1])};
}

Point Grid::midpoint() const {
  Point c{0.0, 0.0};
  for (int j = 0; j < dim(); ++j) c[j] = 0.5 * length(j);
  return c;
}

bool Grid::contains(const Point& x) const {
  for (int j = 0; j < dim(); ++j)
    if (!(x[j] > 0.0 && x[j] < length(j))) return false;
  return true;
}

double Grid::eigenvalue(std::size_t idx) const {
  auto m = multi_index(idx);
  double mu = 0.0;
  for (int j = 0; j < dim(); ++j) {
    double kj = (m[j] + 1) * std::numbers::pi / length(j);
    mu += kj * kj;
  }
  return mu;
}

std::vector<double> Grid::eigenvalues() const {
  std::vector<double> mu(size_);
  for (std::size_t i = 0; i < size_; ++i) mu[i] = eigenvalue(i);
  return mu;
}

bool Grid::same_shape(const Grid& other) const {
  return n_ == other.n_ && domain_.lengths == other.domain_.lengths;
}

double distance(const Point& a, const Point& b, int dim) {
  double s = 0.0;
  for (int j = 0; j < dim; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

ComplexField::ComplexField(const Grid& g, std::vector<cplx> v)
    : grid(g), values(std::move(v)) {
  if (values.size() != grid.size())
    throw std::invalid_argument("field values do not match grid size");
}

void require_same_shape(const Grid& a, const Grid& b, const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string("shape mismatch in ") + what);
}

ComplexField operator+(const ComplexField& a, const ComplexField& b) {
  require_same_shape(a.grid, b.grid, "field addition");
  ComplexField out(a.grid);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

ComplexField operator-(const ComplexField& a, const ComplexField& b) {
  require_same_shape(a.grid, b.grid, "field subtraction");
  ComplexField out(a.grid);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

ComplexField operator*(cplx s, const ComplexField& a) {
  ComplexField out(a.grid);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

cplx inner(const ComplexField& a, const ComplexField& b) {
  require_same_shape(a.grid, b.grid, "inner product");
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s * a.grid.cell_volume();
}

double l2_norm(const ComplexField& f) {
  double s = 0.0;
  for (const auto& v : f.values) s += std::norm(v);
  return std::sqrt(s * f.grid.cell_volume());
}

double max_abs(const ComplexField& f) {
  double m = 0.0;
  for (const auto& v : f.values) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace nlsctl
