#include "nlsctl/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace nlsctl {

namespace {

// FFTW planning is not thread safe; execution of an existing plan on new
// arrays is. Plans are estimated rather than measured so that runs are
// bitwise reproducible.
std::mutex plan_mutex;
std::map<std::pair<std::vector<int>, std::vector<int>>, fftw_plan> plans;

fftw_plan plan_for(const std::vector<int>& n,
                   const std::vector<fftw_r2r_kind>& kinds) {
  std::vector<int> kind_ids(kinds.begin(), kinds.end());
  auto key = std::make_pair(n, kind_ids);
  std::lock_guard<std::mutex> lock(plan_mutex);
  auto it = plans.find(key);
  if (it != plans.end()) return it->second;
  std::size_t total = 1;
  for (int m : n) total *= static_cast<std::size_t>(m);
  std::vector<double> buf(2 * total);
  fftw_plan p = fftw_plan_many_r2r(
      static_cast<int>(n.size()), n.data(), 2, buf.data(), nullptr, 2, 1,
      buf.data(), nullptr, 2, 1, kinds.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p) throw std::runtime_error("fftw planning failed");
  plans.emplace(key, p);
  return p;
}

// Transforms real and imaginary parts independently.
void r2r_complex(const std::vector<int>& n,
                 const std::vector<fftw_r2r_kind>& kinds, cplx* data) {
  fftw_plan p = plan_for(n, kinds);
  double* d = reinterpret_cast<double*>(data);
  fftw_execute_r2r(p, d, d);
}

void sine_r2r(const Grid& g, std::vector<cplx>& data, double scale) {
  if (data.size() != g.size())
    throw std::invalid_argument("transform data does not match grid");
  std::vector<fftw_r2r_kind> kinds(g.dim(), FFTW_RODFT00);
  r2r_complex(g.counts(), kinds, data.data());
  for (auto& v : data) v *= scale;
}

double inverse_scale(const Grid& g) {
  double s = 1.0;
  for (int j = 0; j < g.dim(); ++j) s /= std::sqrt(2.0 * g.length(j));
  return s;
}

}  // namespace

double dst_forward_scale(const Grid& g) { return g.cell_volume() * inverse_scale(g); }

void dst_forward_inplace(const Grid& g, std::vector<cplx>& data) {
  sine_r2r(g, data, dst_forward_scale(g));
}

void dst_raw_inplace(const Grid& g, std::vector<cplx>& data) { sine_r2r(g, data, 1.0); }

void dst_inverse_inplace(const Grid& g, std::vector<cplx>& data) {
  sine_r2r(g, data, inverse_scale(g));
}

SpectralCoeffs dst_forward(const ComplexField& field) {
  SpectralCoeffs c(field.grid);
  c.coeffs = field.values;
  dst_forward_inplace(field.grid, c.coeffs);
  return c;
}

ComplexField dst_inverse(const SpectralCoeffs& coeffs) {
  ComplexField f(coeffs.grid);
  f.values = coeffs.coeffs;
  dst_inverse_inplace(coeffs.grid, f.values);
  return f;
}

SpectralCoeffs apply_laplacian(const SpectralCoeffs& coeffs) {
  SpectralCoeffs out = coeffs;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.coeffs[i] *= -coeffs.grid.eigenvalue(i);
  return out;
}

SpectralCoeffs linear_propagator(const SpectralCoeffs& coeffs, double t) {
  if (!std::isfinite(t)) throw std::invalid_argument("propagation time must be finite");
  SpectralCoeffs out = coeffs;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.coeffs[i] *= std::polar(1.0, -coeffs.grid.eigenvalue(i) * t);
  return out;
}

double sobolev_norm(const SpectralCoeffs& coeffs, double s) {
  if (s != 0.0 && s != 1.0 && s != 2.0)
    throw std::invalid_argument("sobolev_norm supports s = 0, 1, 2");
  double sum = 0.0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    double w = std::pow(1.0 + coeffs.grid.eigenvalue(i), s);
    sum += w * std::norm(coeffs.coeffs[i]);
  }
  return std::sqrt(sum);
}

double sobolev_norm(const ComplexField& field, double s) {
  return sobolev_norm(dst_forward(field), s);
}

double gradient_norm_sq(const SpectralCoeffs& coeffs) {
  double sum = 0.0;
  for (std::size_t i = 0; i < coeffs.size(); ++i)
    sum += coeffs.grid.eigenvalue(i) * std::norm(coeffs.coeffs[i]);
  return sum;
}

ComplexField spectral_derivative(const SpectralCoeffs& coeffs,
                                 std::array<int, 2> orders) {
  const Grid& g = coeffs.grid;
  const int d = g.dim();
  std::vector<int> padded(d);
  std::vector<fftw_r2r_kind> kinds(d);
  std::vector<int> offset(d);
  for (int j = 0; j < d; ++j) {
    if (orders[j] < 0) throw std::invalid_argument("negative derivative order");
    bool odd = orders[j] % 2 == 1;
    padded[j] = g.n(j) + (odd ? 2 : 0);
    kinds[j] = odd ? FFTW_REDFT00 : FFTW_RODFT00;
    offset[j] = odd ? 1 : 0;
  }
  // d^o/dx^o sin = s_o kappa^o (sin or cos), s = +,+,-,- for o mod 4 = 0..3
  auto axis_factor = [&](int j, int k) {
    int o = orders[j];
    double kappa = k * std::numbers::pi / g.length(j);
    double f = std::pow(kappa, o);
    return (o % 4 >= 2) ? -f : f;
  };
  std::size_t total = 1;
  for (int m : padded) total *= static_cast<std::size_t>(m);
  std::vector<cplx> buf(total, 0.0);
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    auto m = g.multi_index(idx);
    double f = axis_factor(0, m[0] + 1);
    std::size_t pos = static_cast<std::size_t>(m[0] + offset[0]);
    if (d == 2) {
      f *= axis_factor(1, m[1] + 1);
      pos = pos * padded[1] + static_cast<std::size_t>(m[1] + offset[1]);
    }
    buf[pos] = f * coeffs.coeffs[idx];
  }
  r2r_complex(padded, kinds, buf.data());
  double scale = inverse_scale(g);
  ComplexField out(g);
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    auto m = g.multi_index(idx);
    std::size_t pos = static_cast<std::size_t>(m[0] + offset[0]);
    if (d == 2) pos = pos * padded[1] + static_cast<std::size_t>(m[1] + offset[1]);
    out[idx] = scale * buf[pos];
  }
  return out;
}

std::vector<ComplexField> gradient(const ComplexField& field) {
  SpectralCoeffs c = dst_forward(field);
  std::vector<ComplexField> grad;
  for (int j = 0; j < field.grid.dim(); ++j) {
    std::array<int, 2> o{0, 0};
    o[j] = 1;
    grad.push_back(spectral_derivative(c, o));
  }
  return grad;
}

ComplexField laplacian(const ComplexField& field) {
  return dst_inverse(apply_laplacian(dst_forward(field)));
}

}  // namespace nlsctl
