#pragma once

#include <array>
#include <vector>

#include "nlsctl/grid.hpp"

namespace nlsctl {

// Orthonormal sine transforms. Parseval: h^d sum |u_i|^2 = sum |c_k|^2.
void dst_forward_inplace(const Grid& g, std::vector<cplx>& data);
void dst_inverse_inplace(const Grid& g, std::vector<cplx>& data);
// Unscaled DST-I along every axis; applying it twice multiplies by
// prod_j 2 (n_j + 1).
void dst_raw_inplace(const Grid& g, std::vector<cplx>& data);
// Factor taking dst_raw_inplace output to orthonormal coefficients.
double dst_forward_scale(const Grid& g);

SpectralCoeffs dst_forward(const ComplexField& field);
ComplexField dst_inverse(const SpectralCoeffs& coeffs);

SpectralCoeffs apply_laplacian(const SpectralCoeffs& coeffs);
SpectralCoeffs linear_propagator(const SpectralCoeffs& coeffs, double t);

// (sum (1 + mu_k)^s |c_k|^2)^(1/2), s in {0, 1, 2}.
double sobolev_norm(const SpectralCoeffs& coeffs, double s);
double sobolev_norm(const ComplexField& field, double s);

// ||grad u||^2 = sum mu_k |c_k|^2.
double gradient_norm_sq(const SpectralCoeffs& coeffs);

// Mixed partial derivative of the sine series, evaluated at the interior
// nodes. Odd orders land in the cosine basis, evaluated with a padded DCT.
ComplexField spectral_derivative(const SpectralCoeffs& coeffs,
                                 std::array<int, 2> orders);

std::vector<ComplexField> gradient(const ComplexField& field);
ComplexField laplacian(const ComplexField& field);

}  // namespace nlsctl
