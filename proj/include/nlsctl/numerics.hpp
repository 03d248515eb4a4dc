#pragma once

#include <functional>
#include <vector>

namespace nlsctl {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms = 0.0;  // root mean square residual
};

// Ordinary least squares y ~ intercept + slope x.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Golden-section minimization of a unimodal function on [a, b].
double golden_minimize(const std::function<double(double)>& f, double a, double b,
                       double tol);

}  // namespace nlsctl
