#pragma once

#include <functional>

namespace wb {

// Inverse of the standard normal CDF, Phi^{-1}(p) for p in (0,1).
// Wichura's algorithm AS 241 (PPND16), absolute error below 1e-15.
double inverse_normal_cdf(double p);

// Two-sided critical value: the c with Phi(c) - Phi(-c) = alpha,
// i.e. the (alpha+1)/2 quantile of the standard normal.
double normal_quantile(double alpha);

// Integral of f over [a,b]. Gauss-Legendre with 64 nodes per panel plus
// recursive bisection until the panel estimate is stable to rel_tol.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-10);

}  // namespace wb
