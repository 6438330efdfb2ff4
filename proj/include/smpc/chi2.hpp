#pragma once

namespace smpc {

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
// Series expansion for x < a + 1, Lentz continued fraction for the upper
// tail otherwise. Absolute error below 1e-12 over the ranges used here.
double regularized_lower_gamma(double a, double x);

// CDF of the chi-squared distribution with n degrees of freedom,
// chi2_cdf(x, n) = P(n/2, x/2).
double chi2_cdf(double x, int n);

}  // namespace smpc
