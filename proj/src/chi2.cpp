#include "smpc/chi2.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace smpc {

namespace {

// P(a,x) via the power series, valid and fast for x < a + 1.
double lower_gamma_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int i = 0; i < 1000; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16)
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw std::runtime_error("incomplete gamma series did not converge");
}

// Q(a,x) = 1 - P(a,x) via the modified Lentz continued fraction, for x >= a + 1.
double upper_gamma_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double f = d;
  for (int i = 1; i <= 1000; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16)
      return f * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw std::runtime_error("incomplete gamma continued fraction did not converge");
}

}  // namespace

double regularized_lower_gamma(double a, double x) {
  if (!(a > 0.0)) throw std::invalid_argument("shape parameter must be positive");
  if (x < 0.0) throw std::invalid_argument("argument must be nonnegative");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return lower_gamma_series(a, x);
  return 1.0 - upper_gamma_cf(a, x);
}

double chi2_cdf(double x, int n) {
  if (n < 1) throw std::invalid_argument("degrees of freedom must be >= 1");
  if (x <= 0.0) return 0.0;
  return regularized_lower_gamma(0.5 * n, 0.5 * x);
}

}  // namespace smpc
