#pragma once

namespace tvae {

/// log Gamma(x) for x > 0, Lanczos approximation (g=7, 9 terms).
/// Relative error is on the order of 1e-14 over the supported range.
double log_gamma(double x);

/// Digamma psi(x) for x > 0: recurrence shift to x >= 10, then the
/// asymptotic Bernoulli series. Absolute error well under 1e-10.
double digamma(double x);

/// Regularized lower incomplete gamma P(alpha, x) for the rate-1 convention,
/// together with both partial derivatives. d_dx is the Gamma(alpha, 1)
/// density; d_dalpha is obtained by differentiating the series / continued
/// fraction in alpha (forward-mode duals), so it carries no step-size error.
struct GammaCdfEval {
  double value;     // P(alpha, x) in [0, 1]
  double d_dx;      // x^(alpha-1) e^-x / Gamma(alpha)
  double d_dalpha;  // dP/dalpha, negative for x > 0
};

GammaCdfEval gamma_cdf(double x, double alpha);

/// Inverse of gamma_cdf in x: smallest z with P(alpha, z) = u, by bisection
/// plus a Newton polish. u must lie in (0, 1).
double gamma_quantile(double u, double alpha);

namespace detail {
/// psi'(x) for x > 0. Internal helper for the degrees-of-freedom gradient of
/// the KL objective; not part of the public special-function surface.
double trigamma(double x);
}  // namespace detail

}  // namespace tvae
