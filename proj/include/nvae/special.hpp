#pragma once

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <stdexcept>

namespace nvae {

inline double lgamma_pos(double x) {
  if (!(x > 0.0)) throw std::domain_error("lgamma: x must be positive");
  return std::lgamma(x);
}

inline double digamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("digamma: x must be positive");
  return boost::math::digamma(x);
}

inline double trigamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("trigamma: x must be positive");
  return boost::math::trigamma(x);
}

// Regularized lower incomplete gamma P(a, x).
inline double gamma_cdf_lower(double a, double x) {
  if (!(a > 0.0)) throw std::domain_error("gamma_cdf_lower: a must be positive");
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(a, x);
}

// dP/dx = x^(a-1) e^(-x) / Gamma(a), the Gamma(a, 1) density.
inline double gamma_cdf_x_derivative(double a, double x) {
  if (!(a > 0.0) || !(x > 0.0))
    throw std::domain_error("gamma_cdf_x_derivative: a and x must be positive");
  return boost::math::gamma_p_derivative(a, x);
}

// dP/da by central finite difference. The step is scaled to a and kept small
// enough that a - h stays positive.
inline double gamma_cdf_shape_derivative(double a, double x) {
  if (!(a > 0.0)) throw std::domain_error("gamma_cdf_shape_derivative: a must be positive");
  const double h = std::min(1e-4 * std::max(1.0, a), 0.5 * a);
  return (gamma_cdf_lower(a + h, x) - gamma_cdf_lower(a - h, x)) / (2.0 * h);
}

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Inverse of softplus; y must be positive.
inline double softplus_inverse(double y) {
  if (!(y > 0.0)) throw std::domain_error("softplus_inverse: y must be positive");
  return y > 30.0 ? y : std::log(std::expm1(y));
}

inline double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace nvae
