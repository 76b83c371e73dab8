#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "nvae/noise.hpp"
#include "nvae/special.hpp"

namespace nvae {

struct DirichletParams {
  std::vector<double> concentration;

  DirichletParams() = default;
  explicit DirichletParams(std::vector<double> c) : concentration(std::move(c)) {
    validate();
  }

  void validate() const {
    if (concentration.empty())
      throw std::invalid_argument("DirichletParams: empty concentration");
    for (double v : concentration)
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument(
            "DirichletParams: entries must be positive and finite");
  }

  std::size_t dim() const { return concentration.size(); }
};

// Relaxed one-hot sample: softmax((logits + gumbel) / tau). Pathwise
// differentiable in the logits for fixed noise.
inline std::vector<double> gumbel_softmax_sample(
    const std::vector<double>& logits, double temperature, BaseNoise& noise) {
  if (!(temperature > 0.0))
    throw std::domain_error("gumbel_softmax_sample: temperature must be positive");
  const std::size_t k = logits.size();
  std::vector<double> y(k);
  double mx = -INFINITY;
  for (std::size_t t = 0; t < k; ++t) {
    const double u = noise.uniform();
    const double g = -std::log(-std::log(u));
    y[t] = (logits[t] + g) / temperature;
    mx = std::max(mx, y[t]);
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < k; ++t) {
    y[t] = std::exp(y[t] - mx);
    sum += y[t];
  }
  for (std::size_t t = 0; t < k; ++t) y[t] /= sum;
  return y;
}

// Marsaglia-Tsang sampler for Gamma(shape, 1). Shapes below one use the
// u^(1/shape) boost on a Gamma(shape + 1) draw. Deterministic given the
// noise stream.
inline double gamma_sample(double shape, BaseNoise& noise) {
  if (!(shape > 0.0)) throw std::domain_error("gamma_sample: shape must be positive");
  double boost_factor = 1.0;
  double a = shape;
  if (a < 1.0) {
    double u = noise.uniform();
    u = std::max(u, 1e-300);
    boost_factor = std::pow(u, 1.0 / a);
    a += 1.0;
  }
  const double d = a - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = noise.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = noise.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return boost_factor * d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return boost_factor * d * v;
  }
}

struct DirichletDraw {
  std::vector<double> theta;
  double gamma_sum = 0.0;  // sum of the underlying Gamma draws
};

// theta_t = gamma_t / sum(gamma), gamma_t ~ Gamma(nu_t, 1). Each component
// samples from its own substream so rejection counts cannot desynchronize
// the other components. Concentrations are clamped below at 1e-6 and the
// Gamma draws at 1e-100 so theta stays on the open simplex.
inline DirichletDraw dirichlet_sample(const DirichletParams& params,
                                      const BaseNoise& noise) {
  params.validate();
  const std::size_t k = params.dim();
  DirichletDraw draw;
  draw.theta.resize(k);
  double sum = 0.0;
  for (std::size_t t = 0; t < k; ++t) {
    BaseNoise sub = noise.substream(t, 0, 0x67616d6dULL);
    const double shape = std::max(params.concentration[t], 1e-6);
    const double g = std::max(gamma_sample(shape, sub), 1e-100);
    draw.theta[t] = g;
    sum += g;
  }
  for (std::size_t t = 0; t < k; ++t) draw.theta[t] /= sum;
  draw.gamma_sum = sum;
  return draw;
}

// Implicit reparameterization gradient dL/dnu for theta drawn by
// dirichlet_sample. Per Gamma component, dgamma/dshape =
// -(dP/dshape)/(dP/dgamma) with P the regularized lower incomplete gamma;
// the result is chained through theta = gamma / sum(gamma).
inline std::vector<double> dirichlet_implicit_grad(
    const DirichletParams& params, const std::vector<double>& theta,
    double gamma_sum, const std::vector<double>& upstream) {
  params.validate();
  const std::size_t k = params.dim();
  if (theta.size() != k || upstream.size() != k)
    throw std::invalid_argument("dirichlet_implicit_grad: size mismatch");
  double dot = 0.0;
  for (std::size_t t = 0; t < k; ++t) dot += upstream[t] * theta[t];
  std::vector<double> grad(k, 0.0);
  for (std::size_t t = 0; t < k; ++t) {
    const double shape = std::max(params.concentration[t], 1e-6);
    const double g = theta[t] * gamma_sum;
    const double dL_dgamma = (upstream[t] - dot) / gamma_sum;
    const double pdf = std::max(gamma_cdf_x_derivative(shape, g), 1e-300);
    const double dshape = gamma_cdf_shape_derivative(shape, g);
    const double dgamma_dshape = -dshape / pdf;
    const double v = dL_dgamma * dgamma_dshape;
    if (!std::isfinite(v))
      throw std::runtime_error(
          "dirichlet_implicit_grad: non-finite incomplete-gamma evaluation");
    grad[t] = v;
  }
  return grad;
}

// Closed-form KL(Dir(q) || Dir(p)).
inline double kl_dirichlet(const DirichletParams& q, const DirichletParams& p) {
  q.validate();
  p.validate();
  if (q.dim() != p.dim())
    throw std::invalid_argument("kl_dirichlet: dimension mismatch");
  double qs = 0.0, ps = 0.0;
  for (double v : q.concentration) qs += v;
  for (double v : p.concentration) ps += v;
  double kl = lgamma_pos(qs) - lgamma_pos(ps);
  const double dg_qs = digamma(qs);
  for (std::size_t t = 0; t < q.dim(); ++t) {
    const double qt = q.concentration[t];
    const double pt = p.concentration[t];
    kl += lgamma_pos(pt) - lgamma_pos(qt);
    kl += (qt - pt) * (digamma(qt) - dg_qs);
  }
  return kl;
}

// d KL / d q_t = (q_t - p_t) trigamma(q_t) - (sum q - sum p) trigamma(sum q)
inline std::vector<double> kl_dirichlet_grad_q(const DirichletParams& q,
                                               const DirichletParams& p) {
  if (q.dim() != p.dim())
    throw std::invalid_argument("kl_dirichlet_grad_q: dimension mismatch");
  double qs = 0.0, ps = 0.0;
  for (double v : q.concentration) qs += v;
  for (double v : p.concentration) ps += v;
  const double tg_qs = trigamma(qs);
  std::vector<double> g(q.dim());
  for (std::size_t t = 0; t < q.dim(); ++t)
    g[t] = (q.concentration[t] - p.concentration[t]) *
               trigamma(q.concentration[t]) -
           (qs - ps) * tg_qs;
  return g;
}

// d KL / d p_t = digamma(p_t) - digamma(sum p) - digamma(q_t) + digamma(sum q)
inline std::vector<double> kl_dirichlet_grad_p(const DirichletParams& q,
                                               const DirichletParams& p) {
  if (q.dim() != p.dim())
    throw std::invalid_argument("kl_dirichlet_grad_p: dimension mismatch");
  double qs = 0.0, ps = 0.0;
  for (double v : q.concentration) qs += v;
  for (double v : p.concentration) ps += v;
  const double dg_qs = digamma(qs);
  const double dg_ps = digamma(ps);
  std::vector<double> g(q.dim());
  for (std::size_t t = 0; t < q.dim(); ++t)
    g[t] = digamma(p.concentration[t]) - dg_ps -
           digamma(q.concentration[t]) + dg_qs;
  return g;
}

// Log density of Dir(c) at theta; used by the Monte Carlo KL oracle in tests
// and by nothing on the training path.
inline double dirichlet_log_pdf(const DirichletParams& params,
                                const std::vector<double>& theta) {
  params.validate();
  if (theta.size() != params.dim())
    throw std::invalid_argument("dirichlet_log_pdf: size mismatch");
  double sum = 0.0, lp = 0.0;
  for (std::size_t t = 0; t < params.dim(); ++t) {
    const double c = params.concentration[t];
    sum += c;
    lp += (c - 1.0) * std::log(std::max(theta[t], 1e-300)) - lgamma_pos(c);
  }
  return lp + lgamma_pos(sum);
}

}  // namespace nvae
