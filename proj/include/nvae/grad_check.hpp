#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "nvae/matrix.hpp"

namespace nvae {

// One parameter tensor under test: the value is perturbed in place and the
// analytic gradient is compared against central differences of eval().
struct GradCheckItem {
  DenseMatrix* value = nullptr;
  const DenseMatrix* grad = nullptr;
};

// Max over all entries of |analytic - central| / max(|analytic|, |central|,
// 1e-12). eval() must be a deterministic function of the current parameter
// values (any noise frozen by the caller). Entries where both sides sit
// below zero_tol count as agreeing: central differences of an objective f
// carry rounding noise of roughly |f| * eps / step, so a mathematically zero
// gradient cannot be resolved past that floor.
inline double grad_check(const std::function<double()>& eval,
                         const std::vector<GradCheckItem>& items, double step,
                         double zero_tol = 1e-8) {
  double worst = 0.0;
  for (const GradCheckItem& item : items) {
    if (!item.value || !item.grad || !item.value->same_shape(*item.grad))
      throw std::invalid_argument("grad_check: item shape mismatch");
    for (std::size_t i = 0; i < item.value->size(); ++i) {
      const double saved = item.value->data[i];
      item.value->data[i] = saved + step;
      const double f_plus = eval();
      item.value->data[i] = saved - step;
      const double f_minus = eval();
      item.value->data[i] = saved;
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
        throw std::runtime_error("grad_check: objective is not finite");
      const double numeric = (f_plus - f_minus) / (2.0 * step);
      const double analytic = item.grad->data[i];
      if (std::fabs(analytic) < zero_tol && std::fabs(numeric) < zero_tol)
        continue;
      const double denom =
          std::max({std::fabs(analytic), std::fabs(numeric), 1e-12});
      worst = std::max(worst, std::fabs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace nvae
