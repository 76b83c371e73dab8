#pragma once

#include <cmath>
#include <stdexcept>

#include "nvae/matrix.hpp"

namespace nvae {

enum class BatchNormMode { kTrain, kInfer };

// Per-feature batch normalization state. Columns of the normalized matrix
// are the features; the rows form the batch. Population (biased) variance
// is used throughout.
struct BatchNormState {
  DenseMatrix gamma;         // 1xF scale
  DenseMatrix shift;         // 1xF offset
  DenseMatrix running_mean;  // 1xF
  DenseMatrix running_var;   // 1xF
  double momentum = 0.99;
  double eps = 1e-5;

  BatchNormState() = default;
  explicit BatchNormState(std::size_t features)
      : gamma(1, features, 1.0),
        shift(1, features, 0.0),
        running_mean(1, features, 0.0),
        running_var(1, features, 1.0) {}

  std::size_t features() const { return gamma.cols; }
};

// Values retained by the train-mode forward pass for the backward pass.
struct BatchNormCache {
  DenseMatrix xhat;             // normalized input, same shape as x
  std::vector<double> inv_std;  // per feature, 1/sqrt(var + eps)
};

// Running statistics produced by a train-mode forward. They are returned
// rather than written in place so that a forward evaluation has no side
// effects; the trainer commits them explicitly after each step.
struct BatchNormUpdate {
  DenseMatrix running_mean;
  DenseMatrix running_var;
};

inline DenseMatrix batchnorm_forward(const DenseMatrix& x,
                                     const BatchNormState& state,
                                     BatchNormMode mode,
                                     BatchNormCache* cache = nullptr,
                                     BatchNormUpdate* update = nullptr) {
  const std::size_t f = state.features();
  if (x.cols != f)
    throw std::invalid_argument("batchnorm_forward: expected " +
                                std::to_string(f) + " features, got " +
                                shape_str(x));
  DenseMatrix y(x.rows, x.cols);
  if (mode == BatchNormMode::kInfer) {
    for (std::size_t j = 0; j < f; ++j) {
      const double inv =
          1.0 / std::sqrt(state.running_var(0, j) + state.eps);
      for (std::size_t i = 0; i < x.rows; ++i)
        y(i, j) = state.gamma(0, j) * (x(i, j) - state.running_mean(0, j)) *
                      inv +
                  state.shift(0, j);
    }
    return y;
  }
  if (x.rows < 2)
    throw std::invalid_argument(
        "batchnorm_forward: train mode needs a batch of at least 2 rows");
  const double n = static_cast<double>(x.rows);
  if (cache) {
    cache->xhat = DenseMatrix(x.rows, x.cols);
    cache->inv_std.assign(f, 0.0);
  }
  if (update) {
    update->running_mean = state.running_mean;
    update->running_var = state.running_var;
  }
  for (std::size_t j = 0; j < f; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) mean += x(i, j);
    mean /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      const double d = x(i, j) - mean;
      var += d * d;
    }
    var /= n;
    const double inv = 1.0 / std::sqrt(var + state.eps);
    for (std::size_t i = 0; i < x.rows; ++i) {
      const double xh = (x(i, j) - mean) * inv;
      if (cache) cache->xhat(i, j) = xh;
      y(i, j) = state.gamma(0, j) * xh + state.shift(0, j);
    }
    if (cache) cache->inv_std[j] = inv;
    if (update) {
      update->running_mean(0, j) =
          state.momentum * state.running_mean(0, j) + (1.0 - state.momentum) * mean;
      update->running_var(0, j) =
          state.momentum * state.running_var(0, j) + (1.0 - state.momentum) * var;
    }
  }
  return y;
}

struct BatchNormGrads {
  DenseMatrix grad_x;
  DenseMatrix grad_gamma;  // 1xF
  DenseMatrix grad_shift;  // 1xF
};

// Backward of the train-mode forward; propagates through the batch mean and
// variance.
inline BatchNormGrads batchnorm_backward(const DenseMatrix& grad_out,
                                         const BatchNormState& state,
                                         const BatchNormCache& cache) {
  const std::size_t f = state.features();
  if (grad_out.cols != f || !grad_out.same_shape(cache.xhat))
    throw std::invalid_argument("batchnorm_backward: shape mismatch");
  const double n = static_cast<double>(grad_out.rows);
  BatchNormGrads g;
  g.grad_x = DenseMatrix(grad_out.rows, grad_out.cols);
  g.grad_gamma = DenseMatrix(1, f, 0.0);
  g.grad_shift = DenseMatrix(1, f, 0.0);
  for (std::size_t j = 0; j < f; ++j) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t i = 0; i < grad_out.rows; ++i) {
      sum_g += grad_out(i, j);
      sum_gx += grad_out(i, j) * cache.xhat(i, j);
    }
    g.grad_shift(0, j) = sum_g;
    g.grad_gamma(0, j) = sum_gx;
    const double gamma = state.gamma(0, j);
    const double inv = cache.inv_std[j];
    const double mean_dxhat = gamma * sum_g / n;
    const double mean_dxhat_xhat = gamma * sum_gx / n;
    for (std::size_t i = 0; i < grad_out.rows; ++i) {
      const double dxhat = gamma * grad_out(i, j);
      g.grad_x(i, j) =
          inv * (dxhat - mean_dxhat - cache.xhat(i, j) * mean_dxhat_xhat);
    }
  }
  return g;
}

// Row-wise normalization: each row of x (length V) is standardized with its
// own population mean/variance, then scaled by gamma[r] and offset by
// shift[r]. Always uses the current population statistics; there are no
// running averages at this site.
struct RowNormCache {
  DenseMatrix xhat;
  std::vector<double> inv_std;  // per row
};

inline DenseMatrix rownorm_forward(const DenseMatrix& x,
                                   const DenseMatrix& gamma,
                                   const DenseMatrix& shift, double eps,
                                   RowNormCache* cache = nullptr) {
  if (gamma.size() != x.rows || shift.size() != x.rows)
    throw std::invalid_argument("rownorm_forward: scale shape mismatch");
  DenseMatrix y(x.rows, x.cols);
  if (cache) {
    cache->xhat = DenseMatrix(x.rows, x.cols);
    cache->inv_std.assign(x.rows, 0.0);
  }
  const double n = static_cast<double>(x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row_ptr(r);
    double* yr = y.row_ptr(r);
    double mean = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) mean += xr[j];
    mean /= n;
    double var = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double d = xr[j] - mean;
      var += d * d;
    }
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    const double g = gamma.data[r];
    const double s = shift.data[r];
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double xh = (xr[j] - mean) * inv;
      if (cache) cache->xhat(r, j) = xh;
      yr[j] = g * xh + s;
    }
    if (cache) cache->inv_std[r] = inv;
  }
  return y;
}

struct RowNormGrads {
  DenseMatrix grad_x;
  DenseMatrix grad_gamma;  // 1xR
  DenseMatrix grad_shift;  // 1xR
};

inline RowNormGrads rownorm_backward(const DenseMatrix& grad_out,
                                     const DenseMatrix& gamma,
                                     const RowNormCache& cache) {
  if (!grad_out.same_shape(cache.xhat))
    throw std::invalid_argument("rownorm_backward: shape mismatch");
  RowNormGrads g;
  g.grad_x = DenseMatrix(grad_out.rows, grad_out.cols);
  g.grad_gamma = DenseMatrix(1, grad_out.rows, 0.0);
  g.grad_shift = DenseMatrix(1, grad_out.rows, 0.0);
  const double n = static_cast<double>(grad_out.cols);
  for (std::size_t r = 0; r < grad_out.rows; ++r) {
    const double* go = grad_out.row_ptr(r);
    const double* xh = cache.xhat.row_ptr(r);
    double* gx = g.grad_x.row_ptr(r);
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t j = 0; j < grad_out.cols; ++j) {
      sum_g += go[j];
      sum_gx += go[j] * xh[j];
    }
    g.grad_shift(0, r) = sum_g;
    g.grad_gamma(0, r) = sum_gx;
    const double gam = gamma.data[r];
    const double inv = cache.inv_std[r];
    const double mean_d = gam * sum_g / n;
    const double mean_dx = gam * sum_gx / n;
    for (std::size_t j = 0; j < grad_out.cols; ++j)
      gx[j] = inv * (gam * go[j] - mean_d - xh[j] * mean_dx);
  }
  return g;
}

}  // namespace nvae
