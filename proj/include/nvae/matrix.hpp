#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvae/noise.hpp"

namespace nvae {

// Dense row-major matrix of doubles. This is the only array type used by the
// model; vectors are 1xN or Nx1 matrices.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) {
    return data[r * cols + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }

  double* row_ptr(std::size_t r) { return data.data() + r * cols; }
  const double* row_ptr(std::size_t r) const { return data.data() + r * cols; }

  std::size_t size() const { return rows * cols; }

  bool same_shape(const DenseMatrix& other) const {
    return rows == other.rows && cols == other.cols;
  }

  void fill(double v) { data.assign(rows * cols, v); }

  static DenseMatrix zeros(std::size_t r, std::size_t c) {
    return DenseMatrix(r, c, 0.0);
  }

  static DenseMatrix gaussian(std::size_t r, std::size_t c, double stddev,
                              BaseNoise noise) {
    DenseMatrix m(r, c);
    for (double& v : m.data) v = stddev * noise.normal();
    return m;
  }

  static DenseMatrix uniform(std::size_t r, std::size_t c, double lo,
                             double hi, BaseNoise noise) {
    DenseMatrix m(r, c);
    for (double& v : m.data) v = lo + (hi - lo) * noise.uniform();
    return m;
  }
};

inline std::string shape_str(const DenseMatrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

inline bool all_finite(const DenseMatrix& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

// c = a * b
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.rows)
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(a) +
                                " * " + shape_str(b));
  DenseMatrix c(a.rows, b.cols, 0.0);
  // i-k-j order keeps the inner loops on contiguous rows.
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row_ptr(i);
    double* crow = c.row_ptr(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.row_ptr(k);
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

// Gradients of c = a * b given dL/dc: dL/da = g * b^T, dL/db = a^T * g.
inline void matmul_backward(const DenseMatrix& a, const DenseMatrix& b,
                            const DenseMatrix& grad_out, DenseMatrix* grad_a,
                            DenseMatrix* grad_b) {
  if (grad_out.rows != a.rows || grad_out.cols != b.cols)
    throw std::invalid_argument("matmul_backward: bad grad shape " +
                                shape_str(grad_out));
  if (grad_a) {
    *grad_a = DenseMatrix::zeros(a.rows, a.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
      const double* grow = grad_out.row_ptr(i);
      double* garow = grad_a->row_ptr(i);
      for (std::size_t k = 0; k < a.cols; ++k) {
        const double* brow = b.row_ptr(k);
        double acc = 0.0;
        for (std::size_t j = 0; j < b.cols; ++j) acc += grow[j] * brow[j];
        garow[k] = acc;
      }
    }
  }
  if (grad_b) {
    *grad_b = DenseMatrix::zeros(b.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
      const double* arow = a.row_ptr(i);
      const double* grow = grad_out.row_ptr(i);
      for (std::size_t k = 0; k < a.cols; ++k) {
        const double aik = arow[k];
        if (aik == 0.0) continue;
        double* gbrow = grad_b->row_ptr(k);
        for (std::size_t j = 0; j < b.cols; ++j) gbrow[j] += aik * grow[j];
      }
    }
  }
}

// Row-wise softmax with temperature, max-subtracted for overflow safety.
inline DenseMatrix softmax_rows(const DenseMatrix& x, double temperature) {
  if (!(temperature > 0.0))
    throw std::domain_error("softmax_rows: temperature must be positive");
  DenseMatrix y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* xi = x.row_ptr(i);
    double* yi = y.row_ptr(i);
    double mx = -INFINITY;
    for (std::size_t j = 0; j < x.cols; ++j)
      mx = std::max(mx, xi[j] / temperature);
    double sum = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
      yi[j] = std::exp(xi[j] / temperature - mx);
      sum += yi[j];
    }
    for (std::size_t j = 0; j < x.cols; ++j) yi[j] /= sum;
  }
  return y;
}

// Backward of y = softmax_rows(x, tau) given y and dL/dy:
// dL/dx_j = y_j * (g_j - sum_k g_k y_k) / tau.
inline DenseMatrix softmax_rows_backward(const DenseMatrix& y,
                                         const DenseMatrix& grad_out,
                                         double temperature) {
  if (!y.same_shape(grad_out))
    throw std::invalid_argument("softmax_rows_backward: shape mismatch");
  DenseMatrix gx(y.rows, y.cols);
  for (std::size_t i = 0; i < y.rows; ++i) {
    const double* yi = y.row_ptr(i);
    const double* gi = grad_out.row_ptr(i);
    double* oi = gx.row_ptr(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < y.cols; ++j) dot += gi[j] * yi[j];
    for (std::size_t j = 0; j < y.cols; ++j)
      oi[j] = yi[j] * (gi[j] - dot) / temperature;
  }
  return gx;
}

inline DenseMatrix relu(const DenseMatrix& x) {
  DenseMatrix y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i)
    y.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
  return y;
}

inline DenseMatrix relu_backward(const DenseMatrix& x,
                                 const DenseMatrix& grad_out) {
  DenseMatrix gx(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i)
    gx.data[i] = x.data[i] > 0.0 ? grad_out.data[i] : 0.0;
  return gx;
}

}  // namespace nvae
