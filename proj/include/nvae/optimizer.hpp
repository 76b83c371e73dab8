#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvae/matrix.hpp"

namespace nvae {

struct ScheduleState {
  std::uint64_t global_step = 0;
  std::uint64_t steps_per_epoch = 0;
  double lr = 0.0;
  double tau = 1.0;
};

// Adam first/second moment accumulators, one pair per parameter tensor.
struct AdamState {
  std::vector<DenseMatrix> m;
  std::vector<DenseMatrix> v;
  std::uint64_t t = 0;

  template <typename Refs>
  static AdamState like(const Refs& refs) {
    AdamState s;
    for (const auto& ref : refs) {
      s.m.emplace_back(ref.tensor->rows, ref.tensor->cols, 0.0);
      s.v.emplace_back(ref.tensor->rows, ref.tensor->cols, 0.0);
    }
    return s;
  }
};

struct AdamHyper {
  double beta1 = 0.0;
  double beta2 = 0.99;
  double eps = 1e-8;
};

// One Adam update over an aligned (params, grads) list. Non-trainable refs
// get zero gradients from backward, so they advance their (zero) moments
// without moving. Throws on any non-finite gradient; the message carries the
// tensor name and flat index for the abort dump.
template <typename Refs>
inline void adam_step(AdamState& state, Refs& refs,
                      const std::vector<DenseMatrix>& grads, double lr,
                      const AdamHyper& hp = {}) {
  if (state.m.size() != refs.size() || grads.size() != refs.size())
    throw std::invalid_argument("adam_step: state/grads misaligned");
  ++state.t;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.t));
  for (std::size_t p = 0; p < refs.size(); ++p) {
    DenseMatrix& param = *refs[p].tensor;
    const DenseMatrix& g = grads[p];
    if (!param.same_shape(g))
      throw std::invalid_argument("adam_step: grad shape mismatch for " +
                                  refs[p].name);
    DenseMatrix& m = state.m[p];
    DenseMatrix& v = state.v[p];
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double gi = g.data[i];
      if (!std::isfinite(gi))
        throw std::runtime_error("adam_step: non-finite gradient in " +
                                 refs[p].name + " at index " +
                                 std::to_string(i));
      m.data[i] = hp.beta1 * m.data[i] + (1.0 - hp.beta1) * gi;
      v.data[i] = hp.beta2 * v.data[i] + (1.0 - hp.beta2) * gi * gi;
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      param.data[i] -= lr * mhat / (std::sqrt(vhat) + hp.eps);
    }
  }
}

}  // namespace nvae
