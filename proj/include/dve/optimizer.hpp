#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dve/errors.hpp"
#include "dve/tensor.hpp"

namespace dve {

struct RmsPropConfig {
  double learning_rate = 0.01;
  double decay = 0.9;
  double epsilon = 1e-8;
};

struct RmsPropState {
  std::vector<Tensor> cache;  // running mean of squared gradients

  static RmsPropState like(const std::vector<Tensor*>& params) {
    RmsPropState s;
    s.cache.reserve(params.size());
    for (const Tensor* p : params) s.cache.emplace_back(p->rows, p->cols);
    return s;
  }
};

// In-place RMSProp update:
//   cache <- decay * cache + (1 - decay) * g^2
//   theta <- theta - lr * g / (sqrt(cache) + eps)
// Rejects non-finite gradients before touching any parameter.
inline void rmsprop_step(const std::vector<Tensor*>& params,
                         const std::vector<Tensor>& grads, RmsPropState& state,
                         const RmsPropConfig& cfg) {
  require(params.size() == grads.size() && params.size() == state.cache.size(),
          "rmsprop: parameter, gradient, and state counts differ");
  for (std::size_t p = 0; p < params.size(); ++p) {
    require(params[p]->same_shape(grads[p]), "rmsprop: gradient shape mismatch");
    if (!grads[p].all_finite()) {
      throw NumericError("non-finite gradient for parameter " + std::to_string(p));
    }
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& theta = *params[p];
    Tensor& cache = state.cache[p];
    const Tensor& g = grads[p];
    for (std::int64_t i = 0; i < theta.size(); ++i) {
      cache.data[i] = cfg.decay * cache.data[i] + (1.0 - cfg.decay) * g.data[i] * g.data[i];
      theta.data[i] -= cfg.learning_rate * g.data[i] / (std::sqrt(cache.data[i]) + cfg.epsilon);
    }
  }
}

inline double global_grad_norm(const std::vector<Tensor>& grads) {
  double s = 0.0;
  for (const Tensor& g : grads) {
    for (double v : g.data) s += v * v;
  }
  return std::sqrt(s);
}

}  // namespace dve
