#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "maint/tensor.hpp"

namespace maint {

// A trainable tensor together with its gradient and Adam state.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  long step_count = 0;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(Tensor::zeros_like(value)),
        adam_m(Tensor::zeros_like(value)),
        adam_v(Tensor::zeros_like(value)) {}

  void zero_grad() { grad.fill(0.0); }
};

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One Adam update with bias correction, applied per parameter.
inline void adam_step(const std::vector<Parameter*>& params, const AdamConfig& cfg) {
  for (Parameter* p : params) {
    p->step_count += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p->step_count));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p->step_count));
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double g = p->grad[k];
      p->adam_m[k] = cfg.beta1 * p->adam_m[k] + (1.0 - cfg.beta1) * g;
      p->adam_v[k] = cfg.beta2 * p->adam_v[k] + (1.0 - cfg.beta2) * g * g;
      const double mhat = p->adam_m[k] / bc1;
      const double vhat = p->adam_v[k] / bc2;
      p->value[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

inline double l2_penalty_value(const std::vector<Parameter*>& params) {
  double acc = 0.0;
  for (const Parameter* p : params)
    for (std::size_t k = 0; k < p->value.size(); ++k) acc += p->value[k] * p->value[k];
  return acc;
}

}  // namespace maint
