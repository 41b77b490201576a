#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "maint/optim.hpp"
#include "maint/tensor.hpp"

namespace maint {

// Central-difference gradient estimate of f with respect to every coordinate
// of p. f must be deterministic (dropout off, fixed inputs). The parameter is
// restored to its original values afterwards.
inline Tensor finite_diff_gradient(const std::function<double()>& f, Parameter& p,
                                   double h = 1e-5) {
  Tensor out = Tensor::zeros_like(p.value);
  for (std::size_t k = 0; k < p.value.size(); ++k) {
    const double orig = p.value[k];
    p.value[k] = orig + h;
    const double fp = f();
    p.value[k] = orig - h;
    const double fm = f();
    p.value[k] = orig;
    out[k] = (fp - fm) / (2.0 * h);
  }
  return out;
}

// Relative error with the floor used across the gradient checks.
inline double rel_err(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

}  // namespace maint
