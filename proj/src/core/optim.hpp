#pragma once

#include <cstdint>

#include "core/tensor.hpp"

namespace sitcom {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  Tensor m;  // lazily shaped on the first step
  Tensor v;
};

// Bias-corrected Adam:
//   m = b1 m + (1-b1) g,  v = b2 v + (1-b2) g^2
//   var -= gamma * (m / (1 - b1^k)) / (sqrt(v / (1 - b2^k)) + eps)
void adam_step(AdamState& state, const Tensor& grad, Tensor& var, double gamma);

// var -= gamma * grad
void gd_step(const Tensor& grad, Tensor& var, double gamma);

}  // namespace sitcom
