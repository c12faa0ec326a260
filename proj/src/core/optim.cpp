#include "core/optim.hpp"

#include <cmath>

#include "core/error.hpp"

namespace sitcom {

void adam_step(AdamState& s, const Tensor& grad, Tensor& var, double gamma) {
  check_same_shape(grad, var, "adam_step");
  if (s.step == 0 || s.m.shape() != var.shape()) {
    s.m = Tensor(var.shape(), 0.0);
    s.v = Tensor(var.shape(), 0.0);
    s.step = 0;
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < var.size(); ++i) {
    const double g = grad[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    var[i] -= gamma * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + s.eps);
  }
}

void gd_step(const Tensor& grad, Tensor& var, double gamma) {
  check_same_shape(grad, var, "gd_step");
  for (std::size_t i = 0; i < var.size(); ++i) var[i] -= gamma * grad[i];
}

}  // namespace sitcom
