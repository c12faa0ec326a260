#include "core/diffusion.hpp"

#include <cmath>
#include <string>

#include "core/error.hpp"

namespace sitcom {

Tensor forward_diffuse(const Tensor& x0, int t, const Tensor& eta, const NoiseSchedule& sched) {
  const double ab = sched.alpha_bar(t);
  return lincomb(std::sqrt(ab), x0, std::sqrt(1.0 - ab), eta);
}

ad::Var tweedie(ad::Graph& g, ad::Var x, int t, const ScoreModel& model, const NoiseSchedule& sched) {
  const double ab = sched.alpha_bar(t);
  if (t == 0) return x;
  ad::Var eps = model.eps(g, x, t);
  return ad::scale(ad::sub(x, ad::scale(eps, std::sqrt(1.0 - ab))), 1.0 / std::sqrt(ab));
}

Tensor tweedie_denoise(const Tensor& x_t, int t, const ScoreModel& model, const NoiseSchedule& sched) {
  ad::Graph g;
  return tweedie(g, g.constant(x_t), t, model, sched).value();
}

Tensor ddpm_reverse_step(const Tensor& x_t, int t, const Tensor& xhat0, const Tensor& eta,
                         const NoiseSchedule& sched) {
  if (t < 1) fail(ErrorCode::kInvalidArgument, "ddpm_reverse_step: no step below t = 0");
  const double b = sched.beta(t);
  const double ab = sched.alpha_bar(t);
  const double ab_prev = sched.alpha_bar(t - 1);
  const double cx = std::sqrt(1.0 - b) * (1.0 - ab_prev) / (1.0 - ab);
  const double c0 = std::sqrt(ab_prev) * b / (1.0 - ab);
  Tensor out = lincomb(cx, x_t, c0, xhat0);
  check_same_shape(out, eta, "ddpm_reverse_step");
  const double s = std::sqrt(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * eta[i];
  return out;
}

Tensor score_reverse_step(const Tensor& x_t, int t, const Tensor& score, const Tensor& eta,
                          const NoiseSchedule& sched) {
  const double b = sched.beta(t);
  Tensor out = lincomb(1.0 / std::sqrt(1.0 - b), x_t, b / std::sqrt(1.0 - b), score);
  check_same_shape(out, eta, "score_reverse_step");
  const double s = std::sqrt(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * eta[i];
  return out;
}

Tensor ddpm_strided_step(const Tensor& x_t, int t, int t_prev, const Tensor& xhat0,
                         const Tensor& eta, const NoiseSchedule& sched) {
  require(t_prev >= 0 && t_prev < t, "ddpm_strided_step: need 0 <= t_prev < t");
  const double ab = sched.alpha_bar(t);
  const double ab_prev = sched.alpha_bar(t_prev);
  const double a = ab / ab_prev;
  const double b = 1.0 - a;
  const double cx = std::sqrt(a) * (1.0 - ab_prev) / (1.0 - ab);
  const double c0 = std::sqrt(ab_prev) * b / (1.0 - ab);
  const double s = std::sqrt(b * (1.0 - ab_prev) / (1.0 - ab));
  Tensor out = lincomb(cx, x_t, c0, xhat0);
  check_same_shape(out, eta, "ddpm_strided_step");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * eta[i];
  return out;
}

Tensor resample(const Tensor& xhat0, int t_minus_1, const Tensor& eta, const NoiseSchedule& sched) {
  if (t_minus_1 == 0) return xhat0;
  return forward_diffuse(xhat0, t_minus_1, eta, sched);
}

Tensor pf_ode_denoise(const Tensor& v_t, int t, const ScoreModel& model, const NoiseSchedule& sched,
                      int n_ode) {
  require(n_ode >= 1, "pf_ode_denoise: n_ode must be >= 1");
  const double ab_t = sched.alpha_bar(t);
  if (t == 0) return v_t;

  const double sigma0 = sched.sigma(t);
  Tensor x = (1.0 / std::sqrt(ab_t)) * v_t;  // variance-exploding coordinates
  for (int j = 0; j < n_ode; ++j) {
    const double s_cur = sigma0 * (1.0 - static_cast<double>(j) / n_ode);
    const double s_next = sigma0 * (1.0 - static_cast<double>(j + 1) / n_ode);
    const int idx = j == 0 ? t : sched.nearest_index(s_cur);
    if (idx == 0) break;  // remaining interval has zero score weight
    const double ab = sched.alpha_bar(idx);
    const double s_idx = sched.sigma(idx);
    const Tensor denoised = tweedie_denoise(std::sqrt(ab) * x, idx, model, sched);
    // dx/dsigma = -sigma * score, score = (D - x) / sigma_idx^2
    const double coef = (s_next - s_cur) * s_cur / (s_idx * s_idx);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += coef * (x[i] - denoised[i]);
  }
  return x;
}

}  // namespace sitcom
