#pragma once

#include "core/autodiff.hpp"
#include "core/schedule.hpp"
#include "core/score_model.hpp"
#include "core/tensor.hpp"

namespace sitcom {

// sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eta, for 0 <= t <= T.
Tensor forward_diffuse(const Tensor& x0, int t, const Tensor& eta, const NoiseSchedule& sched);

// Tweedie-network denoiser f(x; t) = (x - sqrt(1 - ab_t) eps(x, t)) / sqrt(ab_t).
ad::Var tweedie(ad::Graph& g, ad::Var x, int t, const ScoreModel& model, const NoiseSchedule& sched);
Tensor tweedie_denoise(const Tensor& x_t, int t, const ScoreModel& model, const NoiseSchedule& sched);

// One ancestral step t -> t-1 written through the clean estimate:
//   sqrt(a_t)(1 - ab_{t-1})/(1 - ab_t) x_t + sqrt(ab_{t-1}) b_t/(1 - ab_t) xhat0 + sqrt(b_t) eta
Tensor ddpm_reverse_step(const Tensor& x_t, int t, const Tensor& xhat0, const Tensor& eta,
                         const NoiseSchedule& sched);

// The same step in score form: (x_t + b_t s) / sqrt(1 - b_t) + sqrt(b_t) eta.
Tensor score_reverse_step(const Tensor& x_t, int t, const Tensor& score, const Tensor& eta,
                          const NoiseSchedule& sched);

// Strided ancestral step t -> t_prev < t. Uses a = ab_t/ab_prev, b = 1 - a in
// place of (alpha_t, beta_t) and the posterior noise scale
// sqrt(b (1 - ab_prev)/(1 - ab_t)), which vanishes when t_prev = 0.
Tensor ddpm_strided_step(const Tensor& x_t, int t, int t_prev, const Tensor& xhat0,
                         const Tensor& eta, const NoiseSchedule& sched);

// sqrt(ab_{t-1}) xhat0 + sqrt(1 - ab_{t-1}) eta. Exact identity at t_minus_1 = 0.
Tensor resample(const Tensor& xhat0, int t_minus_1, const Tensor& eta, const NoiseSchedule& sched);

// Probability-flow ODE from VP time t down to 0 with n_ode Euler steps in
// sigma = sqrt((1-ab)/ab), sigma decreasing linearly. The score at each
// node comes from eps at the schedule index nearest to that sigma. With
// n_ode = 1 this equals tweedie_denoise(v_t, t).
Tensor pf_ode_denoise(const Tensor& v_t, int t, const ScoreModel& model, const NoiseSchedule& sched,
                      int n_ode);

}  // namespace sitcom
