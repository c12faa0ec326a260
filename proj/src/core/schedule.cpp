#include "core/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "core/error.hpp"

namespace sitcom {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  require(!betas_.empty(), "noise schedule: T must be >= 1");
  alpha_bar_.resize(betas_.size() + 1);
  alpha_bar_[0] = 1.0;
  for (std::size_t t = 1; t <= betas_.size(); ++t) {
    const double b = betas_[t - 1];
    require(b > 0.0 && b < 1.0, "noise schedule: beta_" + std::to_string(t) + " = " +
                                    std::to_string(b) + " outside (0, 1)");
    alpha_bar_[t] = alpha_bar_[t - 1] * (1.0 - b);
  }
}

NoiseSchedule NoiseSchedule::linear(int T, double beta_min, double beta_max) {
  require(T >= 1, "noise schedule: T must be >= 1");
  require(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0,
          "noise schedule: need 0 < beta_min <= beta_max < 1");
  std::vector<double> betas(static_cast<std::size_t>(T));
  for (int t = 1; t <= T; ++t) {
    betas[t - 1] = T == 1 ? beta_min : beta_min + (t - 1) * (beta_max - beta_min) / (T - 1);
  }
  return NoiseSchedule(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  return NoiseSchedule(std::move(betas));
}

double NoiseSchedule::beta(int t) const {
  require(t >= 1 && t <= T(), "noise schedule: beta index " + std::to_string(t) + " outside [1, T]");
  return betas_[t - 1];
}

double NoiseSchedule::alpha_bar(int t) const {
  require(t >= 0 && t <= T(), "noise schedule: time " + std::to_string(t) + " outside [0, T]");
  return alpha_bar_[t];
}

double NoiseSchedule::sigma(int t) const {
  const double ab = alpha_bar(t);
  return std::sqrt((1.0 - ab) / ab);
}

int NoiseSchedule::nearest_index(double s) const {
  // sigma is increasing in t
  int lo = 0, hi = T();
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    (sigma(mid) < s ? lo : hi) = mid;
  }
  return std::abs(sigma(lo) - s) <= std::abs(sigma(hi) - s) ? lo : hi;
}

std::vector<StepIndex> sampler_steps(int N, int T) {
  require(N >= 1, "sampler: N must be >= 1");
  require(N <= T, "sampler: N = " + std::to_string(N) + " exceeds T = " + std::to_string(T));
  const int dt = T / N;
  std::vector<StepIndex> steps;
  steps.reserve(static_cast<std::size_t>(N));
  for (int i = N; i >= 1; --i) steps.push_back({i, i * dt, (i - 1) * dt});
  return steps;
}

}  // namespace sitcom
