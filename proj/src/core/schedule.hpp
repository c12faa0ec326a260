#pragma once

#include <span>
#include <vector>

namespace sitcom {

// beta_t, alpha_t = 1 - beta_t and alpha_bar_t = prod_{j<=t} alpha_j for
// t = 1..T, with the convention alpha_bar_0 = 1.
class NoiseSchedule {
 public:
  // beta_t = beta_min + (t-1)(beta_max - beta_min)/(T-1)
  static NoiseSchedule linear(int T, double beta_min, double beta_max);
  static NoiseSchedule from_betas(std::vector<double> betas);

  int T() const noexcept { return static_cast<int>(betas_.size()); }
  double beta(int t) const;
  double alpha(int t) const { return 1.0 - beta(t); }
  double alpha_bar(int t) const;
  // VP -> variance-exploding noise level: sqrt((1 - alpha_bar) / alpha_bar).
  double sigma(int t) const;
  // Schedule index in [0, T] whose sigma is closest to `s`.
  int nearest_index(double s) const;

  std::span<const double> alpha_bars() const noexcept { return alpha_bar_; }

 private:
  explicit NoiseSchedule(std::vector<double> betas);

  std::vector<double> betas_;
  std::vector<double> alpha_bar_;  // size T + 1
};

// Sampler index i in {1..N} maps to schedule time t_i = i * floor(T/N).
struct StepIndex {
  int i = 0;
  int t = 0;
  int t_prev = 0;  // time of index i - 1
};

// Steps in execution order i = N, N-1, ..., 1.
std::vector<StepIndex> sampler_steps(int N, int T);

}  // namespace sitcom
