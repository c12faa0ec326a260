#pragma once

#include <cstdint>
#include <vector>

#include "core/mlp.hpp"
#include "core/rng.hpp"
#include "core/schedule.hpp"
#include "core/score_model.hpp"
#include "core/tensor.hpp"

namespace sitcom {

struct TrainBatch {
  Tensor x0;               // [B, d]
  std::vector<int> times;  // B entries in 1..T
  Tensor noises;           // [B, d]
};

// Draw order per row: data index, time, then the d noise values.
TrainBatch sample_train_batch(const Tensor& data, std::size_t batch, const NoiseSchedule& sched, Rng& rng);

// Diffused inputs sqrt(ab_t) x0 + sqrt(1 - ab_t) noise, row by row.
Tensor diffused_inputs(const TrainBatch& batch, const NoiseSchedule& sched);

// (1/B) sum_b |noise_b - eps(x_t_b, t_b)|^2
double dsm_loss(const ScoreModel& model, const TrainBatch& batch, const NoiseSchedule& sched);

struct TrainOptions {
  int iters = 2000;
  std::size_t batch = 128;
  double lr = 1e-3;
  double final_lr_fraction = 1.0;  // lr decays linearly to lr * this
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<double> loss_curve;  // one entry per iteration
};

// Adam on all weights. Deterministic given the seed. Throws kNumeric naming
// the iteration when the loss or any intermediate becomes non-finite.
TrainResult train_score_model(MlpScoreModel& model, const Tensor& data, const NoiseSchedule& sched,
                              const TrainOptions& opts);

}  // namespace sitcom
