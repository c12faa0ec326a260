#pragma once

#include <cstdint>
#include <random>

#include "core/tensor.hpp"

namespace sitcom {

// Each consumer of randomness owns one stream derived from (seed, role), so
// reordering work in one role never shifts the draws seen by another.
enum class StreamRole : std::uint32_t {
  kInitNoise = 1,     // x_N
  kStepNoise = 2,     // per-step eta, drawn once per sampler step
  kTrainBatch = 3,    // training: data indices, times, noises
  kModelInit = 4,     // network weight initialization
  kMeasurement = 5,   // measurement noise
  kOperator = 6,      // random masks, kernels
  kDataset = 7,       // dataset draws
};

class Rng {
 public:
  Rng(std::uint64_t seed, StreamRole role);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  // Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);
  std::uint64_t next_u64() { return engine_(); }

  Tensor normal_tensor(const Shape& shape);
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Seed for sub-run j of a family seeded by `base` (best-of-k, repetitions).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace sitcom
