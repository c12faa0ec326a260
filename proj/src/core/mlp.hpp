#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/score_model.hpp"

namespace sitcom {

struct MlpConfig {
  std::size_t dim = 2;
  std::size_t hidden = 128;
  std::size_t layers = 3;       // hidden layers
  std::size_t frequencies = 8;  // sin/cos pairs of the time embedding
  int T = 1000;                 // times enter as t / T
  bool zero_final = false;      // output layer starts at exactly zero
};

// eps(x, t) = MLP([x, emb(t/T)]) with SiLU activations.
// emb(tau) = [sin(pi 2^k tau), cos(pi 2^k tau)]_{k < frequencies}.
class MlpScoreModel final : public ScoreModel {
 public:
  MlpScoreModel(const MlpConfig& cfg, std::uint64_t seed);
  MlpScoreModel(const MlpConfig& cfg, std::vector<Tensor> params);

  std::size_t dim() const override { return cfg_.dim; }
  ad::Var eps(ad::Graph& g, ad::Var x, std::span<const int> times) const override;
  using ScoreModel::eps;

  // Same forward pass with caller-provided weight nodes (for training).
  ad::Var forward(ad::Graph& g, ad::Var x, std::span<const int> times, std::span<const ad::Var> weights) const;

  const MlpConfig& config() const noexcept { return cfg_; }
  const std::vector<Tensor>& params() const noexcept { return params_; }
  std::vector<Tensor>& params() noexcept { return params_; }
  static std::vector<std::string> param_names(const MlpConfig& cfg);

  Checkpoint to_checkpoint() const;
  static MlpScoreModel from_checkpoint(const Checkpoint& ckpt);

 private:
  Tensor embedding(std::span<const int> times, std::size_t batch) const;

  MlpConfig cfg_;
  std::vector<Tensor> params_;  // w0, b0, w1, b1, ...
};

}  // namespace sitcom
