#pragma once

#include <cstddef>
#include <span>

#include "core/autodiff.hpp"
#include "core/schedule.hpp"
#include "core/tensor.hpp"

namespace sitcom {

// Noise predictor eps(x, t). The score is the derived quantity
// s(x, t) = -eps(x, t) / sqrt(1 - alpha_bar_t).
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;

  virtual std::size_t dim() const = 0;
  virtual bool differentiable_input() const { return true; }

  // x is [d] or [B, d]; `times` holds one shared time or one per row.
  // Output has the shape of x.
  virtual ad::Var eps(ad::Graph& g, ad::Var x, std::span<const int> times) const = 0;

  ad::Var eps(ad::Graph& g, ad::Var x, int t) const {
    const int ts[1] = {t};
    return eps(g, x, ts);
  }

  Tensor eps(const Tensor& x, int t) const {
    ad::Graph g;
    return eps(g, g.constant(x), t).value();
  }

  Tensor score(const Tensor& x, int t, const NoiseSchedule& sched) const;
};

// eps == 0 everywhere.
class ZeroScoreModel final : public ScoreModel {
 public:
  explicit ZeroScoreModel(std::size_t dim) : dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  ad::Var eps(ad::Graph& g, ad::Var x, std::span<const int> times) const override;
  using ScoreModel::eps;

 private:
  std::size_t dim_;
};

// Checks that x is [d] or [B, d] with d == model dim and that `times` is
// shared or per-row. Returns the batch size (1 for [d]).
std::size_t check_model_input(const ScoreModel& model, const Tensor& x, std::span<const int> times);

}  // namespace sitcom
