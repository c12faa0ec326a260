#include "core/score_model.hpp"

#include <cmath>
#include <string>

#include "core/error.hpp"

namespace sitcom {

Tensor ScoreModel::score(const Tensor& x, int t, const NoiseSchedule& sched) const {
  const double ab = sched.alpha_bar(t);
  require(ab < 1.0, "score: undefined at alpha_bar = 1 (t = 0)");
  return (-1.0 / std::sqrt(1.0 - ab)) * eps(x, t);
}

ad::Var ZeroScoreModel::eps(ad::Graph& /*g*/, ad::Var x, std::span<const int> times) const {
  check_model_input(*this, x.value(), times);
  return ad::scale(x, 0.0);
}

std::size_t check_model_input(const ScoreModel& model, const Tensor& x, std::span<const int> times) {
  const bool flat = x.rank() == 1;
  if (!(flat || x.rank() == 2) || x.shape().back() != model.dim()) {
    fail(ErrorCode::kShapeMismatch, "score model: input shape " + shape_str(x.shape()) +
                                        " incompatible with model dimension " +
                                        std::to_string(model.dim()));
  }
  const std::size_t batch = flat ? 1 : x.dim(0);
  if (times.size() != 1 && times.size() != batch) {
    fail(ErrorCode::kShapeMismatch, "score model: " + std::to_string(times.size()) +
                                        " times for batch of " + std::to_string(batch));
  }
  return batch;
}

}  // namespace sitcom
