#include "core/training.hpp"

#include <cmath>
#include <string>

#include "core/error.hpp"
#include "core/optim.hpp"

namespace sitcom {

TrainBatch sample_train_batch(const Tensor& data, std::size_t batch, const NoiseSchedule& sched, Rng& rng) {
  require(data.rank() == 2 && data.dim(0) >= 1, "training data must be [M, d] with M >= 1");
  require(batch >= 1, "batch size must be >= 1");
  const std::size_t M = data.dim(0), d = data.dim(1);
  TrainBatch b{Tensor({batch, d}), std::vector<int>(batch), Tensor({batch, d})};
  for (std::size_t r = 0; r < batch; ++r) {
    const auto idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(M) - 1));
    b.times[r] = rng.uniform_int(1, sched.T());
    for (std::size_t j = 0; j < d; ++j) {
      b.x0[r * d + j] = data[idx * d + j];
      b.noises[r * d + j] = rng.normal();
    }
  }
  return b;
}

Tensor diffused_inputs(const TrainBatch& batch, const NoiseSchedule& sched) {
  check_same_shape(batch.x0, batch.noises, "diffused_inputs");
  require(batch.x0.rank() == 2 && batch.times.size() == batch.x0.dim(0), "diffused_inputs: batch dimensions disagree");
  const std::size_t B = batch.x0.dim(0), d = batch.x0.dim(1);
  Tensor out({B, d});
  for (std::size_t r = 0; r < B; ++r) {
    const double ab = sched.alpha_bar(batch.times[r]);
    const double a = std::sqrt(ab), s = std::sqrt(1.0 - ab);
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = a * batch.x0[r * d + j] + s * batch.noises[r * d + j];
  }
  return out;
}

namespace {

ad::Var loss_node(ad::Graph& g, ad::Var pred, const Tensor& noises) {
  const double inv_b = 1.0 / static_cast<double>(noises.dim(0));
  return ad::scale(ad::squared_norm(ad::sub(pred, g.constant(noises))), inv_b);
}

}  // namespace

double dsm_loss(const ScoreModel& model, const TrainBatch& batch, const NoiseSchedule& sched) {
  ad::Graph g;
  const ad::Var pred = model.eps(g, g.constant(diffused_inputs(batch, sched)), batch.times);
  return loss_node(g, pred, batch.noises).value().item();
}

TrainResult train_score_model(MlpScoreModel& model, const Tensor& data, const NoiseSchedule& sched,
                              const TrainOptions& opts) {
  require(opts.iters >= 0, "train: iters must be >= 0");
  require(opts.lr > 0.0 && opts.final_lr_fraction > 0.0, "train: learning rate must be positive");
  require(data.rank() == 2 && data.dim(1) == model.dim(),
          "train: data shape " + shape_str(data.shape()) + " does not match model dimension");
  TrainResult result;
  result.loss_curve.reserve(static_cast<std::size_t>(opts.iters));
  Rng rng(opts.seed, StreamRole::kTrainBatch);
  auto& params = model.params();
  std::vector<AdamState> adam(params.size());

  for (int it = 0; it < opts.iters; ++it) {
    const TrainBatch batch = sample_train_batch(data, opts.batch, sched, rng);
    ad::Graph g;
    std::vector<ad::Var> w;
    w.reserve(params.size());
    for (const auto& p : params) w.push_back(g.input(p));
    double loss = 0.0;
    std::vector<Tensor> grads;
    try {
      const ad::Var pred = model.forward(g, g.constant(diffused_inputs(batch, sched)), batch.times, w);
      const ad::Var l = loss_node(g, pred, batch.noises);
      loss = l.value().item();
      grads = g.backward(l, w);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNumeric) throw;
      fail(ErrorCode::kNumeric, "training diverged at iteration " + std::to_string(it) + ": " + e.what());
    }
    for (const auto& gr : grads)
      if (!gr.all_finite()) fail(ErrorCode::kNumeric, "training diverged at iteration " + std::to_string(it) + ": non-finite gradient");
    result.loss_curve.push_back(loss);

    const double frac = opts.iters > 1 ? static_cast<double>(it) / (opts.iters - 1) : 0.0;
    const double lr = opts.lr * (1.0 - frac * (1.0 - opts.final_lr_fraction));
    for (std::size_t k = 0; k < params.size(); ++k) adam_step(adam[k], grads[k], params[k], lr);
  }
  return result;
}

}  // namespace sitcom
