#include "core/mlp.hpp"

#include <cmath>
#include <numbers>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace sitcom {

namespace {

std::vector<std::pair<std::size_t, std::size_t>> layer_dims(const MlpConfig& c) {
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  std::size_t in = c.dim + 2 * c.frequencies;
  for (std::size_t l = 0; l < c.layers; ++l) {
    dims.emplace_back(in, c.hidden);
    in = c.hidden;
  }
  dims.emplace_back(in, c.dim);
  return dims;
}

void validate(const MlpConfig& c) {
  require(c.dim >= 1 && c.hidden >= 1 && c.T >= 1, "mlp: dim, hidden and T must be positive");
}

}  // namespace

MlpScoreModel::MlpScoreModel(const MlpConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate(cfg_);
  Rng rng(seed, StreamRole::kModelInit);
  const auto dims = layer_dims(cfg_);
  for (std::size_t l = 0; l < dims.size(); ++l) {
    const auto [in, out] = dims[l];
    Tensor w({in, out});
    const bool last = l + 1 == dims.size();
    const double sd = (last && cfg_.zero_final) ? 0.0 : 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& v : w.data()) v = sd * rng.normal();
    params_.push_back(std::move(w));
    params_.emplace_back(Shape{out}, 0.0);
  }
}

MlpScoreModel::MlpScoreModel(const MlpConfig& cfg, std::vector<Tensor> params)
    : cfg_(cfg), params_(std::move(params)) {
  validate(cfg_);
  const auto dims = layer_dims(cfg_);
  if (params_.size() != 2 * dims.size())
    fail(ErrorCode::kShapeMismatch, "mlp: expected " + std::to_string(2 * dims.size()) + " weight arrays, got " +
                                        std::to_string(params_.size()));
  for (std::size_t l = 0; l < dims.size(); ++l) {
    const Shape ws{dims[l].first, dims[l].second}, bs{dims[l].second};
    if (params_[2 * l].shape() != ws || params_[2 * l + 1].shape() != bs)
      fail(ErrorCode::kShapeMismatch, "mlp: layer " + std::to_string(l) + " has shapes " +
                                          shape_str(params_[2 * l].shape()) + ", " +
                                          shape_str(params_[2 * l + 1].shape()) + "; expected " +
                                          shape_str(ws) + ", " + shape_str(bs));
  }
}

std::vector<std::string> MlpScoreModel::param_names(const MlpConfig& cfg) {
  std::vector<std::string> names;
  for (std::size_t l = 0; l <= cfg.layers; ++l) {
    names.push_back("layer" + std::to_string(l) + ".weight");
    names.push_back("layer" + std::to_string(l) + ".bias");
  }
  return names;
}

Tensor MlpScoreModel::embedding(std::span<const int> times, std::size_t batch) const {
  const std::size_t F = cfg_.frequencies;
  Tensor emb({batch, 2 * F});
  for (std::size_t b = 0; b < batch; ++b) {
    const int t = times.size() == 1 ? times[0] : times[b];
    const double tau = static_cast<double>(t) / cfg_.T;
    for (std::size_t k = 0; k < F; ++k) {
      const double w = std::numbers::pi * std::ldexp(1.0, static_cast<int>(k));
      emb[b * 2 * F + k] = std::sin(w * tau);
      emb[b * 2 * F + F + k] = std::cos(w * tau);
    }
  }
  return emb;
}

ad::Var MlpScoreModel::forward(ad::Graph& g, ad::Var x, std::span<const int> times,
                               std::span<const ad::Var> weights) const {
  const std::size_t batch = check_model_input(*this, x.value(), times);
  if (weights.size() != params_.size())
    fail(ErrorCode::kInvalidArgument, "mlp: wrong number of weight nodes");
  const bool flat = x.value().rank() == 1;
  ad::Var h = flat ? ad::reshape(x, {1, cfg_.dim}) : x;
  if (cfg_.frequencies > 0) h = ad::concat_cols(h, g.constant(embedding(times, batch)));
  const std::size_t L = weights.size() / 2;
  for (std::size_t l = 0; l < L; ++l) {
    h = ad::affine(h, weights[2 * l], weights[2 * l + 1]);
    if (l + 1 < L) h = ad::silu(h);
  }
  return flat ? ad::reshape(h, {cfg_.dim}) : h;
}

ad::Var MlpScoreModel::eps(ad::Graph& g, ad::Var x, std::span<const int> times) const {
  std::vector<ad::Var> w;
  w.reserve(params_.size());
  for (const auto& p : params_) w.push_back(g.constant(p));
  return forward(g, x, times, w);
}

Checkpoint MlpScoreModel::to_checkpoint() const {
  Checkpoint c;
  c.meta["model"] = "mlp";
  c.meta["dim"] = std::to_string(cfg_.dim);
  c.meta["hidden"] = std::to_string(cfg_.hidden);
  c.meta["layers"] = std::to_string(cfg_.layers);
  c.meta["frequencies"] = std::to_string(cfg_.frequencies);
  c.meta["T"] = std::to_string(cfg_.T);
  const auto names = param_names(cfg_);
  for (std::size_t i = 0; i < params_.size(); ++i) c.arrays.emplace_back(names[i], params_[i]);
  return c;
}

MlpScoreModel MlpScoreModel::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.meta.count("model") == 0 || ckpt.meta_value("model") != "mlp")
    fail(ErrorCode::kIo, "checkpoint does not hold an mlp model");
  auto num = [&](const char* key) -> long long {
    const std::string& v = ckpt.meta_value(key);
    try {
      std::size_t used = 0;
      const long long n = std::stoll(v, &used);
      if (used != v.size() || n < 0) throw std::invalid_argument(v);
      return n;
    } catch (const std::exception&) {
      fail(ErrorCode::kIo, std::string("checkpoint: bad meta value for ") + key);
    }
  };
  MlpConfig cfg;
  cfg.dim = static_cast<std::size_t>(num("dim"));
  cfg.hidden = static_cast<std::size_t>(num("hidden"));
  cfg.layers = static_cast<std::size_t>(num("layers"));
  cfg.frequencies = static_cast<std::size_t>(num("frequencies"));
  cfg.T = static_cast<int>(num("T"));
  std::vector<Tensor> params;
  for (const auto& name : param_names(cfg)) params.push_back(ckpt.array(name));
  return MlpScoreModel(cfg, std::move(params));
}

}  // namespace sitcom
