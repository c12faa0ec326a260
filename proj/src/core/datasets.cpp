#include "core/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "core/error.hpp"

namespace sitcom {

std::vector<std::string> dataset_kinds() {
  return {"gmm-2d", "blobs-8x8", "blobs-16x16", "gaussian-field", "gmm-blobs"};
}

namespace {

std::string kinds_list() {
  std::string s;
  for (const auto& k : dataset_kinds()) s += (s.empty() ? "" : ", ") + k;
  return s;
}

GmmPrior default_gmm_2d() {
  // four well-separated modes on a diamond
  std::vector<Tensor> mu{Tensor::vector({1.0, 0.0}), Tensor::vector({-1.0, 0.0}), Tensor::vector({0.0, 1.0}),
                         Tensor::vector({0.0, -1.0})};
  std::vector<Tensor> var(4, Tensor::vector({0.02, 0.02}));
  return GmmPrior({0.25, 0.25, 0.25, 0.25}, std::move(mu), std::move(var));
}

}  // namespace

Tensor blob_image(std::size_t side, int min_bumps, int max_bumps, Rng& rng) {
  require(side >= 2, "blobs: side must be >= 2");
  require(min_bumps >= 1 && max_bumps >= min_bumps, "blobs: need 1 <= min_bumps <= max_bumps");
  const int count = rng.uniform_int(min_bumps, max_bumps);
  const double L = static_cast<double>(side);
  Tensor img({side * side}, 0.0);
  for (int b = 0; b < count; ++b) {
    const double cr = rng.uniform() * (L - 1.0), cc = rng.uniform() * (L - 1.0);
    const double theta = std::numbers::pi * rng.uniform();
    const double s1 = L * (0.08 + 0.17 * rng.uniform()), s2 = L * (0.08 + 0.17 * rng.uniform());
    const double amp = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.5 + 0.5 * rng.uniform());
    const double ct = std::cos(theta), st = std::sin(theta);
    for (std::size_t r = 0; r < side; ++r)
      for (std::size_t c = 0; c < side; ++c) {
        const double dr = r - cr, dc = c - cc;
        const double u = ct * dr + st * dc, v = -st * dr + ct * dc;
        img[r * side + c] += amp * std::exp(-0.5 * (u * u / (s1 * s1) + v * v / (s2 * s2)));
      }
  }
  const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
  const double a = *lo, span = *hi - *lo;
  if (span <= 0.0) return Tensor({side * side}, 0.0);
  for (auto& v : img.data()) v = std::clamp(2.0 * (v - a) / span - 1.0, -1.0, 1.0);
  return img;
}

Dataset::Dataset(DatasetSpec spec) : spec_(std::move(spec)) {
  const std::string& k = spec_.kind;
  if (k == "gmm-2d") {
    if (!spec_.gmm_file.empty()) {
      prior_ = std::make_shared<GmmPrior>(GmmPrior::load_text(spec_.gmm_file));
    } else if (spec_.means.empty()) {
      prior_ = std::make_shared<GmmPrior>(default_gmm_2d());
    } else {
      require(spec_.means.size() == spec_.variances.size(), "gmm-2d: means and variances differ in count");
      std::vector<double> w = spec_.weights.empty() ? std::vector<double>(spec_.means.size(), 1.0) : spec_.weights;
      std::vector<Tensor> mu, var;
      for (std::size_t i = 0; i < spec_.means.size(); ++i) {
        mu.push_back(Tensor::vector(spec_.means[i]));
        var.push_back(Tensor::vector(spec_.variances[i]));
      }
      prior_ = std::make_shared<GmmPrior>(std::move(w), std::move(mu), std::move(var));
    }
    shape_ = ImageShape{1, prior_->dim()};
  } else if (k == "blobs-8x8" || k == "blobs-16x16") {
    const std::size_t side = k == "blobs-8x8" ? 8 : 16;
    shape_ = ImageShape{side, side};
    require(spec_.min_bumps >= 1 && spec_.max_bumps >= spec_.min_bumps, "blobs: need 1 <= min_bumps <= max_bumps");
  } else if (k == "gaussian-field") {
    require(spec_.side >= 1, "gaussian-field: side must be >= 1");
    shape_ = ImageShape{spec_.side, spec_.side};
    const std::size_t n = shape_.numel();
    prior_ = std::make_shared<GmmPrior>(
        std::vector<double>{1.0}, std::vector<Tensor>{Tensor({n}, spec_.field_mean)},
        std::vector<Tensor>{squared_exponential_covariance(spec_.side, spec_.field_variance, spec_.lengthscale, spec_.jitter)});
  } else if (k == "gmm-blobs") {
    require(spec_.components >= 1, "gmm-blobs: components must be >= 1");
    require(spec_.component_variance > 0.0, "gmm-blobs: component variance must be positive");
    shape_ = ImageShape{spec_.blob_side, spec_.blob_side};
    Rng rng(derive_seed(spec_.seed, 0x7e), StreamRole::kDataset);  // templates, apart from sample draws
    std::vector<Tensor> mu, var;
    for (std::size_t c = 0; c < spec_.components; ++c) {
      mu.push_back(blob_image(spec_.blob_side, spec_.min_bumps, spec_.max_bumps, rng));
      var.emplace_back(Shape{shape_.numel()}, spec_.component_variance);
    }
    prior_ = std::make_shared<GmmPrior>(std::vector<double>(spec_.components, 1.0), std::move(mu), std::move(var));
  } else {
    fail(ErrorCode::kConfig, "unknown dataset kind '" + k + "' (valid: " + kinds_list() + ")");
  }
}

Tensor Dataset::sample(Rng& rng) const {
  if (prior_) return prior_->sample(rng);
  return blob_image(shape_.height, spec_.min_bumps, spec_.max_bumps, rng);
}

Tensor Dataset::sample_batch(std::size_t count, std::uint64_t seed) const {
  require(count >= 1, "dataset: count must be >= 1");
  Rng rng(seed, StreamRole::kDataset);
  const std::size_t d = dim();
  Tensor out({count, d});
  for (std::size_t i = 0; i < count; ++i) {
    const Tensor x = sample(rng);
    std::copy(x.data().begin(), x.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return out;
}

}  // namespace sitcom
