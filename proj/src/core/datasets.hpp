#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/gmm.hpp"
#include "core/operators.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace sitcom {

// Data-generating distributions. Kinds:
//   gmm-2d         points from a configured mixture (any dimension, 2 by default)
//   blobs-8x8      images of 1-3 anisotropic Gaussian bumps, min-max scaled to [-1, 1]
//   blobs-16x16    same at 16x16
//   gaussian-field N(mean, squared-exponential covariance) on a side x side grid
//   gmm-blobs      mixture whose means are blob images, isotropic variance
// The last three (and gmm-2d) carry an exact prior for analytic score models.
struct DatasetSpec {
  std::string kind = "gmm-2d";
  std::uint64_t seed = 0;
  // gmm-2d: explicit mixture; empty means the built-in 4-component default
  std::vector<double> weights;
  std::vector<std::vector<double>> means;
  std::vector<std::vector<double>> variances;
  std::string gmm_file;  // alternative text source
  // gaussian-field
  std::size_t side = 4;
  double field_mean = 0.0;
  double field_variance = 0.25;
  double lengthscale = 1.5;
  double jitter = 1e-3;
  // gmm-blobs
  std::size_t components = 4;
  double component_variance = 0.01;
  std::size_t blob_side = 8;
  // blobs
  int min_bumps = 1;
  int max_bumps = 3;
};

std::vector<std::string> dataset_kinds();

class Dataset {
 public:
  explicit Dataset(DatasetSpec spec);

  const DatasetSpec& spec() const { return spec_; }
  std::size_t dim() const { return shape_.numel(); }
  ImageShape image_shape() const { return shape_; }
  // Exact prior, when the kind has one.
  std::shared_ptr<const GmmPrior> prior() const { return prior_; }

  Tensor sample(Rng& rng) const;
  // [count, d] using the dataset stream of `seed`.
  Tensor sample_batch(std::size_t count, std::uint64_t seed) const;

 private:
  DatasetSpec spec_;
  ImageShape shape_;
  std::shared_ptr<const GmmPrior> prior_;
};

// One blob image: bumps with random centre, orientation and axis lengths,
// random signed amplitudes, then min-max scaled to exactly [-1, 1].
Tensor blob_image(std::size_t side, int min_bumps, int max_bumps, Rng& rng);

}  // namespace sitcom
