#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/datasets.hpp"
#include "core/operators.hpp"
#include "core/samplers.hpp"
#include "core/training.hpp"

namespace sitcom {

using Json = nlohmann::json;

struct ScheduleSpec {
  int T = 1000;
  double beta_min = 1e-4;
  double beta_max = 0.02;
};

struct ModelSpec {
  std::string kind = "mlp";  // mlp | analytic | zero
  std::size_t hidden = 128;
  std::size_t layers = 3;
  std::size_t frequencies = 8;
  std::uint64_t init_seed = 0;
  std::string checkpoint;  // load instead of training when set
  bool cache = true;       // reuse a trained model from <output root>/cache
  TrainOptions train;
  std::size_t data_size = 4096;
  std::uint64_t data_seed = 0;
};

struct OperatorSpec {
  std::string kind = "box-mask";  // box-mask | random-mask | blur | downsample | fourier | phase-retrieval | hdr
  std::vector<std::size_t> box;   // top, left, height, width
  double keep_prob = 0.3;
  std::size_t count = 0;  // random-mask: exact count when > 0
  std::uint64_t seed = 0;
  std::string kernel = "gaussian";  // gaussian | motion
  std::size_t kernel_size = 7;
  double kernel_sigma = 1.5;
  std::size_t factor = 2;
  std::string pattern = "uniform-rows";
  std::size_t acceleration = 2;
  double oversample = 2.0;
  double hdr_factor = 2.0;
  double scale = 1.0;  // overall multiplier on A
};

struct SamplerSpec {
  std::string label;
  SamplerConfig cfg;                       // seed is assigned per run
  std::optional<double> delta;             // absolute
  std::optional<double> delta_multiplier;  // delta = c * sigma_y * sqrt(m)
  int best_of_k = 1;
  std::string selector = "residual";  // residual | psnr
};

struct SweepSpec {
  std::vector<int> N;
  std::vector<int> K;
  std::vector<double> lambda;
  std::vector<double> delta_multipliers;
  std::size_t max_cells = 256;
};

struct CheckSpec {
  std::string name;
  std::string kind;  // min | max | margin | spread
  std::string metric = "psnr";
  std::string label;                // min, max
  std::string a, b;                 // margin: mean(a) - mean(b) >= value
  std::vector<std::string> labels;  // spread: max - min of the means <= value
  double value = 0.0;
  bool acceptance = true;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string output;  // directory under the output root; defaults to name
  std::uint64_t seed = 0;
  int workers = 1;
  int repetitions = 1;
  int problems = 1;
  std::uint64_t problem_seed = 0;
  bool write_images = true;
  ScheduleSpec schedule;
  DatasetSpec dataset;
  ModelSpec model;
  OperatorSpec op;
  NoiseSpec noise;
  std::vector<SamplerSpec> samplers;
  SweepSpec sweep;
  std::vector<CheckSpec> checks;
};

// Strict: unknown keys anywhere are errors (kConfig) naming the key path.
ExperimentConfig parse_config(const Json& j);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Every field explicit, keys sorted; parse_config(resolved(c)) == c.
Json resolved(const ExperimentConfig& c);
Json resolved(const SamplerSpec& s);
Json resolved(const ModelSpec& m);
Json resolved(const DatasetSpec& d);
Json resolved(const ScheduleSpec& s);

// 16 hex digits of FNV-1a over the compact dump of `j`.
std::string fingerprint(const Json& j);

}  // namespace sitcom
