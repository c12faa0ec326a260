#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/datasets.hpp"
#include "core/metrics.hpp"
#include "core/samplers.hpp"
#include "core/schedule.hpp"
#include "core/score_model.hpp"

namespace sitcom {

namespace fs = std::filesystem;

// ---- tables -----------------------------------------------------------------

struct RunRow {
  std::string fingerprint;
  std::string variant;
  std::string label;
  int N = 0;
  int K = 0;
  double lambda = 0.0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  int problem = 0;
  int repetition = 0;
  double psnr = 0.0;
  double ssim = 0.0;  // nan when not applicable
  double mse = 0.0;
  double residual = 0.0;
  double runtime = 0.0;
  double iterations = 0.0;  // inner updates summed over steps
  std::string error;        // empty on success
};

const std::vector<std::string>& results_header();
std::string results_csv(const std::vector<RunRow>& rows);
std::vector<RunRow> parse_results_csv(const std::string& text);

struct SummaryRow {
  std::string label;
  std::string variant;
  std::size_t count = 0;
  std::size_t errors = 0;
  double psnr_mean = 0, psnr_std = 0;
  double ssim_mean = 0, ssim_std = 0;
  double mse_mean = 0;
  double residual_mean = 0, residual_std = 0;
  double runtime_mean = 0;
  double iterations_mean = 0;
  double mean_of(const std::string& metric) const;
};

// Groups by label in order of first appearance; failed runs are counted
// but excluded from the statistics. std is the sample standard deviation.
std::vector<SummaryRow> summarize(const std::vector<RunRow>& rows);
std::string summary_csv(const std::vector<SummaryRow>& rows);

// summary.csv contents as a pure function of results.csv contents.
std::string summary_from_results(const std::string& results_csv_text);

struct CheckResult {
  std::string name;
  std::string kind;
  bool acceptance = true;
  bool passed = false;
  double observed = 0.0;
  double threshold = 0.0;
  std::string detail;
};

std::vector<CheckResult> evaluate_checks(const std::vector<CheckSpec>& checks, const std::vector<SummaryRow>& summary);
std::string checks_csv(const std::vector<CheckResult>& checks);

// ---- building blocks --------------------------------------------------------

OperatorPtr build_operator(const OperatorSpec& spec, ImageShape shape);

struct ModelBuild {
  std::shared_ptr<const ScoreModel> model;
  std::vector<double> loss_curve;  // empty unless trained now
  std::string key;                 // training fingerprint (mlp only)
  bool from_cache = false;
};

// Trains, loads a checkpoint, or reuses <root>/cache/mlp-<key>.ckpt.
ModelBuild build_model(const ExperimentConfig& cfg, const NoiseSchedule& sched, const Dataset& data,
                       const fs::path& output_root, bool force_train = false);

// Problem i: x_true from the dataset stream of derive_seed(problem_seed, i),
// measurements from derive_seed(problem_seed, i) as well (separate roles).
std::vector<ProblemInstance> build_problems(const ExperimentConfig& cfg, const Dataset& data, OperatorPtr op);

// delta from an absolute value, a multiplier of sigma_y sqrt(m), or the default.
double resolve_delta(const SamplerSpec& spec, const ProblemInstance& p);

struct BestOfK {
  std::size_t selected = 0;
  std::vector<RunResult> runs;
  std::vector<MetricReport> metrics;
};

// Run j uses cfg.seed for j = 0 and derive_seed(cfg.seed, j) otherwise.
// selector "residual" takes the smallest residual; "psnr" the largest PSNR.
BestOfK best_of_k(const ProblemInstance& p, const ScoreModel& model, const NoiseSchedule& sched,
                  const SamplerConfig& cfg, int k, const std::string& selector);

// ---- commands ---------------------------------------------------------------

struct ExperimentOutput {
  fs::path dir;
  std::string fingerprint;  // of the whole resolved config
  std::vector<RunRow> rows;
  std::vector<SummaryRow> summary;
  std::vector<CheckResult> checks;
  bool acceptance_passed = true;
};

// Writes results.csv, summary.csv, checks.csv, config.resolved.json and images/.
ExperimentOutput run_experiment(const ExperimentConfig& cfg, const fs::path& output_root);

enum class SweepAxis { kNK, kLambda, kDelta };
SweepAxis parse_sweep_axis(const std::string& s);
std::string to_string(SweepAxis a);

// Grid over the axis for every sampler in the config, seeds shared across
// cells. Additionally writes sweep_summary.csv and curves.csv (mean PSNR of
// the clean estimate at every step). The config's checks are not evaluated
// (checks.csv has only its header), so a sweep always passes acceptance.
ExperimentOutput run_sweep(const ExperimentConfig& cfg, SweepAxis axis, const fs::path& output_root);

struct TrainOutput {
  fs::path dir;
  fs::path checkpoint;
  std::vector<double> loss_curve;
  double baseline_loss = 0.0;  // dsm loss of eps == 0 on a held-out batch
  double final_loss = 0.0;     // dsm loss of the trained model on the same batch
};

// Trains the configured mlp, writes model.ckpt and loss_curve.csv.
TrainOutput train_from_config(const ExperimentConfig& cfg, const fs::path& output_root);

// Reads results.csv, writes summary.csv beside it, returns its contents.
std::string report(const fs::path& results_csv_path);

// $SITCOM_OUTPUT_ROOT, or ./sitcom-out when unset.
fs::path output_root_from_env();

}  // namespace sitcom
