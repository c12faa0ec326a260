#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/autodiff.hpp"
#include "core/operators.hpp"
#include "core/optim.hpp"
#include "core/schedule.hpp"
#include "core/score_model.hpp"
#include "core/tensor.hpp"

namespace sitcom {

enum class Variant { kSitcom, kSitcomOde, kNoBackward, kDps, kDpsResample, kDdpmUnconditional };
enum class OptimizerKind { kAdam, kGd };
// How the clean estimate is mapped back to noise level t_prev:
// kResample draws from the forward kernel, kAncestral takes the posterior
// (DDPM) step from x_t with the estimate substituted.
enum class Remap { kResample, kAncestral };
enum class ZetaMode { kConstant, kNormalized };  // normalized: zeta / ||y - A(xhat0)||

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);
std::string to_string(OptimizerKind o);
OptimizerKind parse_optimizer(const std::string& s);
std::string to_string(Remap r);
Remap parse_remap(const std::string& s);
std::string to_string(ZetaMode z);
ZetaMode parse_zeta_mode(const std::string& s);

struct SamplerConfig {
  Variant variant = Variant::kSitcom;
  int N = 20;
  int K = 20;
  double lambda = 0.0;
  double delta = 0.0;  // compared against the squared residual as delta^2
  double gamma = 0.01;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::uint64_t seed = 0;
  int n_ode = 1;  // sitcom-ode only
  double zeta = 1.0;  // dps / dps-resample
  ZetaMode zeta_mode = ZetaMode::kNormalized;
  Remap remap = Remap::kResample;  // sitcom, sitcom-ode
  bool record_trajectory = false;

  void validate() const;
};

enum class BreakReason { kThreshold, kBudget, kNone };
std::string to_string(BreakReason r);

struct StepDiagnostics {
  int i = 0;
  int t = 0;
  double data_term = 0.0;    // ||A(xhat0') - y||^2 at the returned iterate
  double lambda_term = 0.0;  // ||x_t - v||^2 (unweighted)
  int iterations = 0;        // optimizer updates performed
  BreakReason reason = BreakReason::kNone;
  std::vector<double> objective_trace;  // objective at every evaluated inner iterate
  double inner_seconds = 0.0;
};

struct RunResult {
  Tensor x;                            // final reconstruction x_0
  std::vector<StepDiagnostics> steps;  // execution order i = N..1
  std::vector<Tensor> xhat0;           // clean estimate of every step
  std::vector<Tensor> trajectory;      // x_{i-1} after every step (if recorded)
  Tensor x_init;                       // x_N
  double runtime_seconds = 0.0;
};

// ||A(f(v; t)) - y||^2 + lambda ||x_t - v||^2 as a graph, with both terms.
struct Objective {
  ad::Var total;
  ad::Var data;
  ad::Var reg;  // invalid when lambda == 0
  ad::Var xhat0;
};
Objective sitcom_objective(ad::Graph& g, ad::Var v, const Tensor& x_t, int t, const Tensor& y,
                           const ForwardOperator& op, const ScoreModel& model, double lambda,
                           const NoiseSchedule& sched);

struct InnerResult {
  Tensor v;
  Tensor xhat0;  // f(v) from the last forward pass
  int iterations = 0;
  double data_term = 0.0;
  double lambda_term = 0.0;
  BreakReason reason = BreakReason::kBudget;
  std::vector<double> objective_trace;
};

// v <- x_t, then at most K optimizer updates. Before each update the data
// term of the current iterate is tested against delta^2; the test at the
// final iterate reuses its forward pass.
InnerResult inner_optimize(const Tensor& x_t, int t, const Tensor& y, const ForwardOperator& op,
                           const ScoreModel& model, const NoiseSchedule& sched, const SamplerConfig& cfg);

// Random draws: x_N from the init-noise stream, then exactly one eta per
// step from the step-noise stream, drawn after that step's update.
RunResult sitcom_sample(const ProblemInstance& p, const ScoreModel& model, const NoiseSchedule& sched,
                        const SamplerConfig& cfg);
RunResult sitcom_ode_sample(const ProblemInstance& p, const ScoreModel& model, const NoiseSchedule& sched,
                            const SamplerConfig& cfg);
RunResult no_backward_sample(const ProblemInstance& p, const ScoreModel& model, const NoiseSchedule& sched,
                             const SamplerConfig& cfg);
RunResult dps_sample(const ProblemInstance& p, const ScoreModel& model, const NoiseSchedule& sched,
                     const SamplerConfig& cfg);
RunResult dps_resample_sample(const ProblemInstance& p, const ScoreModel& model, const NoiseSchedule& sched,
                              const SamplerConfig& cfg);
RunResult ddpm_unconditional_sample(const ScoreModel& model, const NoiseSchedule& sched, const SamplerConfig& cfg);

RunResult run_sampler(const ProblemInstance& p, const ScoreModel& model, const NoiseSchedule& sched,
                      const SamplerConfig& cfg);

// Default stopping threshold: delta = (sigma_y + 0.001) sqrt(m).
double default_delta(double sigma_y, std::size_t m);

}  // namespace sitcom
