// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Experiment outputs go under $SITCOM_OUTPUT_ROOT (trained models are cached
// there, so reruns skip training).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "core/autodiff.hpp"
#include "core/datasets.hpp"
#include "core/diffusion.hpp"
#include "core/gmm.hpp"
#include "core/harness.hpp"
#include "core/io.hpp"
#include "core/metrics.hpp"
#include "core/mlp.hpp"
#include "core/operators.hpp"
#include "core/samplers.hpp"

using namespace sitcom;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Line {
  int id = 0;
  std::string title;
  Outcome outcome;
  double seconds = 0.0;
  double limit = 0.0;  // 0: no limit
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path config_path(const std::string& name) { return fs::path(SITCOM_SOURCE_DIR) / "configs" / name; }

std::shared_ptr<const NoiseSchedule> standard_schedule() {
  static const auto s = std::make_shared<const NoiseSchedule>(NoiseSchedule::linear(1000, 1e-4, 0.02));
  return s;
}

Line timed(int id, const std::string& title, double limit, const std::function<Outcome()>& body) {
  std::fprintf(stderr, "criterion %d: %s ...\n", id, title.c_str());
  Line l{id, title, {}, 0.0, limit};
  const auto t0 = std::chrono::steady_clock::now();
  try {
    l.outcome = body();
  } catch (const std::exception& e) {
    l.outcome = {false, std::string("exception: ") + e.what()};
  }
  l.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return l;
}

// ---- 1 ------------------------------------------------------------------------

Outcome reverse_step_forms() {
  const auto s = standard_schedule();
  MlpConfig cfg;
  cfg.dim = 16;
  cfg.hidden = 64;
  const MlpScoreModel model(cfg, 3);
  Rng rng(2024, StreamRole::kStepNoise);
  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    const int t = rng.uniform_int(1, s->T());
    const Tensor x = rng.normal_tensor({16});
    const Tensor eta = rng.normal_tensor({16});
    const Tensor a = score_reverse_step(x, t, model.score(x, t, *s), eta, *s);
    const Tensor b = ddpm_reverse_step(x, t, tweedie_denoise(x, t, model, *s), eta, *s);
    worst = std::max(worst, max_abs_diff(a, b));
  }
  return {worst <= 1e-10, "max-abs over 100 triples " + fmt("%.3g", worst) + " <= 1e-10"};
}

// ---- 2 ------------------------------------------------------------------------

Outcome single_gd_step_equivalence() {
  DatasetSpec d;
  d.kind = "gmm-blobs";
  const Dataset data(d);
  const GmmScoreModel model(data.prior(), standard_schedule());
  const std::vector<std::pair<std::string, OperatorPtr>> ops = {
      {"box-mask", make_box_mask({8, 8}, {2, 2, 4, 4})},
      {"blur", std::make_shared<BlurOperator>(ImageShape{8, 8}, gaussian_kernel(5, 1.0))}};
  double worst = 0;
  std::size_t compared = 0;
  for (const auto& [name, op] : ops)
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(seed, StreamRole::kDataset);
      const ProblemInstance p =
          synthesize_measurements(data.sample(rng), op, NoiseSpec{NoiseKind::kGaussian, 0.05, 1.0}, seed);
      SamplerConfig s;
      s.N = 20;
      s.K = 1;
      s.lambda = 0.0;
      s.gamma = 0.02;
      s.optimizer = OptimizerKind::kGd;
      s.seed = seed;
      s.record_trajectory = true;
      SamplerConfig r = s;
      r.variant = Variant::kDpsResample;
      r.zeta = s.gamma;
      r.zeta_mode = ZetaMode::kConstant;
      const RunResult a = sitcom_sample(p, model, *standard_schedule(), s);
      const RunResult b = dps_resample_sample(p, model, *standard_schedule(), r);
      if (a.trajectory.size() != b.trajectory.size()) return {false, name + ": trajectory lengths differ"};
      for (std::size_t k = 0; k < a.trajectory.size(); ++k) {
        worst = std::max(worst, max_abs_diff(a.trajectory[k], b.trajectory[k]));
        ++compared;
      }
    }
  return {worst <= 1e-10, "worst per-step max-abs " + fmt("%.3g", worst) + " over " + std::to_string(compared) +
                              " steps (5 seeds x box-mask, blur) <= 1e-10"};
}

// ---- 3 ------------------------------------------------------------------------

// Gauss-Jordan with partial pivoting; M is n x n row-major.
std::vector<double> solve(std::vector<double> M, std::vector<double> b, std::size_t n) {
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c; r < n; ++r)
      if (std::abs(M[r * n + c]) > std::abs(M[p * n + c])) p = r;
    for (std::size_t k = 0; k < n; ++k) std::swap(M[c * n + k], M[p * n + k]);
    std::swap(b[c], b[p]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = M[r * n + c] / M[c * n + c];
      for (std::size_t k = 0; k < n; ++k) M[r * n + k] -= f * M[c * n + k];
      b[r] -= f * b[c];
    }
  }
  for (std::size_t i = 0; i < n; ++i) b[i] /= M[i * n + i];
  return b;
}

// E[x | y] for x ~ N(mu, S), y = x[kept] + N(0, s2 I):
//   mu + S P^T (P S P^T + s2 I)^{-1} (y - P mu)
Tensor joint_gaussian_posterior_mean(const Tensor& mu, const Tensor& S, const std::vector<std::size_t>& kept,
                                     const Tensor& y, double s2) {
  const std::size_t n = mu.size(), m = kept.size();
  std::vector<double> G(m * m), r(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) G[i * m + j] = S[kept[i] * n + kept[j]] + (i == j ? s2 : 0.0);
    r[i] = y[i] - mu[kept[i]];
  }
  const auto z = solve(G, r, m);
  Tensor out = mu;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i] += S[i * n + kept[j]] * z[j];
  return out;
}

Outcome posterior_mean_recovery() {
  DatasetSpec d;
  d.kind = "gaussian-field";
  d.side = 4;
  const Dataset data(d);
  const GmmScoreModel model(data.prior(), standard_schedule());
  const Tensor mu = data.prior()->mean(0), S = data.prior()->covariance(0);
  const double sigma_y = 0.05;
  const int problems = 5, seeds = 20;
  double rel_of_average = 0, rel_per_seed = 0;
  std::string per_problem;
  for (int i = 0; i < problems; ++i) {
    const auto op = make_random_mask_count({4, 4}, 8, 100 + i);
    Rng rng(i, StreamRole::kDataset);
    const ProblemInstance p =
        synthesize_measurements(data.sample(rng), op, NoiseSpec{NoiseKind::kGaussian, sigma_y, 1.0}, i);
    const auto& kept = dynamic_cast<const SelectOperator&>(*op).kept();
    const Tensor pm = joint_gaussian_posterior_mean(mu, S, kept, p.y, sigma_y * sigma_y);
    const double scale = std::sqrt(squared_norm(pm));
    Tensor avg({16});
    double per_seed = 0;
    for (int s = 0; s < seeds; ++s) {
      SamplerConfig c;
      c.N = 20;
      c.K = 30;
      c.optimizer = OptimizerKind::kGd;
      c.gamma = 0.2;
      c.delta = default_delta(sigma_y, 8);
      c.seed = 1000 + s;
      const RunResult r = sitcom_sample(p, model, *standard_schedule(), c);
      avg += (1.0 / seeds) * r.x;
      per_seed += std::sqrt(squared_norm(r.x - pm)) / scale / seeds;
    }
    const double rel = std::sqrt(squared_norm(avg - pm)) / scale;
    per_problem += (i ? " " : "") + fmt("%.3f", rel);
    rel_of_average += rel / problems;
    rel_per_seed += per_seed / problems;
  }
  return {rel_of_average <= 0.10, "relative L2 of the 20-seed average to the posterior mean " +
                                      fmt("%.4f", rel_of_average) + " <= 0.10 (problems: " + per_problem +
                                      "; single-seed mean " + fmt("%.3f", rel_per_seed) + ")"};
}

// ---- 4 ------------------------------------------------------------------------

Outcome gradient_integrity(const fs::path& root) {
  const ExperimentConfig cfg = load_config(config_path("acceptance-blobs.json").string());
  const Dataset data(cfg.dataset);
  const auto sched = standard_schedule();
  const ModelBuild mb = build_model(cfg, *sched, data, root);
  const ImageShape shape = data.image_shape();

  std::vector<OperatorSpec> specs;
  auto add = [&](std::function<void(OperatorSpec&)> set) {
    OperatorSpec o;
    set(o);
    specs.push_back(o);
  };
  add([](OperatorSpec& o) { o.kind = "box-mask"; o.box = {2, 2, 4, 4}; });
  add([](OperatorSpec& o) { o.kind = "random-mask"; o.keep_prob = 0.3; o.seed = 4; });
  add([](OperatorSpec& o) { o.kind = "blur"; o.kernel = "gaussian"; o.kernel_size = 5; o.kernel_sigma = 1.0; });
  add([](OperatorSpec& o) { o.kind = "blur"; o.kernel = "motion"; o.kernel_size = 5; o.seed = 2; });
  add([](OperatorSpec& o) { o.kind = "downsample"; o.factor = 2; });
  add([](OperatorSpec& o) { o.kind = "fourier"; o.acceleration = 2; });
  add([](OperatorSpec& o) { o.kind = "phase-retrieval"; o.oversample = 2.0; });
  add([](OperatorSpec& o) { o.kind = "hdr"; o.hdr_factor = 2.0; });

  double worst = 0;
  std::size_t failed = 0, ambiguous = 0, points = 0;
  std::string failures;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const OperatorPtr op = build_operator(specs[k], shape);
    Rng rng(derive_seed(99, k), StreamRole::kDataset);
    for (int j = 0; j < 20; ++j) {
      const Tensor x0 = data.sample(rng);
      const int t = rng.uniform_int(1, sched->T());
      const Tensor x_t = forward_diffuse(x0, t, rng.normal_tensor({x0.size()}), *sched);
      const Tensor v = x_t + 0.1 * rng.normal_tensor({x0.size()});
      const Tensor y = op->apply(x0) + 0.05 * rng.normal_tensor({op->m()});
      const double lambda = j % 2 ? 1.0 : 0.0;
      const auto fn = [&](ad::Graph& g, ad::Var in) {
        return sitcom_objective(g, in, x_t, t, y, *op, *mb.model, lambda, *sched).total;
      };
      const auto rep = ad::check_gradient(fn, v, 1e-6, 1e-4);
      ++points;
      worst = std::max(worst, rep.max_rel_error);
      ambiguous += rep.ambiguous.size();
      if (!rep.passed) {
        ++failed;
        failures += " " + op->kind() + "@t=" + std::to_string(t);
      }
    }
  }
  std::string detail = std::to_string(points) + " points over " + std::to_string(specs.size()) +
                       " operators, worst rel " + fmt("%.3g", worst) + " < 1e-4";
  if (ambiguous) detail += ", " + std::to_string(ambiguous) + " kink coordinates skipped";
  if (failed) detail += "; failed:" + failures;
  return {failed == 0, detail + (mb.from_cache ? " (cached model)" : " (model trained now)")};
}

// ---- 5 to 8 ---------------------------------------------------------------------

Outcome from_check(const ExperimentOutput& out, const std::string& name) {
  for (const auto& c : out.checks)
    if (c.name == name) return {c.passed, c.detail + " (observed " + fmt("%.4g", c.observed) + ")"};
  return {false, "check '" + name + "' missing"};
}

// ---- 9 ------------------------------------------------------------------------

Outcome operator_suite() {
  const ImageShape s8{8, 8};
  std::vector<std::pair<std::string, OperatorPtr>> linear = {
      {"box-mask", make_box_mask(s8, {2, 3, 3, 4})},
      {"random-mask", make_random_mask(s8, 0.4, 11)},
      {"random-mask-count", make_random_mask_count(s8, 20, 12)},
      {"blur-gaussian", std::make_shared<BlurOperator>(s8, gaussian_kernel(5, 1.2))},
      {"blur-motion", std::make_shared<BlurOperator>(s8, motion_kernel(7, 3))},
      {"blur-rect", std::make_shared<BlurOperator>(ImageShape{5, 9}, gaussian_kernel(3, 0.8))},
      {"downsample", std::make_shared<DownsampleOperator>(s8, 2)},
      {"fourier-uniform", make_fourier_mask(s8, FourierPattern::kUniformRows, 2, 0)},
      {"fourier-gaussian", make_fourier_mask(s8, FourierPattern::kGaussianRows, 4, 5)},
      {"scaled", std::make_shared<ScaledOperator>(make_box_mask(s8, {0, 0, 3, 3}), 2.5)},
  };
  double worst_dot = 0;
  for (const auto& [name, op] : linear) {
    if (!op->is_linear()) return {false, name + " does not report linear"};
    Rng rng(7, StreamRole::kOperator);
    for (int k = 0; k < 100; ++k) {
      const Tensor x = rng.normal_tensor({op->n()});
      const Tensor u = rng.normal_tensor({op->m()});
      worst_dot = std::max(worst_dot, std::abs(dot(op->apply(x), u) - dot(x, op->adjoint(u))));
    }
  }

  // phase retrieval: exact sign-flip invariance and the definition of the
  // orthonormal 2-D DFT of the zero-padded image
  const ImageShape ps{5, 6};
  const PhaseRetrievalOperator pr(ps, 2.0);
  const std::size_t R = pr.padded_rows(), C = pr.padded_cols();
  bool flip_exact = true;
  double worst_dft = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng rng(s, StreamRole::kDataset);
    const Tensor x = rng.normal_tensor({ps.numel()});
    const Tensor y = pr.apply(x);
    flip_exact = flip_exact && (pr.apply(-1.0 * x) == y);
    if (y.size() != R * C) return {false, "phase retrieval output size " + std::to_string(y.size())};
    for (std::size_t k1 = 0; k1 < R; ++k1)
      for (std::size_t k2 = 0; k2 < C; ++k2) {
        std::complex<double> acc = 0;
        for (std::size_t r = 0; r < ps.height; ++r)
          for (std::size_t c = 0; c < ps.width; ++c)
            acc += x[r * ps.width + c] *
                   std::polar(1.0, -2.0 * std::numbers::pi * (double(k1 * r) / double(R) + double(k2 * c) / double(C)));
        worst_dft = std::max(worst_dft, std::abs(std::abs(acc) / std::sqrt(double(R * C)) - y[k1 * C + k2]));
      }
  }
  const bool ok = worst_dot <= 1e-10 && flip_exact && worst_dft <= 1e-10;
  return {ok, std::to_string(linear.size()) + " linear operators, worst |<Ax,u>-<x,A*u>| " + fmt("%.3g", worst_dot) +
                  " <= 1e-10; phase retrieval sign flip " + (flip_exact ? "exact" : "NOT exact") +
                  ", naive DFT max-abs " + fmt("%.3g", worst_dft)};
}

// ---- 10 -----------------------------------------------------------------------

std::vector<CsvRow> metric_columns(const fs::path& results) {
  const auto rows = parse_csv(read_file(results));
  std::vector<CsvRow> out;
  for (const auto& r : rows) {
    CsvRow keep;
    for (std::size_t i = 0; i < r.size(); ++i)
      if (rows[0][i] != "runtime") keep.push_back(r[i]);
    out.push_back(keep);
  }
  return out;
}

Outcome determinism(const fs::path& root) {
  std::string detail;
  bool ok = true;
  for (const std::string name : {"acceptance-stopping.json", "phase-retrieval.json", "acceptance-blobs.json"}) {
    ExperimentConfig a = load_config(config_path(name).string());
    a.write_images = false;
    ExperimentConfig b = a;
    a.output = "determinism/" + a.name + "-a";
    b.output = "determinism/" + a.name + "-b";
    b.workers = 3;
    const auto ra = run_experiment(a, root);
    const auto rb = run_experiment(b, root);
    const auto ca = metric_columns(ra.dir / "results.csv"), cb = metric_columns(rb.dir / "results.csv");
    const bool same = ca == cb && ca.size() > 1;
    ok = ok && same;
    detail += (detail.empty() ? "" : "; ") + a.name + ": " + std::to_string(ca.size() - 1) + " rows " +
              (same ? "identical" : "DIFFER");
  }
  return {ok, detail + " (workers 1 vs 3, runtime column excluded)"};
}

}  // namespace

int main() {
  const fs::path root = output_root_from_env();
  std::vector<Line> lines;

  lines.push_back(timed(1, "score-form and Tweedie-form reverse steps agree", 1.0, reverse_step_forms));
  lines.push_back(timed(2, "single GD step SITCOM equals DPS with resampling", 30.0, single_gd_step_equivalence));
  lines.push_back(timed(3, "posterior mean recovery on the Gaussian toy", 120.0, posterior_mean_recovery));
  lines.push_back(timed(9, "adjoint and operator suite", 10.0, operator_suite));

  ExperimentOutput blobs;
  const Line blobs_run = timed(5, "blobs-8x8 ablation experiment", 0.0, [&] {
    blobs = run_experiment(load_config(config_path("acceptance-blobs.json").string()), root);
    return Outcome{true, ""};
  });
  auto blobs_line = [&](int id, const std::string& title, const std::string& check) {
    Line l{id, title, blobs_run.outcome.passed ? from_check(blobs, check) : blobs_run.outcome, blobs_run.seconds, 600.0};
    return l;
  };
  lines.push_back(blobs_line(5, "K=20 beats K=1 by 3 dB", "step-wise consistency"));
  lines.push_back(blobs_line(6, "SITCOM beats no-backward by 2 dB", "backward consistency"));
  lines.push_back(blobs_line(7, "resampling beats ancestral remap by 2 dB", "forward consistency"));

  lines.push_back(timed(4, "gradient check through the trained MLP", 60.0, [&] { return gradient_integrity(root); }));

  ExperimentOutput stopping;
  const Line stop_run = timed(8, "stopping threshold experiment", 600.0, [&] {
    stopping = run_experiment(load_config(config_path("acceptance-stopping.json").string()), root);
    const Outcome a = from_check(stopping, "threshold robustness");
    const Outcome b = from_check(stopping, "overfitting without threshold");
    return Outcome{a.passed && b.passed, a.detail + "; " + b.detail};
  });
  lines.push_back(stop_run);
  lines.back().title = "threshold multipliers within 1.5 dB, no threshold overfits";

  lines.push_back(timed(10, "bit-identical reruns", 0.0, [&] { return determinism(root); }));

  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
  bool all = true;
  for (const auto& l : lines) {
    const bool in_time = l.limit <= 0.0 || l.seconds < l.limit;
    const bool passed = l.outcome.passed && in_time;
    all = all && passed;
    std::string runtime = fmt("%.2f s", l.seconds);
    if (l.limit > 0.0) runtime += fmt(" < %g s", l.limit) + (in_time ? "" : " EXCEEDED");
    std::printf("%s  %2d  %s: %s [%s]\n", passed ? "PASS" : "FAIL", l.id, l.title.c_str(), l.outcome.detail.c_str(),
                runtime.c_str());
  }
  std::printf("%s\n", all ? "all criteria passed" : "some criteria FAILED");
  return all ? 0 : 1;
}
