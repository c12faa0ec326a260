#include "core/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "core/checkpoint.hpp"
#include "core/error.hpp"
#include "core/gmm.hpp"
#include "core/io.hpp"
#include "core/mlp.hpp"
#include "core/rng.hpp"
#include "core/training.hpp"

namespace sitcom {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
  return out.empty() ? "_" : out;
}

struct Stat {
  double sum = 0, sq = 0;
  std::size_t n = 0;
  void add(double v) {
    if (std::isnan(v)) return;
    sum += v;
    sq += v * v;
    ++n;
  }
  double mean() const { return n ? sum / n : kNaN; }
  double std() const {
    if (n < 2) return n ? 0.0 : kNaN;
    const double m = mean();
    return std::sqrt(std::max(0.0, (sq - n * m * m) / (n - 1)));
  }
};

}  // namespace

// ---- tables -----------------------------------------------------------------

const std::vector<std::string>& results_header() {
  static const std::vector<std::string> h{"fingerprint", "variant",  "label",   "N",        "K",
                                          "lambda",      "delta",    "seed",    "problem",  "repetition",
                                          "psnr",        "ssim",     "mse",     "residual", "runtime",
                                          "iterations",  "error"};
  return h;
}

std::string results_csv(const std::vector<RunRow>& rows) {
  std::string out = csv_line(results_header());
  for (const auto& r : rows) {
    out += csv_line({r.fingerprint, r.variant, r.label, std::to_string(r.N), std::to_string(r.K),
                     format_number(r.lambda), format_number(r.delta), std::to_string(r.seed),
                     std::to_string(r.problem), std::to_string(r.repetition), format_number(r.psnr),
                     format_number(r.ssim), format_number(r.mse), format_number(r.residual),
                     format_number(r.runtime), format_number(r.iterations), r.error});
  }
  return out;
}

std::vector<RunRow> parse_results_csv(const std::string& text) {
  const auto table = parse_csv(text);
  if (table.empty()) fail(ErrorCode::kIo, "results: empty file");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < table[0].size(); ++i) col[table[0][i]] = i;
  for (const auto& name : results_header())
    if (!col.count(name)) fail(ErrorCode::kIo, "results: missing column '" + name + "'");

  std::vector<RunRow> rows;
  for (std::size_t li = 1; li < table.size(); ++li) {
    const auto& f = table[li];
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != table[0].size())
      fail(ErrorCode::kIo, "results: line " + std::to_string(li + 1) + " has " + std::to_string(f.size()) +
                               " fields, expected " + std::to_string(table[0].size()));
    auto at = [&](const char* k) -> const std::string& { return f[col.at(k)]; };
    auto integer = [&](const char* k) {
      const double v = parse_number(at(k));
      if (!std::isfinite(v)) fail(ErrorCode::kIo, std::string("results: bad integer in ") + k);
      return v;
    };
    RunRow r;
    r.fingerprint = at("fingerprint");
    r.variant = at("variant");
    r.label = at("label");
    r.N = static_cast<int>(integer("N"));
    r.K = static_cast<int>(integer("K"));
    r.lambda = parse_number(at("lambda"));
    r.delta = parse_number(at("delta"));
    r.seed = std::strtoull(at("seed").c_str(), nullptr, 10);
    r.problem = static_cast<int>(integer("problem"));
    r.repetition = static_cast<int>(integer("repetition"));
    r.psnr = parse_number(at("psnr"));
    r.ssim = parse_number(at("ssim"));
    r.mse = parse_number(at("mse"));
    r.residual = parse_number(at("residual"));
    r.runtime = parse_number(at("runtime"));
    r.iterations = parse_number(at("iterations"));
    r.error = at("error");
    rows.push_back(std::move(r));
  }
  return rows;
}

double SummaryRow::mean_of(const std::string& metric) const {
  if (metric == "psnr") return psnr_mean;
  if (metric == "ssim") return ssim_mean;
  if (metric == "mse") return mse_mean;
  if (metric == "residual") return residual_mean;
  if (metric == "runtime") return runtime_mean;
  if (metric == "iterations") return iterations_mean;
  fail(ErrorCode::kConfig, "unknown metric '" + metric + "'");
}

std::vector<SummaryRow> summarize(const std::vector<RunRow>& rows) {
  struct Acc {
    SummaryRow row;
    Stat psnr, ssim, mse, residual, runtime, iterations;
  };
  std::vector<Acc> accs;
  std::map<std::string, std::size_t> index;
  for (const auto& r : rows) {
    auto [it, fresh] = index.emplace(r.label, accs.size());
    if (fresh) {
      accs.emplace_back();
      accs.back().row.label = r.label;
      accs.back().row.variant = r.variant;
    }
    Acc& a = accs[it->second];
    ++a.row.count;
    if (!r.error.empty()) {
      ++a.row.errors;
      continue;
    }
    a.psnr.add(r.psnr);
    a.ssim.add(r.ssim);
    a.mse.add(r.mse);
    a.residual.add(r.residual);
    a.runtime.add(r.runtime);
    a.iterations.add(r.iterations);
  }
  std::vector<SummaryRow> out;
  for (auto& a : accs) {
    SummaryRow s = a.row;
    s.psnr_mean = a.psnr.mean();
    s.psnr_std = a.psnr.std();
    s.ssim_mean = a.ssim.mean();
    s.ssim_std = a.ssim.std();
    s.mse_mean = a.mse.mean();
    s.residual_mean = a.residual.mean();
    s.residual_std = a.residual.std();
    s.runtime_mean = a.runtime.mean();
    s.iterations_mean = a.iterations.mean();
    out.push_back(s);
  }
  return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = csv_line({"label", "variant", "count", "errors", "psnr_mean", "psnr_std", "ssim_mean", "ssim_std",
                              "mse_mean", "residual_mean", "residual_std", "runtime_mean", "iterations_mean"});
  for (const auto& s : rows) {
    out += csv_line({s.label, s.variant, std::to_string(s.count), std::to_string(s.errors),
                     format_number(s.psnr_mean), format_number(s.psnr_std), format_number(s.ssim_mean),
                     format_number(s.ssim_std), format_number(s.mse_mean), format_number(s.residual_mean),
                     format_number(s.residual_std), format_number(s.runtime_mean),
                     format_number(s.iterations_mean)});
  }
  return out;
}

std::string summary_from_results(const std::string& results_csv_text) {
  return summary_csv(summarize(parse_results_csv(results_csv_text)));
}

// ---- checks -----------------------------------------------------------------

std::vector<CheckResult> evaluate_checks(const std::vector<CheckSpec>& checks, const std::vector<SummaryRow>& summary) {
  std::vector<CheckResult> out;
  for (const auto& c : checks) {
    CheckResult r;
    r.name = c.name;
    r.kind = c.kind;
    r.acceptance = c.acceptance;
    r.threshold = c.value;
    std::string missing;
    auto mean = [&](const std::string& label) {
      for (const auto& s : summary)
        if (s.label == label) {
          if (s.errors == s.count) missing = label + " (all runs failed)";
          return s.mean_of(c.metric);
        }
      missing = label + " (no rows)";
      return kNaN;
    };
    if (c.kind == "min" || c.kind == "max") {
      r.observed = mean(c.label);
      r.passed = c.kind == "min" ? r.observed >= c.value : r.observed <= c.value;
      r.detail = c.metric + "(" + c.label + ") " + (c.kind == "min" ? ">= " : "<= ") + format_number(c.value);
    } else if (c.kind == "margin") {
      r.observed = mean(c.a) - mean(c.b);
      r.passed = r.observed >= c.value;
      r.detail = c.metric + "(" + c.a + ") - " + c.metric + "(" + c.b + ") >= " + format_number(c.value);
    } else if (c.kind == "spread") {
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& l : c.labels) {
        const double v = mean(l);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      r.observed = c.labels.empty() ? kNaN : hi - lo;
      r.passed = r.observed <= c.value;
      r.detail = "spread of " + c.metric + " over " + std::to_string(c.labels.size()) + " labels <= " +
                 format_number(c.value);
    } else {
      fail(ErrorCode::kConfig, "check '" + c.name + "': unknown kind '" + c.kind + "'");
    }
    if (std::isnan(r.observed)) r.passed = false;
    if (!missing.empty()) {
      r.passed = false;
      r.detail += "; missing " + missing;
    }
    out.push_back(r);
  }
  return out;
}

std::string checks_csv(const std::vector<CheckResult>& checks) {
  std::string out = csv_line({"name", "kind", "acceptance", "passed", "observed", "threshold", "detail"});
  for (const auto& c : checks)
    out += csv_line({c.name, c.kind, c.acceptance ? "1" : "0", c.passed ? "1" : "0", format_number(c.observed),
                     format_number(c.threshold), c.detail});
  return out;
}

// ---- building blocks --------------------------------------------------------

OperatorPtr build_operator(const OperatorSpec& s, ImageShape shape) {
  OperatorPtr op;
  if (s.kind == "box-mask") {
    BoxRect box;
    if (!s.box.empty()) {
      if (s.box.size() != 4) fail(ErrorCode::kConfig, "operator.box needs [top, left, height, width]");
      box = {s.box[0], s.box[1], s.box[2], s.box[3]};
    } else {
      // centred half-size box
      box = {shape.height / 4, shape.width / 4, (shape.height + 1) / 2, (shape.width + 1) / 2};
    }
    op = make_box_mask(shape, box);
  } else if (s.kind == "random-mask") {
    op = s.count > 0 ? make_random_mask_count(shape, s.count, s.seed) : make_random_mask(shape, s.keep_prob, s.seed);
  } else if (s.kind == "blur") {
    Tensor k;
    if (s.kernel == "gaussian") k = gaussian_kernel(s.kernel_size, s.kernel_sigma);
    else if (s.kernel == "motion") k = motion_kernel(s.kernel_size, s.seed);
    else fail(ErrorCode::kConfig, "operator.kernel must be gaussian or motion, got '" + s.kernel + "'");
    op = std::make_shared<BlurOperator>(shape, k);
  } else if (s.kind == "downsample") {
    op = std::make_shared<DownsampleOperator>(shape, s.factor);
  } else if (s.kind == "fourier") {
    FourierPattern p;
    if (s.pattern == "uniform-rows") p = FourierPattern::kUniformRows;
    else if (s.pattern == "gaussian-rows") p = FourierPattern::kGaussianRows;
    else fail(ErrorCode::kConfig, "operator.pattern must be uniform-rows or gaussian-rows, got '" + s.pattern + "'");
    op = make_fourier_mask(shape, p, s.acceleration, s.seed);
  } else if (s.kind == "phase-retrieval") {
    op = std::make_shared<PhaseRetrievalOperator>(shape, s.oversample);
  } else if (s.kind == "hdr") {
    op = std::make_shared<DynamicRangeClipOperator>(shape, s.hdr_factor);
  } else {
    fail(ErrorCode::kConfig, "unknown operator kind '" + s.kind + "'");
  }
  if (s.scale != 1.0) op = std::make_shared<ScaledOperator>(op, s.scale);
  return op;
}

namespace {

std::string training_key(const ExperimentConfig& cfg) {
  Json m = resolved(cfg.model);
  m.erase("cache");
  m.erase("checkpoint");
  return fingerprint(Json{{"schedule", resolved(cfg.schedule)}, {"dataset", resolved(cfg.dataset)}, {"model", m}});
}

MlpConfig mlp_config(const ExperimentConfig& cfg, std::size_t dim) {
  MlpConfig c;
  c.dim = dim;
  c.hidden = cfg.model.hidden;
  c.layers = cfg.model.layers;
  c.frequencies = cfg.model.frequencies;
  c.T = cfg.schedule.T;
  return c;
}

// Temp file + rename so concurrent readers never see a partial checkpoint.
void save_atomically(const Checkpoint& ck, const fs::path& path) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  save_checkpoint(ck, tmp);
  fs::rename(tmp, path);
}

}  // namespace

ModelBuild build_model(const ExperimentConfig& cfg, const NoiseSchedule& sched, const Dataset& data,
                       const fs::path& output_root, bool force_train) {
  ModelBuild b;
  const auto& m = cfg.model;
  if (m.kind == "zero") {
    b.model = std::make_shared<ZeroScoreModel>(data.dim());
    return b;
  }
  if (m.kind == "analytic") {
    if (!data.prior()) fail(ErrorCode::kConfig, "model.kind analytic needs a dataset with an exact prior");
    b.model = std::make_shared<GmmScoreModel>(data.prior(), std::make_shared<NoiseSchedule>(sched));
    return b;
  }
  if (m.kind != "mlp") fail(ErrorCode::kConfig, "unknown model kind '" + m.kind + "'");

  b.key = training_key(cfg);
  if (!m.checkpoint.empty() && !force_train) {
    auto model = MlpScoreModel::from_checkpoint(load_checkpoint(m.checkpoint));
    if (model.dim() != data.dim())
      fail(ErrorCode::kConfig, "checkpoint dim " + std::to_string(model.dim()) + " does not match dataset dim " +
                                   std::to_string(data.dim()));
    b.model = std::make_shared<MlpScoreModel>(std::move(model));
    b.from_cache = true;
    return b;
  }
  const fs::path cached = output_root / "cache" / ("mlp-" + b.key + ".ckpt");
  if (m.cache && !force_train && fs::exists(cached)) {
    const Checkpoint ck = load_checkpoint(cached);
    auto it = ck.meta.find("training_key");
    if (it != ck.meta.end() && it->second == b.key) {
      b.model = std::make_shared<MlpScoreModel>(MlpScoreModel::from_checkpoint(ck));
      b.from_cache = true;
      return b;
    }
  }
  MlpScoreModel model(mlp_config(cfg, data.dim()), m.init_seed);
  const Tensor train_data = data.sample_batch(m.data_size, m.data_seed);
  b.loss_curve = train_score_model(model, train_data, sched, m.train).loss_curve;
  if (m.cache) {
    Checkpoint ck = model.to_checkpoint();
    ck.meta["training_key"] = b.key;
    save_atomically(ck, cached);
  }
  b.model = std::make_shared<MlpScoreModel>(std::move(model));
  return b;
}

std::vector<ProblemInstance> build_problems(const ExperimentConfig& cfg, const Dataset& data, OperatorPtr op) {
  if (cfg.problems < 1) fail(ErrorCode::kConfig, "problems must be >= 1");
  std::vector<ProblemInstance> out;
  for (int i = 0; i < cfg.problems; ++i) {
    const std::uint64_t s = derive_seed(cfg.problem_seed, static_cast<std::uint64_t>(i));
    Rng rng(s, StreamRole::kDataset);
    out.push_back(synthesize_measurements(data.sample(rng), op, cfg.noise, s));
  }
  return out;
}

double resolve_delta(const SamplerSpec& spec, const ProblemInstance& p) {
  if (spec.delta) return *spec.delta;
  const double m = static_cast<double>(p.op->m());
  if (spec.delta_multiplier) return *spec.delta_multiplier * p.noise.sigma_y * std::sqrt(m);
  return default_delta(p.noise.sigma_y, p.op->m());
}

BestOfK best_of_k(const ProblemInstance& p, const ScoreModel& model, const NoiseSchedule& sched,
                  const SamplerConfig& cfg, int k, const std::string& selector) {
  if (k < 1) fail(ErrorCode::kConfig, "best_of_k must be >= 1");
  if (selector != "residual" && selector != "psnr")
    fail(ErrorCode::kConfig, "selector must be residual or psnr, got '" + selector + "'");
  if (selector == "psnr" && !p.x_true) fail(ErrorCode::kConfig, "selector psnr needs a ground truth");
  BestOfK out;
  for (int j = 0; j < k; ++j) {
    SamplerConfig c = cfg;
    if (j > 0) c.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(j));
    out.runs.push_back(run_sampler(p, model, sched, c));
    const RunResult& r = out.runs.back();
    MetricReport rep;
    if (p.x_true) {
      rep = evaluate_metrics(p, r.x, r.runtime_seconds);
    } else {
      rep.psnr = rep.mse = kNaN;
      rep.residual_norm = residual_norm(p, r.x);
      rep.runtime_seconds = r.runtime_seconds;
    }
    out.metrics.push_back(rep);
    const MetricReport& best = out.metrics[out.selected];
    const bool better = selector == "residual" ? rep.residual_norm < best.residual_norm : rep.psnr > best.psnr;
    if (j > 0 && better) out.selected = static_cast<std::size_t>(j);
  }
  return out;
}

// ---- execution --------------------------------------------------------------

namespace {

struct Context {
  std::shared_ptr<NoiseSchedule> sched;
  std::unique_ptr<Dataset> data;
  ModelBuild model;
  OperatorPtr op;
  std::vector<ProblemInstance> problems;
};

Context build_context(const ExperimentConfig& cfg, const fs::path& root) {
  Context c;
  c.sched = std::make_shared<NoiseSchedule>(
      NoiseSchedule::linear(cfg.schedule.T, cfg.schedule.beta_min, cfg.schedule.beta_max));
  c.data = std::make_unique<Dataset>(cfg.dataset);
  c.model = build_model(cfg, *c.sched, *c.data, root);
  c.op = build_operator(cfg.op, c.data->image_shape());
  c.problems = build_problems(cfg, *c.data, c.op);
  return c;
}

struct TaskOut {
  RunRow row;
  Tensor x;
  std::vector<double> step_psnr;  // PSNR of the clean estimate at every step
};

Json experiment_identity(const ExperimentConfig& cfg) {
  Json j = resolved(cfg);
  for (const char* k : {"name", "output", "workers", "problems", "write_images", "samplers", "sweep", "checks"})
    j.erase(k);
  return j;
}

std::vector<TaskOut> execute(const ExperimentConfig& cfg, const Context& ctx, const std::vector<SamplerSpec>& specs,
                             bool want_curves) {
  if (cfg.repetitions < 1) fail(ErrorCode::kConfig, "repetitions must be >= 1");
  const Json identity = experiment_identity(cfg);
  const std::size_t P = ctx.problems.size(), R = static_cast<std::size_t>(cfg.repetitions);
  const std::size_t total = specs.size() * P * R;
  std::vector<TaskOut> out(total);

  auto run_one = [&](std::size_t idx) {
    const std::size_t s = idx / (P * R), i = (idx / R) % P, r = idx % R;
    const SamplerSpec& spec = specs[s];
    const ProblemInstance& p = ctx.problems[i];
    TaskOut& t = out[idx];
    RunRow& row = t.row;
    row.label = spec.label;
    row.variant = to_string(spec.cfg.variant);
    row.N = spec.cfg.N;
    row.K = spec.cfg.K;
    row.lambda = spec.cfg.lambda;
    row.problem = static_cast<int>(i);
    row.repetition = static_cast<int>(r);
    row.seed = derive_seed(cfg.seed, i * R + r);
    row.fingerprint = fingerprint(Json{{"experiment", identity},
                                       {"sampler", resolved(spec)},
                                       {"problem", i},
                                       {"repetition", r}});
    row.psnr = row.ssim = row.mse = row.residual = row.runtime = row.iterations = kNaN;
    try {
      SamplerConfig c = spec.cfg;
      c.seed = row.seed;
      c.delta = resolve_delta(spec, p);
      row.delta = c.delta;
      const BestOfK b = best_of_k(p, *ctx.model.model, *ctx.sched, c, spec.best_of_k, spec.selector);
      const RunResult& res = b.runs[b.selected];
      const MetricReport& m = b.metrics[b.selected];
      double runtime = 0, iters = 0;
      for (const auto& run : b.runs) runtime += run.runtime_seconds;
      for (const auto& st : res.steps) iters += st.iterations;
      row.psnr = m.psnr;
      row.ssim = m.ssim.value_or(kNaN);
      row.mse = m.mse;
      row.residual = m.residual_norm;
      row.runtime = runtime;
      row.iterations = iters;
      t.x = res.x;
      if (want_curves && p.x_true)
        for (const auto& xh : res.xhat0) t.step_psnr.push_back(psnr(xh, *p.x_true));
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(cfg.workers, 1)), 1, total);
  if (workers <= 1) {
    for (std::size_t k = 0; k < total; ++k) run_one(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t k; (k = next.fetch_add(1)) < total;) run_one(k);
      });
    for (auto& th : pool) th.join();
  }
  return out;
}

void write_images(const fs::path& dir, const Context& ctx, const std::vector<TaskOut>& tasks) {
  const ImageShape shape = ctx.data->image_shape();
  if (shape.height < 2 || shape.width < 2) return;
  for (std::size_t i = 0; i < ctx.problems.size(); ++i)
    if (ctx.problems[i].x_true)
      write_pgm(dir / "images" / "truth" / ("p" + std::to_string(i) + ".pgm"), *ctx.problems[i].x_true, shape);
  for (const auto& t : tasks)
    if (t.row.error.empty() && t.row.repetition == 0 && !t.x.empty())
      write_pgm(dir / "images" / sanitize(t.row.label) / ("p" + std::to_string(t.row.problem) + ".pgm"), t.x, shape);
}

fs::path experiment_dir(const ExperimentConfig& cfg, const fs::path& root) {
  return root / (cfg.output.empty() ? cfg.name : cfg.output);
}

ExperimentOutput finish(const ExperimentConfig& cfg, const fs::path& dir, const Context& ctx,
                        const std::vector<TaskOut>& tasks, bool with_checks = true) {
  ExperimentOutput out;
  out.dir = dir;
  const Json res = resolved(cfg);
  out.fingerprint = fingerprint(res);
  for (const auto& t : tasks) out.rows.push_back(t.row);
  const std::string results = results_csv(out.rows);
  write_file(dir / "results.csv", results);
  // summary.csv goes through the same path as `report`
  out.summary = summarize(parse_results_csv(results));
  write_file(dir / "summary.csv", summary_csv(out.summary));
  if (with_checks) out.checks = evaluate_checks(cfg.checks, out.summary);
  write_file(dir / "checks.csv", checks_csv(out.checks));
  for (const auto& c : out.checks)
    if (c.acceptance && !c.passed) out.acceptance_passed = false;
  Json meta = res;
  meta["fingerprint"] = out.fingerprint;
  write_file(dir / "config.resolved.json", meta.dump(2) + "\n");
  if (cfg.write_images && ctx.data) write_images(dir, ctx, tasks);
  return out;
}

std::string label_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& cfg, const fs::path& output_root) {
  if (cfg.samplers.empty()) {
    // nothing to run: header-only tables, no model or problems needed
    Context empty;
    return finish(cfg, experiment_dir(cfg, output_root), empty, {});
  }
  const Context ctx = build_context(cfg, output_root);
  const auto tasks = execute(cfg, ctx, cfg.samplers, false);
  return finish(cfg, experiment_dir(cfg, output_root), ctx, tasks);
}

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "n-k") return SweepAxis::kNK;
  if (s == "lambda") return SweepAxis::kLambda;
  if (s == "delta") return SweepAxis::kDelta;
  fail(ErrorCode::kConfig, "sweep axis must be n-k, lambda or delta, got '" + s + "'");
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::kNK: return "n-k";
    case SweepAxis::kLambda: return "lambda";
    case SweepAxis::kDelta: return "delta";
  }
  return "?";
}

ExperimentOutput run_sweep(const ExperimentConfig& cfg, SweepAxis axis, const fs::path& output_root) {
  if (cfg.samplers.empty()) fail(ErrorCode::kConfig, "config has no samplers");
  const SweepSpec& sw = cfg.sweep;
  std::vector<SamplerSpec> cells;
  for (const auto& base : cfg.samplers) {
    if (axis == SweepAxis::kNK) {
      if (sw.N.empty() && sw.K.empty()) fail(ErrorCode::kConfig, "sweep n-k needs sweep.N or sweep.K");
      const std::vector<int> Ns = sw.N.empty() ? std::vector<int>{base.cfg.N} : sw.N;
      const std::vector<int> Ks = sw.K.empty() ? std::vector<int>{base.cfg.K} : sw.K;
      for (int n : Ns)
        for (int k : Ks) {
          SamplerSpec c = base;
          c.cfg.N = n;
          c.cfg.K = k;
          c.label = base.label + "[N=" + std::to_string(n) + ",K=" + std::to_string(k) + "]";
          cells.push_back(c);
        }
    } else if (axis == SweepAxis::kLambda) {
      if (sw.lambda.empty()) fail(ErrorCode::kConfig, "sweep lambda needs sweep.lambda");
      for (double l : sw.lambda) {
        SamplerSpec c = base;
        c.cfg.lambda = l;
        c.label = base.label + "[lambda=" + label_number(l) + "]";
        cells.push_back(c);
      }
    } else {
      if (sw.delta_multipliers.empty()) fail(ErrorCode::kConfig, "sweep delta needs sweep.delta_multipliers");
      for (double d : sw.delta_multipliers) {
        SamplerSpec c = base;
        c.delta.reset();
        c.delta_multiplier = d;
        c.label = base.label + "[delta=" + label_number(d) + "]";
        cells.push_back(c);
      }
    }
  }
  if (cells.size() > sw.max_cells)
    fail(ErrorCode::kConfig, "sweep has " + std::to_string(cells.size()) + " cells, more than max_cells " +
                                 std::to_string(sw.max_cells));
  for (auto& c : cells) c.cfg.validate();

  const Context ctx = build_context(cfg, output_root);
  const auto tasks = execute(cfg, ctx, cells, true);
  const fs::path dir = experiment_dir(cfg, output_root) / ("sweep-" + to_string(axis));
  // checks name the run's labels; sweep cells are relabelled, so none apply
  ExperimentOutput out = finish(cfg, dir, ctx, tasks, false);

  std::string table = csv_line({"label", "base", "N", "K", "lambda", "delta_multiplier", "count", "errors",
                                "psnr_mean", "psnr_std", "ssim_mean", "residual_mean", "runtime_mean",
                                "iterations_mean"});
  const std::size_t per_cell = ctx.problems.size() * static_cast<std::size_t>(cfg.repetitions);
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const SamplerSpec& c = cells[ci];
    const std::string base = c.label.substr(0, c.label.find('['));
    std::vector<RunRow> rows;
    for (std::size_t k = 0; k < per_cell; ++k) rows.push_back(tasks[ci * per_cell + k].row);
    const SummaryRow s = summarize(rows).front();
    table += csv_line({c.label, base, std::to_string(c.cfg.N), std::to_string(c.cfg.K), format_number(c.cfg.lambda),
                       c.delta_multiplier ? format_number(*c.delta_multiplier) : "", std::to_string(s.count),
                       std::to_string(s.errors), format_number(s.psnr_mean), format_number(s.psnr_std),
                       format_number(s.ssim_mean), format_number(s.residual_mean), format_number(s.runtime_mean),
                       format_number(s.iterations_mean)});
  }
  write_file(dir / "sweep_summary.csv", table);

  std::string curves = csv_line({"label", "step", "t", "psnr_mean", "count"});
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const auto steps = sampler_steps(cells[ci].cfg.N, cfg.schedule.T);
    std::vector<Stat> acc(steps.size());
    for (std::size_t k = 0; k < per_cell; ++k) {
      const auto& sp = tasks[ci * per_cell + k].step_psnr;
      for (std::size_t j = 0; j < sp.size() && j < acc.size(); ++j) acc[j].add(sp[j]);
    }
    for (std::size_t j = 0; j < steps.size(); ++j)
      curves += csv_line({cells[ci].label, std::to_string(j), std::to_string(steps[j].t), format_number(acc[j].mean()),
                          std::to_string(acc[j].n)});
  }
  write_file(dir / "curves.csv", curves);
  return out;
}

TrainOutput train_from_config(const ExperimentConfig& cfg, const fs::path& output_root) {
  if (cfg.model.kind != "mlp") fail(ErrorCode::kConfig, "train needs model.kind mlp");
  const NoiseSchedule sched = NoiseSchedule::linear(cfg.schedule.T, cfg.schedule.beta_min, cfg.schedule.beta_max);
  const Dataset data(cfg.dataset);
  ModelBuild b = build_model(cfg, sched, data, output_root, true);
  const auto& model = static_cast<const MlpScoreModel&>(*b.model);

  TrainOutput out;
  out.dir = experiment_dir(cfg, output_root);
  out.checkpoint = out.dir / "model.ckpt";
  out.loss_curve = b.loss_curve;
  Checkpoint ck = model.to_checkpoint();
  ck.meta["training_key"] = b.key;
  save_atomically(ck, out.checkpoint);

  // held-out estimate of the loss against the eps == 0 baseline
  const Tensor held_out = data.sample_batch(1024, derive_seed(cfg.model.data_seed, 0x4e1d));
  Rng rng(derive_seed(cfg.model.train.seed, 0x4e1d), StreamRole::kTrainBatch);
  const TrainBatch batch = sample_train_batch(held_out, 1024, sched, rng);
  out.final_loss = dsm_loss(model, batch, sched);
  out.baseline_loss = dsm_loss(ZeroScoreModel(data.dim()), batch, sched);

  std::string curve = csv_line({"iteration", "loss"});
  for (std::size_t i = 0; i < out.loss_curve.size(); ++i)
    curve += csv_line({std::to_string(i), format_number(out.loss_curve[i])});
  write_file(out.dir / "loss_curve.csv", curve);
  Json meta{{"training_key", b.key},
            {"model", resolved(cfg.model)},
            {"dataset", resolved(cfg.dataset)},
            {"schedule", resolved(cfg.schedule)},
            {"final_loss", out.final_loss},
            {"baseline_loss", out.baseline_loss}};
  write_file(out.dir / "train.json", meta.dump(2) + "\n");
  return out;
}

std::string report(const fs::path& results_csv_path) {
  const std::string text = summary_from_results(read_file(results_csv_path));
  write_file(results_csv_path.parent_path() / "summary.csv", text);
  return text;
}

fs::path output_root_from_env() {
  const char* v = std::getenv("SITCOM_OUTPUT_ROOT");
  return (v && *v) ? fs::path(v) : fs::path("sitcom-out");
}

}  // namespace sitcom
