#include "core/samplers.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>

#include "core/diffusion.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"

namespace sitcom {

// ---- names --------------------------------------------------------------------

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kSitcom: return "sitcom";
    case Variant::kSitcomOde: return "sitcom-ode";
    case Variant::kNoBackward: return "no-backward";
    case Variant::kDps: return "dps";
    case Variant::kDpsResample: return "dps-resample";
    case Variant::kDdpmUnconditional: return "ddpm-unconditional";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::kSitcom, Variant::kSitcomOde, Variant::kNoBackward, Variant::kDps,
                    Variant::kDpsResample, Variant::kDdpmUnconditional})
    if (to_string(v) == s) return v;
  fail(ErrorCode::kConfig, "unknown sampler variant '" + s +
                               "' (valid: sitcom, sitcom-ode, no-backward, dps, dps-resample, ddpm-unconditional)");
}

std::string to_string(OptimizerKind o) { return o == OptimizerKind::kAdam ? "adam" : "gd"; }

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "gd") return OptimizerKind::kGd;
  fail(ErrorCode::kConfig, "unknown optimizer '" + s + "' (valid: adam, gd)");
}

std::string to_string(Remap r) { return r == Remap::kResample ? "resample" : "ancestral"; }

Remap parse_remap(const std::string& s) {
  if (s == "resample") return Remap::kResample;
  if (s == "ancestral") return Remap::kAncestral;
  fail(ErrorCode::kConfig, "unknown remap '" + s + "' (valid: resample, ancestral)");
}

std::string to_string(ZetaMode z) { return z == ZetaMode::kConstant ? "constant" : "normalized"; }

ZetaMode parse_zeta_mode(const std::string& s) {
  if (s == "constant") return ZetaMode::kConstant;
  if (s == "normalized") return ZetaMode::kNormalized;
  fail(ErrorCode::kConfig, "unknown zeta mode '" + s + "' (valid: constant, normalized)");
}

std::string to_string(BreakReason r) {
  switch (r) {
    case BreakReason::kThreshold: return "threshold";
    case BreakReason::kBudget: return "budget";
    case BreakReason::kNone: return "none";
  }
  return "?";
}

void SamplerConfig::validate() const {
  require(N >= 1, "sampler: N must be >= 1");
  require(K >= 1, "sampler: K must be >= 1");
  require(lambda >= 0.0 && std::isfinite(lambda), "sampler: lambda must be finite and >= 0");
  require(delta >= 0.0 && !std::isnan(delta), "sampler: delta must be >= 0");
  require(gamma > 0.0 && std::isfinite(gamma), "sampler: gamma must be positive");
  require(n_ode >= 1, "sampler: n_ode must be >= 1");
  require(zeta >= 0.0 && std::isfinite(zeta), "sampler: zeta must be finite and >= 0");
}

double default_delta(double sigma_y, std::size_t m) {
  return (sigma_y + 0.001) * std::sqrt(static_cast<double>(m));
}

// ---- objective and inner loop -----------------------------------------------

Objective sitcom_objective(ad::Graph& g, ad::Var v, const Tensor& x_t, int t, const Tensor& y,
                           const ForwardOperator& op, const ScoreModel& model, double lambda,
                           const NoiseSchedule& sched) {
  Objective o;
  o.xhat0 = tweedie(g, v, t, model, sched);
  o.data = ad::squared_norm(ad::sub(op.apply(g, o.xhat0), g.constant(y)));
  o.total = o.data;
  if (lambda > 0.0) {
    o.reg = ad::squared_norm(ad::sub(g.constant(x_t), v));
    o.total = ad::add(o.data, ad::scale(o.reg, lambda));
  }
  return o;
}

InnerResult inner_optimize(const Tensor& x_t, int t, const Tensor& y, const ForwardOperator& op,
                           const ScoreModel& model, const NoiseSchedule& sched, const SamplerConfig& cfg) {
  cfg.validate();
  InnerResult r;
  r.v = x_t;
  AdamState adam;
  const double thresh = cfg.delta * cfg.delta;
  for (int k = 0;; ++k) {
    ad::Graph g;
    const ad::Var v = g.input(r.v);
    Objective o;
    try {
      o = sitcom_objective(g, v, x_t, t, y, op, model, cfg.lambda, sched);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNumeric) throw;
      fail(ErrorCode::kNumeric, "inner optimization at t=" + std::to_string(t) + ", iteration " +
                                    std::to_string(k) + ": " + e.what());
    }
    r.data_term = o.data.value().item();
    r.lambda_term = o.reg.valid() ? o.reg.value().item() : squared_norm(x_t - r.v);
    r.objective_trace.push_back(o.total.value().item());
    if (r.data_term < thresh || k == cfg.K) {
      r.reason = r.data_term < thresh ? BreakReason::kThreshold : BreakReason::kBudget;
      r.xhat0 = o.xhat0.value();
      break;
    }
    const Tensor grad = g.backward(o.total, std::span(&v, 1))[0];
    if (!grad.all_finite())
      fail(ErrorCode::kNumeric, "inner optimization at t=" + std::to_string(t) + ", iteration " +
                                    std::to_string(k) + ": non-finite gradient");
    if (cfg.optimizer == OptimizerKind::kAdam) adam_step(adam, grad, r.v, cfg.gamma);
    else gd_step(grad, r.v, cfg.gamma);
    r.iterations = k + 1;
  }
  return r;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_problem(const ProblemInstance& p, const ScoreModel& model) {
  require(p.op != nullptr, "sampler: problem has no operator");
  if (model.dim() != p.op->n())
    fail(ErrorCode::kShapeMismatch, "sampler: model dimension " + std::to_string(model.dim()) +
                                        " vs operator signal size " + std::to_string(p.op->n()));
  if (p.y.rank() != 1 || p.y.size() != p.op->m())
    fail(ErrorCode::kShapeMismatch, "sampler: measurement shape " + shape_str(p.y.shape()) + " vs m = " +
                                        std::to_string(p.op->m()));
}

// Shared driver: x_N from the init stream; per step `update` produces the
// clean estimate, one eta is drawn, then `remap` forms x_{i-1}.
struct StepOutput {
  Tensor xhat0;
  StepDiagnostics diag;
  Tensor correction;  // added after the remap (dps); empty otherwise
};

using UpdateFn = std::function<StepOutput(const Tensor& x, const StepIndex& s)>;
using RemapFn = std::function<Tensor(const Tensor& x, const StepIndex& s, const Tensor& xhat0, const Tensor& eta)>;

RunResult run_chain(std::size_t n, const NoiseSchedule& sched, const SamplerConfig& cfg, const UpdateFn& update,
                    const RemapFn& remap) {
  cfg.validate();
  const auto t0 = Clock::now();
  const auto steps = sampler_steps(cfg.N, sched.T());
  Rng init(cfg.seed, StreamRole::kInitNoise);
  Rng noise(cfg.seed, StreamRole::kStepNoise);
  RunResult res;
  Tensor x = init.normal_tensor({n});
  res.x_init = x;
  res.steps.reserve(steps.size());
  res.xhat0.reserve(steps.size());
  for (const auto& s : steps) {
    const auto ts = Clock::now();
    StepOutput o = update(x, s);
    o.diag.i = s.i;
    o.diag.t = s.t;
    if (o.diag.inner_seconds == 0.0) o.diag.inner_seconds = seconds_since(ts);
    const Tensor eta = noise.normal_tensor({n});
    Tensor next = remap(x, s, o.xhat0, eta);
    if (!o.correction.empty()) next -= o.correction;
    if (!next.all_finite())
      fail(ErrorCode::kNumeric, "sampler produced non-finite values at step i=" + std::to_string(s.i));
    x = std::move(next);
    res.steps.push_back(std::move(o.diag));
    res.xhat0.push_back(std::move(o.xhat0));
    if (cfg.record_trajectory) res.trajectory.push_back(x);
  }
  res.x = x;
  res.runtime_seconds = seconds_since(t0);
  return res;
}

Tensor resample_remap(const Tensor&, const StepIndex& s, const Tensor& xhat0, const Tensor& eta,
                      const NoiseSchedule& sched) {
  return resample(xhat0, s.t_prev, eta, sched);
}

RemapFn remap_for(const SamplerConfig& cfg, const NoiseSchedule& sched) {
  if (cfg.remap == Remap::kAncestral)
    return [&sched](const Tensor& x, const StepIndex& s, const Tensor& xhat0, const Tensor& eta) {
      return ddpm_strided_step(x, s.t, s.t_prev, xhat0, eta, sched);
    };
  return [&sched](const Tensor& x, const StepIndex& s, const Tensor& xhat0, const Tensor& eta) {
    return resample_remap(x, s, xhat0, eta, sched);
  };
}

StepOutput sitcom_update(const Tensor& x, const StepIndex& s, const ProblemInstance& p, const ScoreModel& model,
                         const NoiseSchedule& sched, const SamplerConfig& cfg) {
  const auto t0 = Clock::now();
  InnerResult r = inner_optimize(x, s.t, p.y, *p.op, model, sched, cfg);
  StepOutput o;
  o.diag.inner_seconds = seconds_since(t0);
  o.diag.data_term = r.data_term;
  o.diag.lambda_term = r.lambda_term;
  o.diag.iterations = r.iterations;
  o.diag.reason = r.reason;
  o.diag.objective_trace = std::move(r.objective_trace);
  if (cfg.variant == Variant::kSitcomOde) {
    o.xhat0 = pf_ode_denoise(r.v, s.t, model, sched, cfg.n_ode);
    o.diag.data_term = squared_norm(p.op->apply(o.xhat0) - p.y);
  } else {
    o.xhat0 = std::move(r.xhat0);
  }
  return o;
}

void require_variant(const SamplerConfig& cfg, std::initializer_list<Variant> ok, const char* who) {
  for (Variant v : ok)
    if (cfg.variant == v) return;
  fail(ErrorCode::kInvalidArgument, std::string(who) + ": config variant is '" + to_string(cfg.variant) + "'");
}

// Gradient of ||A(f(x; t)) - y||^2 with respect to x, plus f(x) and the data term.
struct GuidanceEval {
  Tensor xhat0;
  Tensor grad;
  double data_term;
};

GuidanceEval guidance(const Tensor& x, int t, const ProblemInstance& p, const ScoreModel& model,
                      const NoiseSchedule& sched) {
  ad::Graph g;
  const ad::Var xv = g.input(x);
  const ad::Var f = tweedie(g, xv, t, model, sched);
  const ad::Var data = ad::squared_norm(ad::sub(p.op->apply(g, f), g.constant(p.y)));
  GuidanceEval e{f.value(), g.backward(data, std::span(&xv, 1))[0], data.value().item()};
  if (!e.grad.all_finite()) fail(ErrorCode::kNumeric, "guidance gradient non-finite at t=" + std::to_string(t));
  return e;
}

double zeta_for(const SamplerConfig& cfg, double data_term) {
  if (cfg.zeta_mode == ZetaMode::kConstant) return cfg.zeta;
  const double r = std::sqrt(data_term);
  return r > 0.0 ? cfg.zeta / r : 0.0;
}

}  // namespace

// ---- samplers -----------------------------------------------------------------

RunResult sitcom_sample(const ProblemInstance& p, const ScoreModel& model, const NoiseSchedule& sched,
                        const SamplerConfig& cfg) {
  require_variant(cfg, {Variant::kSitcom}, "sitcom_sample");
  check_problem(p, model);
  require(model.differentiable_input(), "sitcom_sample: model must be differentiable in its input");
  return run_chain(
      p.op->n(), sched, cfg, [&](const Tensor& x, const StepIndex& s) { return sitcom_update(x, s, p, model, sched, cfg); },
      remap_for(cfg, sched));
}

RunResult sitcom_ode_sample(const ProblemInstance& p, const ScoreModel& model, const NoiseSchedule& sched,
                            const SamplerConfig& cfg) {
  require_variant(cfg, {Variant::kSitcomOde}, "sitcom_ode_sample");
  check_problem(p, model);
  require(model.differentiable_input(), "sitcom_ode_sample: model must be differentiable in its input");
  return run_chain(
      p.op->n(), sched, cfg, [&](const Tensor& x, const StepIndex& s) { return sitcom_update(x, s, p, model, sched, cfg); },
      remap_for(cfg, sched));
}

RunResult no_backward_sample(const ProblemInstance& p, const ScoreModel& model, const NoiseSchedule& sched,
                             const SamplerConfig& cfg) {
  require_variant(cfg, {Variant::kNoBackward}, "no_backward_sample");
  check_problem(p, model);
  const double thresh = cfg.delta * cfg.delta;
  auto update = [&](const Tensor& x, const StepIndex& s) {
    const auto t0 = Clock::now();
    StepOutput o;
    Tensor xp = tweedie_denoise(x, s.t, model, sched);
    AdamState adam;
    for (int k = 0;; ++k) {
      ad::Graph g;
      const ad::Var v = g.input(xp);
      const ad::Var data = ad::squared_norm(ad::sub(p.op->apply(g, v), g.constant(p.y)));
      o.diag.data_term = data.value().item();
      o.diag.objective_trace.push_back(o.diag.data_term);
      if (o.diag.data_term < thresh || k == cfg.K) {
        o.diag.reason = o.diag.data_term < thresh ? BreakReason::kThreshold : BreakReason::kBudget;
        break;
      }
      const Tensor grad = g.backward(data, std::span(&v, 1))[0];
      if (!grad.all_finite())
        fail(ErrorCode::kNumeric, "no-backward inner step at t=" + std::to_string(s.t) + ", iteration " +
                                      std::to_string(k) + ": non-finite gradient");
      if (cfg.optimizer == OptimizerKind::kAdam) adam_step(adam, grad, xp, cfg.gamma);
      else gd_step(grad, xp, cfg.gamma);
      o.diag.iterations = k + 1;
    }
    o.diag.inner_seconds = seconds_since(t0);
    o.xhat0 = std::move(xp);
    return o;
  };
  return run_chain(p.op->n(), sched, cfg, update, [&sched](const Tensor& x, const StepIndex& s, const Tensor& xhat0, const Tensor& eta) {
    return resample_remap(x, s, xhat0, eta, sched);
  });
}

RunResult dps_sample(const ProblemInstance& p, const ScoreModel& model, const NoiseSchedule& sched,
                     const SamplerConfig& cfg) {
  require_variant(cfg, {Variant::kDps}, "dps_sample");
  check_problem(p, model);
  auto update = [&](const Tensor& x, const StepIndex& s) {
    StepOutput o;
    if (cfg.zeta == 0.0) {
      o.xhat0 = tweedie_denoise(x, s.t, model, sched);
      o.diag.data_term = squared_norm(p.op->apply(o.xhat0) - p.y);
      return o;
    }
    GuidanceEval e = guidance(x, s.t, p, model, sched);
    o.correction = zeta_for(cfg, e.data_term) * e.grad;
    o.xhat0 = std::move(e.xhat0);
    o.diag.data_term = e.data_term;
    o.diag.iterations = 1;
    return o;
  };
  return run_chain(p.op->n(), sched, cfg, update, [&sched](const Tensor& x, const StepIndex& s, const Tensor& xhat0, const Tensor& eta) {
    return ddpm_strided_step(x, s.t, s.t_prev, xhat0, eta, sched);
  });
}

RunResult dps_resample_sample(const ProblemInstance& p, const ScoreModel& model, const NoiseSchedule& sched,
                              const SamplerConfig& cfg) {
  require_variant(cfg, {Variant::kDpsResample}, "dps_resample_sample");
  check_problem(p, model);
  auto update = [&](const Tensor& x, const StepIndex& s) {
    StepOutput o;
    Tensor v = x;
    if (cfg.zeta > 0.0) {
      const GuidanceEval e = guidance(x, s.t, p, model, sched);
      v -= zeta_for(cfg, e.data_term) * e.grad;
      o.diag.iterations = 1;
    }
    o.xhat0 = tweedie_denoise(v, s.t, model, sched);
    o.diag.data_term = squared_norm(p.op->apply(o.xhat0) - p.y);
    o.diag.lambda_term = squared_norm(x - v);
    return o;
  };
  return run_chain(p.op->n(), sched, cfg, update, [&sched](const Tensor& x, const StepIndex& s, const Tensor& xhat0, const Tensor& eta) {
    return resample_remap(x, s, xhat0, eta, sched);
  });
}

RunResult ddpm_unconditional_sample(const ScoreModel& model, const NoiseSchedule& sched, const SamplerConfig& cfg) {
  require_variant(cfg, {Variant::kDdpmUnconditional}, "ddpm_unconditional_sample");
  auto update = [&](const Tensor& x, const StepIndex& s) {
    StepOutput o;
    o.xhat0 = tweedie_denoise(x, s.t, model, sched);
    return o;
  };
  return run_chain(model.dim(), sched, cfg, update, [&sched](const Tensor& x, const StepIndex& s, const Tensor& xhat0, const Tensor& eta) {
    return ddpm_strided_step(x, s.t, s.t_prev, xhat0, eta, sched);
  });
}

RunResult run_sampler(const ProblemInstance& p, const ScoreModel& model, const NoiseSchedule& sched,
                      const SamplerConfig& cfg) {
  switch (cfg.variant) {
    case Variant::kSitcom: return sitcom_sample(p, model, sched, cfg);
    case Variant::kSitcomOde: return sitcom_ode_sample(p, model, sched, cfg);
    case Variant::kNoBackward: return no_backward_sample(p, model, sched, cfg);
    case Variant::kDps: return dps_sample(p, model, sched, cfg);
    case Variant::kDpsResample: return dps_resample_sample(p, model, sched, cfg);
    case Variant::kDdpmUnconditional: return ddpm_unconditional_sample(model, sched, cfg);
  }
  fail(ErrorCode::kInvalidArgument, "run_sampler: unknown variant");
}

}  // namespace sitcom
