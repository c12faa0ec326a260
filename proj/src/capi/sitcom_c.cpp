#include "sitcom/sitcom.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "core/config.hpp"
#include "core/error.hpp"
#include "core/harness.hpp"
#include "core/metrics.hpp"

struct sitcom_config {
  sitcom::ExperimentConfig cfg;
};

struct sitcom_result {
  sitcom::ExperimentOutput out;
  std::string dir;
};

namespace {

thread_local std::string g_last_error;

sitcom_status to_status(sitcom::ErrorCode c) {
  switch (c) {
    case sitcom::ErrorCode::kInvalidArgument: return SITCOM_ERR_INVALID_ARGUMENT;
    case sitcom::ErrorCode::kShapeMismatch: return SITCOM_ERR_SHAPE;
    case sitcom::ErrorCode::kNumeric: return SITCOM_ERR_NUMERIC;
    case sitcom::ErrorCode::kIo: return SITCOM_ERR_IO;
    case sitcom::ErrorCode::kConfig: return SITCOM_ERR_CONFIG;
  }
  return SITCOM_ERR_INTERNAL;
}

template <class F>
sitcom_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return SITCOM_OK;
  } catch (const sitcom::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("json: ") + e.what();
    return SITCOM_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SITCOM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SITCOM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SITCOM_ERR_INTERNAL;
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void need(const void* p, const char* what) {
  if (!p) sitcom::fail(sitcom::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

sitcom::fs::path root_or_env(const char* root) {
  return root ? sitcom::fs::path(root) : sitcom::output_root_from_env();
}

}  // namespace

extern "C" {

const char* sitcom_last_error(void) { return g_last_error.c_str(); }

const char* sitcom_status_name(sitcom_status s) {
  switch (s) {
    case SITCOM_OK: return "ok";
    case SITCOM_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SITCOM_ERR_SHAPE: return "shape mismatch";
    case SITCOM_ERR_NUMERIC: return "numeric failure";
    case SITCOM_ERR_IO: return "i/o error";
    case SITCOM_ERR_CONFIG: return "config error";
    case SITCOM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* sitcom_version(void) { return "1.0.0"; }

void sitcom_string_free(char* s) { std::free(s); }

sitcom_status sitcom_config_parse(const char* json, sitcom_config** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = new sitcom_config{sitcom::parse_config_text(json)};
  });
}

sitcom_status sitcom_config_load(const char* path, sitcom_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new sitcom_config{sitcom::load_config(path)};
  });
}

sitcom_status sitcom_config_resolved(const sitcom_config* cfg, char** json_out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(json_out, "json_out");
    *json_out = dup(sitcom::resolved(cfg->cfg).dump(2));
  });
}

sitcom_status sitcom_config_fingerprint(const sitcom_config* cfg, char** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    *out = dup(sitcom::fingerprint(sitcom::resolved(cfg->cfg)));
  });
}

void sitcom_config_free(sitcom_config* cfg) { delete cfg; }

sitcom_status sitcom_run(const sitcom_config* cfg, const char* output_root, sitcom_result** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    auto* r = new sitcom_result{sitcom::run_experiment(cfg->cfg, root_or_env(output_root)), {}};
    r->dir = r->out.dir.string();
    *out = r;
  });
}

sitcom_status sitcom_sweep(const sitcom_config* cfg, const char* axis, const char* output_root,
                           sitcom_result** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(axis, "axis");
    need(out, "out");
    const auto a = sitcom::parse_sweep_axis(axis);
    auto* r = new sitcom_result{sitcom::run_sweep(cfg->cfg, a, root_or_env(output_root)), {}};
    r->dir = r->out.dir.string();
    *out = r;
  });
}

int sitcom_result_acceptance_passed(const sitcom_result* r) { return r && r->out.acceptance_passed ? 1 : 0; }

const char* sitcom_result_dir(const sitcom_result* r) { return r ? r->dir.c_str() : ""; }

size_t sitcom_result_row_count(const sitcom_result* r) { return r ? r->out.rows.size() : 0; }

size_t sitcom_result_error_count(const sitcom_result* r) {
  size_t n = 0;
  if (r)
    for (const auto& row : r->out.rows) n += !row.error.empty();
  return n;
}

size_t sitcom_result_check_count(const sitcom_result* r) { return r ? r->out.checks.size() : 0; }

sitcom_status sitcom_result_check(const sitcom_result* r, size_t index, const char** name, int* acceptance,
                                  int* passed, double* observed, double* threshold, const char** detail) {
  return guarded([&] {
    need(r, "result");
    if (index >= r->out.checks.size())
      sitcom::fail(sitcom::ErrorCode::kInvalidArgument, "check index " + std::to_string(index) + " out of range");
    const auto& c = r->out.checks[index];
    if (name) *name = c.name.c_str();
    if (acceptance) *acceptance = c.acceptance ? 1 : 0;
    if (passed) *passed = c.passed ? 1 : 0;
    if (observed) *observed = c.observed;
    if (threshold) *threshold = c.threshold;
    if (detail) *detail = c.detail.c_str();
  });
}

sitcom_status sitcom_result_summary_csv(const sitcom_result* r, char** out) {
  return guarded([&] {
    need(r, "result");
    need(out, "out");
    *out = dup(sitcom::summary_csv(r->out.summary));
  });
}

sitcom_status sitcom_result_mean(const sitcom_result* r, const char* label, const char* metric, double* out) {
  return guarded([&] {
    need(r, "result");
    need(label, "label");
    need(metric, "metric");
    need(out, "out");
    for (const auto& s : r->out.summary)
      if (s.label == label) {
        *out = s.mean_of(metric);
        return;
      }
    sitcom::fail(sitcom::ErrorCode::kInvalidArgument, std::string("no rows for label '") + label + "'");
  });
}

void sitcom_result_free(sitcom_result* r) { delete r; }

sitcom_status sitcom_train(const sitcom_config* cfg, const char* output_root, sitcom_train_info* info,
                           char** checkpoint_path_out) {
  return guarded([&] {
    need(cfg, "cfg");
    const auto t = sitcom::train_from_config(cfg->cfg, root_or_env(output_root));
    if (info) {
      info->iterations = t.loss_curve.size();
      info->first_loss = t.loss_curve.empty() ? 0.0 : t.loss_curve.front();
      info->last_loss = t.loss_curve.empty() ? 0.0 : t.loss_curve.back();
      info->baseline_loss = t.baseline_loss;
      info->final_loss = t.final_loss;
    }
    if (checkpoint_path_out) *checkpoint_path_out = dup(t.checkpoint.string());
  });
}

sitcom_status sitcom_report(const char* results_csv_path, char** summary_out) {
  return guarded([&] {
    need(results_csv_path, "results_csv_path");
    const std::string s = sitcom::report(results_csv_path);
    if (summary_out) *summary_out = dup(s);
  });
}

sitcom_status sitcom_psnr(const double* x, const double* ref, size_t n, double* out) {
  return guarded([&] {
    need(x, "x");
    need(ref, "ref");
    need(out, "out");
    if (n == 0) sitcom::fail(sitcom::ErrorCode::kInvalidArgument, "psnr: empty signal");
    const auto a = sitcom::Tensor::vector(std::vector<double>(x, x + n));
    const auto b = sitcom::Tensor::vector(std::vector<double>(ref, ref + n));
    *out = sitcom::psnr(a, b);
  });
}

sitcom_status sitcom_ssim(const double* x, const double* ref, size_t height, size_t width, double* out) {
  return guarded([&] {
    need(x, "x");
    need(ref, "ref");
    need(out, "out");
    const size_t n = height * width;
    const sitcom::Tensor a({height, width}, std::vector<double>(x, x + n));
    const sitcom::Tensor b({height, width}, std::vector<double>(ref, ref + n));
    *out = sitcom::ssim(a, b);
  });
}

}  // extern "C"
