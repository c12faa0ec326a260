#ifndef SITCOM_SITCOM_H
#define SITCOM_SITCOM_H

#include <stddef.h>

#if defined(_WIN32)
#define SITCOM_API __declspec(dllexport)
#else
#define SITCOM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sitcom_status {
  SITCOM_OK = 0,
  SITCOM_ERR_INVALID_ARGUMENT = 1,
  SITCOM_ERR_SHAPE = 2,
  SITCOM_ERR_NUMERIC = 3,
  SITCOM_ERR_IO = 4,
  SITCOM_ERR_CONFIG = 5,
  SITCOM_ERR_INTERNAL = 6
} sitcom_status;

/* Message of the last failure on the calling thread ("" if none). */
SITCOM_API const char* sitcom_last_error(void);
SITCOM_API const char* sitcom_status_name(sitcom_status s);
SITCOM_API const char* sitcom_version(void);

/* Strings returned through char** out-params are owned by the caller. */
SITCOM_API void sitcom_string_free(char* s);

/* ---- experiment configs ---- */

typedef struct sitcom_config sitcom_config;

SITCOM_API sitcom_status sitcom_config_parse(const char* json, sitcom_config** out);
SITCOM_API sitcom_status sitcom_config_load(const char* path, sitcom_config** out);
/* Fully explicit JSON with every default filled in. */
SITCOM_API sitcom_status sitcom_config_resolved(const sitcom_config* cfg, char** json_out);
SITCOM_API sitcom_status sitcom_config_fingerprint(const sitcom_config* cfg, char** out);
SITCOM_API void sitcom_config_free(sitcom_config* cfg);

/* ---- runs ---- */

typedef struct sitcom_result sitcom_result;

/* output_root may be NULL: $SITCOM_OUTPUT_ROOT, else ./sitcom-out. */
SITCOM_API sitcom_status sitcom_run(const sitcom_config* cfg, const char* output_root, sitcom_result** out);
/* axis: "n-k", "lambda" or "delta". */
SITCOM_API sitcom_status sitcom_sweep(const sitcom_config* cfg, const char* axis, const char* output_root,
                                      sitcom_result** out);

/* 1 when every acceptance-tagged check passed. */
SITCOM_API int sitcom_result_acceptance_passed(const sitcom_result* r);
SITCOM_API const char* sitcom_result_dir(const sitcom_result* r);
SITCOM_API size_t sitcom_result_row_count(const sitcom_result* r);
/* Number of rows whose run raised an error. */
SITCOM_API size_t sitcom_result_error_count(const sitcom_result* r);
SITCOM_API size_t sitcom_result_check_count(const sitcom_result* r);
/* Borrowed strings, valid until sitcom_result_free. Any out pointer may be NULL. */
SITCOM_API sitcom_status sitcom_result_check(const sitcom_result* r, size_t index, const char** name,
                                             int* acceptance, int* passed, double* observed, double* threshold,
                                             const char** detail);
SITCOM_API sitcom_status sitcom_result_summary_csv(const sitcom_result* r, char** out);
/* Mean of metric (psnr|ssim|mse|residual|runtime|iterations) for a label. */
SITCOM_API sitcom_status sitcom_result_mean(const sitcom_result* r, const char* label, const char* metric,
                                            double* out);
SITCOM_API void sitcom_result_free(sitcom_result* r);

/* ---- training and reporting ---- */

typedef struct sitcom_train_info {
  size_t iterations;
  double first_loss;
  double last_loss;
  double baseline_loss; /* eps == 0 on a held-out batch */
  double final_loss;    /* trained model on the same batch */
} sitcom_train_info;

SITCOM_API sitcom_status sitcom_train(const sitcom_config* cfg, const char* output_root, sitcom_train_info* info,
                                      char** checkpoint_path_out);

/* Reads results.csv, writes summary.csv next to it; summary_out may be NULL. */
SITCOM_API sitcom_status sitcom_report(const char* results_csv_path, char** summary_out);

/* ---- metrics on raw buffers (values in [-1, 1], peak 2) ---- */

SITCOM_API sitcom_status sitcom_psnr(const double* x, const double* ref, size_t n, double* out);
SITCOM_API sitcom_status sitcom_ssim(const double* x, const double* ref, size_t height, size_t width, double* out);

#ifdef __cplusplus
}
#endif

#endif
