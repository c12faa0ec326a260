// sitcom: run, sweep, train and report experiments through the C API.
// Exit status: 0 ok, 1 an acceptance check failed, 2 usage or runtime error.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "sitcom/sitcom.h"

namespace {

constexpr int kExitAcceptance = 1;
constexpr int kExitError = 2;

int report_error(sitcom_status s, const std::string& what) {
  std::fprintf(stderr, "sitcom: %s failed (%s): %s\n", what.c_str(), sitcom_status_name(s), sitcom_last_error());
  return kExitError;
}

int print_outcome(sitcom_result* r) {
  std::printf("output: %s\n", sitcom_result_dir(r));
  std::printf("runs: %zu (%zu failed)\n", sitcom_result_row_count(r), sitcom_result_error_count(r));
  char* summary = nullptr;
  if (sitcom_result_summary_csv(r, &summary) == SITCOM_OK) {
    std::fputs(summary, stdout);
    sitcom_string_free(summary);
  }
  for (size_t i = 0; i < sitcom_result_check_count(r); ++i) {
    const char *name = nullptr, *detail = nullptr;
    int acceptance = 0, passed = 0;
    double observed = 0, threshold = 0;
    sitcom_result_check(r, i, &name, &acceptance, &passed, &observed, &threshold, &detail);
    std::printf("%s %s%s: observed %.6g (%s)\n", passed ? "PASS" : "FAIL", name, acceptance ? " [acceptance]" : "",
                observed, detail);
  }
  const int code = sitcom_result_acceptance_passed(r) ? 0 : kExitAcceptance;
  sitcom_result_free(r);
  return code;
}

sitcom_config* load(const std::string& path, int& code) {
  sitcom_config* cfg = nullptr;
  const sitcom_status s = sitcom_config_load(path.c_str(), &cfg);
  if (s != SITCOM_OK) code = report_error(s, "loading " + path);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion samplers for inverse problems.\n"
               "Outputs go under $SITCOM_OUTPUT_ROOT (default ./sitcom-out)."};
  app.require_subcommand(1);
  app.set_version_flag("--version", sitcom_version());

  std::string config_path, axis, results_path;
  auto* run = app.add_subcommand("run", "run every sampler of a config and evaluate its checks");
  run->add_option("config", config_path, "experiment config (json)")->required()->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "grid over one hyperparameter axis");
  sweep->add_option("config", config_path, "experiment config (json)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--axis", axis, "n-k, lambda or delta")
      ->required()
      ->check(CLI::IsMember({"n-k", "lambda", "delta"}));

  auto* train = app.add_subcommand("train", "train the config's score network and save a checkpoint");
  train->add_option("config", config_path, "experiment config (json)")->required()->check(CLI::ExistingFile);

  auto* rep = app.add_subcommand("report", "recompute summary.csv from results.csv");
  rep->add_option("results", results_path, "results.csv")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  int code = 0;
  if (*rep) {
    char* summary = nullptr;
    const sitcom_status s = sitcom_report(results_path.c_str(), &summary);
    if (s != SITCOM_OK) return report_error(s, "report");
    std::fputs(summary, stdout);
    sitcom_string_free(summary);
    return 0;
  }

  sitcom_config* cfg = load(config_path, code);
  if (!cfg) return code;

  if (*train) {
    sitcom_train_info info{};
    char* path = nullptr;
    const sitcom_status s = sitcom_train(cfg, nullptr, &info, &path);
    sitcom_config_free(cfg);
    if (s != SITCOM_OK) return report_error(s, "train");
    std::printf("checkpoint: %s\n", path);
    std::printf("iterations: %zu\nloss: first %.6g last %.6g\n", info.iterations, info.first_loss, info.last_loss);
    std::printf("held-out loss: %.6g (eps=0 baseline %.6g)\n", info.final_loss, info.baseline_loss);
    sitcom_string_free(path);
    return 0;
  }

  sitcom_result* result = nullptr;
  const sitcom_status s =
      *sweep ? sitcom_sweep(cfg, axis.c_str(), nullptr, &result) : sitcom_run(cfg, nullptr, &result);
  sitcom_config_free(cfg);
  if (s != SITCOM_OK) return report_error(s, *sweep ? "sweep" : "run");
  return print_outcome(result);
}
