#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <sitcom/sitcom.h>

namespace fs = std::filesystem;

namespace {

const char* kConfig = R"({
  "name": "capi",
  "problems": 2,
  "write_images": false,
  "dataset": {"kind": "gaussian-field", "side": 4},
  "model": {"kind": "analytic"},
  "operator": {"kind": "random-mask", "count": 8},
  "noise": {"sigma_y": 0.05},
  "samplers": [{"label": "s", "variant": "sitcom", "N": 5, "K": 4}],
  "checks": [{"kind": "min", "label": "s", "metric": "psnr", "value": -100}],
  "sweep": {"K": [2, 4], "N": [5]}
})";

std::string take(char* s) {
  std::string out = s ? s : "";
  sitcom_string_free(s);
  return out;
}

std::string scratch() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const fs::path d = fs::temp_directory_path() / "sitcom-capi" / info->name();
  fs::remove_all(d);
  fs::create_directories(d);
  return d.string();
}

}  // namespace

TEST(CApi, StatusNames) {
  EXPECT_STREQ(sitcom_status_name(SITCOM_OK), "ok");
  EXPECT_STREQ(sitcom_status_name(SITCOM_ERR_CONFIG), "config error");
  EXPECT_STRNE(sitcom_version(), "");
}

TEST(CApi, ParseErrorsMapToConfigStatus) {
  sitcom_config* cfg = nullptr;
  std::string typo = kConfig;
  typo.replace(typo.find("\"name\""), 6, "\"nmae\"");
  EXPECT_EQ(sitcom_config_parse(typo.c_str(), &cfg), SITCOM_ERR_CONFIG);
  EXPECT_EQ(cfg, nullptr);
  EXPECT_NE(std::string(sitcom_last_error()).find("nmae"), std::string::npos);
  EXPECT_EQ(sitcom_config_parse("{", &cfg), SITCOM_ERR_CONFIG);
  EXPECT_EQ(sitcom_config_parse(nullptr, &cfg), SITCOM_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(sitcom_config_load("/nonexistent/cfg.json", &cfg), SITCOM_ERR_IO);
  ASSERT_EQ(sitcom_config_parse(kConfig, &cfg), SITCOM_OK);
  EXPECT_STREQ(sitcom_last_error(), "");
  sitcom_config_free(cfg);
}

TEST(CApi, ResolvedAndFingerprint) {
  sitcom_config* cfg = nullptr;
  ASSERT_EQ(sitcom_config_parse(kConfig, &cfg), SITCOM_OK);
  char* json = nullptr;
  char* fp = nullptr;
  ASSERT_EQ(sitcom_config_resolved(cfg, &json), SITCOM_OK);
  ASSERT_EQ(sitcom_config_fingerprint(cfg, &fp), SITCOM_OK);
  const std::string resolved = take(json), print = take(fp);
  EXPECT_EQ(print.size(), 16u);
  sitcom_config* again = nullptr;
  ASSERT_EQ(sitcom_config_parse(resolved.c_str(), &again), SITCOM_OK);
  ASSERT_EQ(sitcom_config_fingerprint(again, &fp), SITCOM_OK);
  EXPECT_EQ(take(fp), print);
  sitcom_config_free(again);
  sitcom_config_free(cfg);
}

TEST(CApi, RunSweepAndReport) {
  const std::string root = scratch();
  sitcom_config* cfg = nullptr;
  ASSERT_EQ(sitcom_config_parse(kConfig, &cfg), SITCOM_OK);
  sitcom_result* r = nullptr;
  ASSERT_EQ(sitcom_run(cfg, root.c_str(), &r), SITCOM_OK) << sitcom_last_error();
  EXPECT_EQ(sitcom_result_row_count(r), 2u);
  EXPECT_EQ(sitcom_result_error_count(r), 0u);
  EXPECT_EQ(sitcom_result_acceptance_passed(r), 1);
  ASSERT_EQ(sitcom_result_check_count(r), 1u);
  int passed = 0;
  double observed = 0;
  const char* name = nullptr;
  ASSERT_EQ(sitcom_result_check(r, 0, &name, nullptr, &passed, &observed, nullptr, nullptr), SITCOM_OK);
  EXPECT_EQ(passed, 1);
  double mean = 0;
  ASSERT_EQ(sitcom_result_mean(r, "s", "psnr", &mean), SITCOM_OK);
  EXPECT_EQ(mean, observed);
  EXPECT_EQ(sitcom_result_mean(r, "nope", "psnr", &mean), SITCOM_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(sitcom_result_check(r, 5, nullptr, nullptr, nullptr, nullptr, nullptr, nullptr),
            SITCOM_ERR_INVALID_ARGUMENT);
  char* summary = nullptr;
  ASSERT_EQ(sitcom_result_summary_csv(r, &summary), SITCOM_OK);
  const std::string s = take(summary);
  const std::string results = (fs::path(sitcom_result_dir(r)) / "results.csv").string();
  ASSERT_EQ(sitcom_report(results.c_str(), &summary), SITCOM_OK);
  EXPECT_EQ(take(summary), s);
  sitcom_result_free(r);

  ASSERT_EQ(sitcom_sweep(cfg, "n-k", root.c_str(), &r), SITCOM_OK) << sitcom_last_error();
  EXPECT_EQ(sitcom_result_row_count(r), 4u);
  sitcom_result_free(r);
  EXPECT_EQ(sitcom_sweep(cfg, "gamma", root.c_str(), &r), SITCOM_ERR_CONFIG);
  sitcom_config_free(cfg);
}

TEST(CApi, OutputRootFromEnvironment) {
  const std::string root = scratch();
  setenv("SITCOM_OUTPUT_ROOT", root.c_str(), 1);
  sitcom_config* cfg = nullptr;
  ASSERT_EQ(sitcom_config_parse(kConfig, &cfg), SITCOM_OK);
  sitcom_result* r = nullptr;
  ASSERT_EQ(sitcom_run(cfg, nullptr, &r), SITCOM_OK);
  EXPECT_EQ(fs::path(sitcom_result_dir(r)), fs::path(root) / "capi");
  EXPECT_TRUE(fs::exists(fs::path(root) / "capi" / "results.csv"));
  sitcom_result_free(r);
  sitcom_config_free(cfg);
  unsetenv("SITCOM_OUTPUT_ROOT");
}

TEST(CApi, Metrics) {
  const std::vector<double> a(10, 0.2), b(10, 0.0);
  double v = 0;
  ASSERT_EQ(sitcom_psnr(a.data(), b.data(), a.size(), &v), SITCOM_OK);
  EXPECT_NEAR(v, 20.0, 1e-12);
  ASSERT_EQ(sitcom_psnr(a.data(), a.data(), a.size(), &v), SITCOM_OK);
  EXPECT_EQ(v, 200.0);
  EXPECT_EQ(sitcom_psnr(nullptr, b.data(), 10, &v), SITCOM_ERR_INVALID_ARGUMENT);
  std::vector<double> img(64);
  for (std::size_t i = 0; i < 64; ++i) img[i] = std::sin(0.3 * double(i));
  ASSERT_EQ(sitcom_ssim(img.data(), img.data(), 8, 8, &v), SITCOM_OK);
  EXPECT_NEAR(v, 1.0, 1e-15);
  EXPECT_EQ(sitcom_ssim(img.data(), img.data(), 4, 16, &v), SITCOM_ERR_SHAPE);
  EXPECT_NE(std::string(sitcom_last_error()), "");
}

TEST(CApi, TrainReportsLosses) {
  const std::string root = scratch();
  sitcom_config* cfg = nullptr;
  ASSERT_EQ(sitcom_config_parse(R"({
    "name": "tiny",
    "dataset": {"kind": "gmm-2d"},
    "operator": {"kind": "random-mask", "keep_prob": 0.5},
    "model": {"kind": "mlp", "hidden": 16, "layers": 2, "data_size": 256, "train": {"iters": 100, "batch": 32}}
  })",
                                &cfg),
            SITCOM_OK)
      << sitcom_last_error();
  sitcom_train_info info{};
  char* path = nullptr;
  ASSERT_EQ(sitcom_train(cfg, root.c_str(), &info, &path), SITCOM_OK) << sitcom_last_error();
  EXPECT_TRUE(fs::exists(take(path)));
  EXPECT_EQ(info.iterations, 100u);
  EXPECT_TRUE(std::isfinite(info.final_loss));
  EXPECT_EQ(sitcom_train(nullptr, root.c_str(), &info, nullptr), SITCOM_ERR_INVALID_ARGUMENT);
  sitcom_config_free(cfg);
}
