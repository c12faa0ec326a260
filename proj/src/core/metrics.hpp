#pragma once

#include <optional>

#include "core/operators.hpp"
#include "core/tensor.hpp"

namespace sitcom {

inline constexpr double kPsnrCap = 200.0;
inline constexpr double kDefaultPeak = 2.0;  // signals live in [-1, 1]
inline constexpr std::size_t kSsimWindow = 7;

double mse(const Tensor& x, const Tensor& ref);
// 10 log10(peak^2 / mse); kPsnrCap when mse == 0.
double psnr(const Tensor& x, const Tensor& ref, double peak = kDefaultPeak);

// Mean SSIM over all fully contained window x window patches (uniform
// weights, population statistics), C1 = (0.01 peak)^2, C2 = (0.03 peak)^2.
double ssim(const Tensor& x, const Tensor& ref, std::size_t window = kSsimWindow, double peak = kDefaultPeak);
// Flat signals with an explicit layout.
double ssim(const Tensor& x, const Tensor& ref, ImageShape shape, std::size_t window = kSsimWindow,
            double peak = kDefaultPeak);

// ||A(x) - y||
double residual_norm(const ProblemInstance& problem, const Tensor& x);

struct MetricReport {
  double psnr = 0.0;
  std::optional<double> ssim;
  double mse = 0.0;
  double residual_norm = 0.0;
  double runtime_seconds = 0.0;
};

// psnr/mse/ssim need problem.x_true; ssim is skipped when the image is
// smaller than the window.
MetricReport evaluate_metrics(const ProblemInstance& problem, const Tensor& x, double runtime_seconds);

}  // namespace sitcom
