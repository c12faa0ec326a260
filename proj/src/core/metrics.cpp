#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace sitcom {

double mse(const Tensor& x, const Tensor& ref) {
  check_same_shape(x, ref, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - ref[i];
    s += d * d;
  }
  return s / static_cast<double>(x.size());
}

double psnr(const Tensor& x, const Tensor& ref, double peak) {
  require(peak > 0.0, "psnr: peak must be positive");
  const double e = mse(x, ref);
  if (e == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / e));
}

double ssim(const Tensor& x, const Tensor& ref, std::size_t window, double peak) {
  check_same_shape(x, ref, "ssim");
  if (x.rank() != 2) fail(ErrorCode::kShapeMismatch, "ssim: expected 2D images, got " + shape_str(x.shape()));
  return ssim(x.reshaped({x.size()}), ref.reshaped({ref.size()}), ImageShape{x.dim(0), x.dim(1)}, window, peak);
}

double ssim(const Tensor& x, const Tensor& ref, ImageShape shape, std::size_t window, double peak) {
  check_same_shape(x, ref, "ssim");
  require(x.size() == shape.numel(), "ssim: layout does not match signal size");
  require(window % 2 == 1, "ssim: window must be odd");
  if (shape.height < window || shape.width < window)
    fail(ErrorCode::kShapeMismatch, "ssim: image " + std::to_string(shape.height) + "x" + std::to_string(shape.width) +
                                        " smaller than window " + std::to_string(window));
  const double c1 = (0.01 * peak) * (0.01 * peak), c2 = (0.03 * peak) * (0.03 * peak);
  const std::size_t W = shape.width;
  const double inv = 1.0 / static_cast<double>(window * window);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + window <= shape.height; ++r)
    for (std::size_t c = 0; c + window <= W; ++c) {
      double mx = 0, my = 0;
      for (std::size_t a = 0; a < window; ++a)
        for (std::size_t b = 0; b < window; ++b) {
          mx += x[(r + a) * W + c + b];
          my += ref[(r + a) * W + c + b];
        }
      mx *= inv;
      my *= inv;
      double vx = 0, vy = 0, cov = 0;
      for (std::size_t a = 0; a < window; ++a)
        for (std::size_t b = 0; b < window; ++b) {
          const double dx = x[(r + a) * W + c + b] - mx, dy = ref[(r + a) * W + c + b] - my;
          vx += dx * dx;
          vy += dy * dy;
          cov += dx * dy;
        }
      vx *= inv;
      vy *= inv;
      cov *= inv;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

double residual_norm(const ProblemInstance& problem, const Tensor& x) {
  require(problem.op != nullptr, "residual_norm: problem has no operator");
  return norm(problem.op->apply(x) - problem.y);
}

MetricReport evaluate_metrics(const ProblemInstance& problem, const Tensor& x, double runtime_seconds) {
  MetricReport r;
  r.runtime_seconds = runtime_seconds;
  r.residual_norm = residual_norm(problem, x);
  if (problem.x_true) {
    r.mse = mse(x, *problem.x_true);
    r.psnr = psnr(x, *problem.x_true);
    const ImageShape s = problem.op->image_shape();
    if (s.height >= kSsimWindow && s.width >= kSsimWindow) r.ssim = ssim(x, *problem.x_true, s);
  } else {
    r.mse = std::nan("");
    r.psnr = std::nan("");
  }
  return r;
}

}  // namespace sitcom
