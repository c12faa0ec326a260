#include "core/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "core/dft.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"

namespace sitcom {

// ---- base -------------------------------------------------------------------

Tensor ForwardOperator::apply(const Tensor& x) const {
  ad::Graph g;
  return apply(g, g.constant(x)).value();
}

Tensor ForwardOperator::adjoint(const Tensor&) const {
  fail(ErrorCode::kInvalidArgument, "operator '" + kind() + "' is nonlinear and has no adjoint");
}

void ForwardOperator::check_signal(const Tensor& x, const char* what) const {
  if (x.rank() != 1 || x.size() != n())
    fail(ErrorCode::kShapeMismatch, std::string(what) + ": signal shape " + shape_str(x.shape()) + " vs expected [" +
                                        std::to_string(n()) + "]");
}

void ForwardOperator::check_measurement(const Tensor& y, const char* what) const {
  if (y.rank() != 1 || y.size() != m())
    fail(ErrorCode::kShapeMismatch, std::string(what) + ": measurement shape " + shape_str(y.shape()) +
                                        " vs expected [" + std::to_string(m()) + "]");
}

namespace {

void check_image(ImageShape s) {
  require(s.height >= 1 && s.width >= 1, "operator: image dimensions must be positive");
}

}  // namespace

// ---- pixel selection --------------------------------------------------------

SelectOperator::SelectOperator(ImageShape shape, std::vector<std::size_t> kept, std::string kind)
    : ForwardOperator(shape, kept.size()), kept_(std::move(kept)), kind_(std::move(kind)) {
  check_image(shape);
  if (kept_.empty()) fail(ErrorCode::kInvalidArgument, kind_ + ": no pixels kept");
  for (std::size_t i = 0; i < kept_.size(); ++i) {
    require(kept_[i] < shape.numel(), kind_ + ": kept index out of range");
    require(i == 0 || kept_[i] > kept_[i - 1], kind_ + ": kept indices must be strictly increasing");
  }
}

ad::Var SelectOperator::apply(ad::Graph&, ad::Var x) const {
  check_signal(x.value(), kind_.c_str());
  return ad::gather(x, kept_);
}

Tensor SelectOperator::adjoint(const Tensor& y) const {
  check_measurement(y, "adjoint");
  Tensor x({n()}, 0.0);
  for (std::size_t j = 0; j < kept_.size(); ++j) x[kept_[j]] = y[j];
  return x;
}

OperatorPtr make_box_mask(ImageShape shape, BoxRect box) {
  check_image(shape);
  if (box.top + box.height > shape.height || box.left + box.width > shape.width)
    fail(ErrorCode::kInvalidArgument, "box-mask: box [" + std::to_string(box.top) + "+" + std::to_string(box.height) +
                                          ", " + std::to_string(box.left) + "+" + std::to_string(box.width) +
                                          "] outside image " + std::to_string(shape.height) + "x" +
                                          std::to_string(shape.width));
  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < shape.height; ++r)
    for (std::size_t c = 0; c < shape.width; ++c) {
      const bool inside = r >= box.top && r < box.top + box.height && c >= box.left && c < box.left + box.width;
      if (!inside) kept.push_back(r * shape.width + c);
    }
  return std::make_shared<SelectOperator>(shape, std::move(kept), "box-mask");
}

OperatorPtr make_random_mask(ImageShape shape, double keep_prob, std::uint64_t seed) {
  check_image(shape);
  require(keep_prob > 0.0 && keep_prob <= 1.0, "random-mask: keep probability must lie in (0, 1]");
  Rng rng(seed, StreamRole::kOperator);
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < shape.numel(); ++i)
    if (rng.uniform() < keep_prob) kept.push_back(i);
  return std::make_shared<SelectOperator>(shape, std::move(kept), "random-mask");
}

OperatorPtr make_random_mask_count(ImageShape shape, std::size_t count, std::uint64_t seed) {
  check_image(shape);
  require(count >= 1 && count <= shape.numel(), "random-mask: count must lie in [1, n]");
  Rng rng(seed, StreamRole::kOperator);
  std::vector<std::size_t> idx(shape.numel());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  // partial Fisher-Yates
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(idx.size() - i) - 1));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return std::make_shared<SelectOperator>(shape, std::move(idx), "random-mask");
}

// ---- blur -------------------------------------------------------------------

namespace {

long reflect(long i, long n) {
  if (n == 1) return 0;
  if (i < 0) i = -i;
  if (i >= n) i = 2 * (n - 1) - i;
  return i;
}

}  // namespace

BlurOperator::BlurOperator(ImageShape shape, Tensor kernel)
    : ForwardOperator(shape, shape.numel()), kernel_(std::move(kernel)) {
  check_image(shape);
  if (kernel_.rank() != 2 || kernel_.dim(0) % 2 == 0 || kernel_.dim(1) % 2 == 0)
    fail(ErrorCode::kInvalidArgument, "blur: kernel must be 2D and odd-sized, got " + shape_str(kernel_.shape()));
  double s = 0.0;
  for (double v : kernel_.values()) s += v;
  require(std::abs(s - 1.0) < 1e-9, "blur: kernel must sum to 1");
  const std::size_t rh = kernel_.dim(0) / 2, rw = kernel_.dim(1) / 2;
  require((shape.height == 1 ? rh == 0 : rh < shape.height) && (shape.width == 1 ? rw == 0 : rw < shape.width),
          "blur: kernel " + shape_str(kernel_.shape()) + " too large for reflect padding");
}

ad::Var BlurOperator::apply(ad::Graph& g, ad::Var x) const {
  check_signal(x.value(), "blur");
  const auto& s = image_shape();
  ad::Var img = ad::reshape(x, {s.height, s.width});
  return ad::reshape(ad::conv2d(img, g.constant(kernel_), ad::Padding::kReflect), {n()});
}

Tensor BlurOperator::adjoint(const Tensor& y) const {
  check_measurement(y, "adjoint");
  const long H = static_cast<long>(image_shape().height), W = static_cast<long>(image_shape().width);
  const long kh = static_cast<long>(kernel_.dim(0)), kw = static_cast<long>(kernel_.dim(1));
  const long rh = kh / 2, rw = kw / 2;
  Tensor x({n()}, 0.0);
  // Forward: y[i,j] = sum_{a,b} k[a,b] x[refl(i+rh-a), refl(j+rw-b)]; scatter back.
  for (long i = 0; i < H; ++i)
    for (long j = 0; j < W; ++j) {
      const double yv = y[static_cast<std::size_t>(i * W + j)];
      for (long a = 0; a < kh; ++a) {
        const long si = reflect(i + rh - a, H);
        for (long b = 0; b < kw; ++b) {
          const long sj = reflect(j + rw - b, W);
          x[static_cast<std::size_t>(si * W + sj)] += kernel_[static_cast<std::size_t>(a * kw + b)] * yv;
        }
      }
    }
  return x;
}

Tensor gaussian_kernel(std::size_t size, double sigma) {
  require(size % 2 == 1, "gaussian_kernel: size must be odd");
  require(sigma > 0.0, "gaussian_kernel: sigma must be positive");
  Tensor k({size, size});
  const double c = static_cast<double>(size / 2);
  double s = 0.0;
  for (std::size_t a = 0; a < size; ++a)
    for (std::size_t b = 0; b < size; ++b) {
      const double da = a - c, db = b - c;
      s += k[a * size + b] = std::exp(-(da * da + db * db) / (2.0 * sigma * sigma));
    }
  k *= 1.0 / s;
  return k;
}

Tensor motion_kernel(std::size_t size, std::uint64_t seed) {
  require(size % 2 == 1, "motion_kernel: size must be odd");
  Rng rng(seed, StreamRole::kOperator);
  const double theta = std::numbers::pi * rng.uniform();
  const double s_long = std::max(0.5, static_cast<double>(size) / 3.0), s_short = 0.5;
  const double ct = std::cos(theta), st = std::sin(theta);
  Tensor k({size, size});
  const double c = static_cast<double>(size / 2);
  double s = 0.0;
  for (std::size_t a = 0; a < size; ++a)
    for (std::size_t b = 0; b < size; ++b) {
      const double da = a - c, db = b - c;
      const double u = ct * da + st * db, v = -st * da + ct * db;
      s += k[a * size + b] = std::exp(-0.5 * (u * u / (s_long * s_long) + v * v / (s_short * s_short)));
    }
  k *= 1.0 / s;
  return k;
}

// ---- downsample -------------------------------------------------------------

DownsampleOperator::DownsampleOperator(ImageShape shape, std::size_t factor)
    : ForwardOperator(shape, factor == 0 ? 1 : shape.numel() / (factor * factor)), factor_(factor) {
  check_image(shape);
  require(factor >= 1, "downsample: factor must be >= 1");
  if (shape.height % factor != 0 || shape.width % factor != 0)
    fail(ErrorCode::kInvalidArgument, "downsample: " + std::to_string(shape.height) + "x" + std::to_string(shape.width) +
                                          " not divisible by factor " + std::to_string(factor));
}

Tensor DownsampleOperator::forward_values(const Tensor& x) const {
  check_signal(x, "downsample");
  const std::size_t W = image_shape().width, f = factor_, Wo = W / f;
  Tensor y({m()}, 0.0);
  const double inv = 1.0 / static_cast<double>(f * f);
  for (std::size_t r = 0; r < image_shape().height; ++r)
    for (std::size_t c = 0; c < W; ++c) y[(r / f) * Wo + c / f] += inv * x[r * W + c];
  return y;
}

Tensor DownsampleOperator::adjoint(const Tensor& y) const {
  check_measurement(y, "adjoint");
  const std::size_t W = image_shape().width, f = factor_, Wo = W / f;
  Tensor x({n()});
  const double inv = 1.0 / static_cast<double>(f * f);
  for (std::size_t r = 0; r < image_shape().height; ++r)
    for (std::size_t c = 0; c < W; ++c) x[r * W + c] = inv * y[(r / f) * Wo + c / f];
  return x;
}

ad::Var DownsampleOperator::apply(ad::Graph& g, ad::Var x) const {
  return g.record("downsample", {x}, forward_values(x.value()), [this](const ad::BackwardContext& c) {
    if (c.grad_in[0]) *c.grad_in[0] += adjoint(c.grad_out);
  });
}

// ---- Fourier row mask -------------------------------------------------------

FourierMaskOperator::FourierMaskOperator(ImageShape shape, std::vector<std::size_t> rows)
    : ForwardOperator(shape, 2 * rows.size() * shape.width), rows_(std::move(rows)) {
  check_image(shape);
  if (rows_.empty()) fail(ErrorCode::kInvalidArgument, "fourier: empty row mask");
  std::sort(rows_.begin(), rows_.end());
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    require(rows_[i] < shape.height, "fourier: row index out of range");
    require(i == 0 || rows_[i] != rows_[i - 1], "fourier: duplicate row");
  }
}

Tensor FourierMaskOperator::forward_values(const Tensor& x) const {
  check_signal(x, "fourier");
  const std::size_t H = image_shape().height, W = image_shape().width;
  std::vector<Complex> in(x.values().begin(), x.values().end());
  const auto F = partial_dft2(in, H, W, H, W, H, W, -1, 1.0 / std::sqrt(static_cast<double>(H * W)));
  Tensor y({m()});
  std::size_t o = 0;
  for (std::size_t r : rows_)
    for (std::size_t c = 0; c < W; ++c) {
      y[o++] = F[r * W + c].real();
      y[o++] = F[r * W + c].imag();
    }
  return y;
}

Tensor FourierMaskOperator::adjoint(const Tensor& y) const {
  check_measurement(y, "adjoint");
  const std::size_t H = image_shape().height, W = image_shape().width;
  std::vector<Complex> z(H * W);
  std::size_t o = 0;
  for (std::size_t r : rows_)
    for (std::size_t c = 0; c < W; ++c, o += 2) z[r * W + c] = Complex(y[o], y[o + 1]);
  const auto back = partial_dft2(z, H, W, H, W, H, W, +1, 1.0 / std::sqrt(static_cast<double>(H * W)));
  Tensor x({n()});
  for (std::size_t i = 0; i < n(); ++i) x[i] = back[i].real();
  return x;
}

ad::Var FourierMaskOperator::apply(ad::Graph& g, ad::Var x) const {
  return g.record("fourier_mask", {x}, forward_values(x.value()), [this](const ad::BackwardContext& c) {
    if (c.grad_in[0]) *c.grad_in[0] += adjoint(c.grad_out);
  });
}

OperatorPtr make_fourier_mask(ImageShape shape, FourierPattern pattern, std::size_t acceleration,
                              std::uint64_t seed) {
  check_image(shape);
  require(acceleration >= 1, "fourier: acceleration must be >= 1");
  const std::size_t H = shape.height;
  std::vector<std::size_t> rows;
  if (pattern == FourierPattern::kUniformRows) {
    for (std::size_t u = 0; u < H; u += acceleration) rows.push_back(u);
  } else {
    const std::size_t count = std::max<std::size_t>(1, H / acceleration);
    const double width = std::max(1.0, static_cast<double>(H) / 6.0);
    std::vector<double> w(H);
    for (std::size_t u = 0; u < H; ++u) {
      const double f = u <= H / 2 ? static_cast<double>(u) : static_cast<double>(u) - static_cast<double>(H);
      w[u] = std::exp(-f * f / (2.0 * width * width));
    }
    rows.push_back(0);
    w[0] = 0.0;
    Rng rng(seed, StreamRole::kOperator);
    while (rows.size() < count) {
      double total = 0.0;
      for (double v : w) total += v;
      double r = rng.uniform() * total;
      std::size_t pick = 0;
      for (; pick + 1 < H; ++pick) {
        if (w[pick] > 0.0 && r < w[pick]) break;
        r -= w[pick];
      }
      while (w[pick] == 0.0) pick = (pick + H - 1) % H;  // guard against rounding at the tail
      rows.push_back(pick);
      w[pick] = 0.0;
    }
  }
  return std::make_shared<FourierMaskOperator>(shape, std::move(rows));
}

// ---- phase retrieval --------------------------------------------------------

namespace {

std::size_t padded(std::size_t n, double os) {
  if (n == 1) return 1;
  return static_cast<std::size_t>(std::ceil(os * static_cast<double>(n) - 1e-9));
}

}  // namespace

PhaseRetrievalOperator::PhaseRetrievalOperator(ImageShape shape, double oversample)
    : ForwardOperator(shape, (oversample >= 1.0 ? padded(shape.height, oversample) * padded(shape.width, oversample) : 1)),
      P_(oversample >= 1.0 ? padded(shape.height, oversample) : 1),
      Q_(oversample >= 1.0 ? padded(shape.width, oversample) : 1) {
  check_image(shape);
  require(oversample >= 1.0, "phase-retrieval: oversample must be >= 1");
}

ad::Var PhaseRetrievalOperator::apply(ad::Graph&, ad::Var x) const {
  check_signal(x.value(), "phase-retrieval");
  const auto& s = image_shape();
  return ad::reshape(ad::dft_magnitude(ad::reshape(x, {s.height, s.width}), P_, Q_), {m()});
}

// ---- dynamic range ----------------------------------------------------------

DynamicRangeClipOperator::DynamicRangeClipOperator(ImageShape shape, double factor)
    : ForwardOperator(shape, shape.numel()), factor_(factor) {
  check_image(shape);
  require(factor > 0.0, "hdr: factor must be positive");
}

ad::Var DynamicRangeClipOperator::apply(ad::Graph&, ad::Var x) const {
  check_signal(x.value(), "hdr");
  return ad::clip(ad::scale(x, factor_), -1.0, 1.0);
}

// ---- scaled -----------------------------------------------------------------

ScaledOperator::ScaledOperator(OperatorPtr inner, double c)
    : ForwardOperator(inner ? inner->image_shape() : ImageShape{}, inner ? inner->m() : 1), inner_(std::move(inner)), c_(c) {
  require(inner_ != nullptr, "scaled operator: null inner operator");
}

ad::Var ScaledOperator::apply(ad::Graph& g, ad::Var x) const { return ad::scale(inner_->apply(g, x), c_); }

Tensor ScaledOperator::adjoint(const Tensor& y) const { return c_ * inner_->adjoint(y); }

// ---- measurements -----------------------------------------------------------

ProblemInstance synthesize_measurements(const Tensor& x_true, OperatorPtr op, const NoiseSpec& noise,
                                        std::uint64_t seed) {
  require(op != nullptr, "synthesize_measurements: null operator");
  require(noise.sigma_y >= 0.0 && std::isfinite(noise.sigma_y), "synthesize_measurements: sigma_y must be >= 0");
  ProblemInstance p;
  p.x_true = x_true;
  p.noise = noise;
  p.op = op;
  p.seed = seed;
  Tensor z = op->apply(x_true);
  Rng rng(seed, StreamRole::kMeasurement);
  if (noise.kind == NoiseKind::kGaussian) {
    if (noise.sigma_y > 0.0)
      for (auto& v : z.data()) v += noise.sigma_y * rng.normal();
  } else {
    require(noise.lambda_y > 0.0, "synthesize_measurements: poisson rate must be positive");
    double lo = 0.0;
    for (double v : z.values()) lo = std::min(lo, v);
    const double s = std::max(1.0, -lo);
    for (auto& v : z.data()) {
      const double rate = noise.lambda_y * (v + s) / (2.0 * s);
      std::poisson_distribution<long long> pois(rate);
      const double k = rate > 0.0 ? static_cast<double>(pois(rng.engine())) : 0.0;
      v = k * 2.0 * s / noise.lambda_y - s;
    }
  }
  p.y = std::move(z);
  return p;
}

}  // namespace sitcom
