#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/autodiff.hpp"
#include "core/tensor.hpp"

namespace sitcom {

// Signals are flat [n] vectors; image operators know their [H, W] layout.
struct ImageShape {
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t numel() const { return height * width; }
};

class ForwardOperator {
 public:
  virtual ~ForwardOperator() = default;

  virtual std::string kind() const = 0;
  virtual bool is_linear() const = 0;
  std::size_t n() const { return shape_.numel(); }
  std::size_t m() const { return m_; }
  const ImageShape& image_shape() const { return shape_; }

  // Differentiable application to x[n]; returns [m].
  virtual ad::Var apply(ad::Graph& g, ad::Var x) const = 0;
  Tensor apply(const Tensor& x) const;
  // Explicit adjoint, implemented independently of the autodiff backward.
  // Nonlinear operators throw.
  virtual Tensor adjoint(const Tensor& y) const;

 protected:
  ForwardOperator(ImageShape shape, std::size_t m) : shape_(shape), m_(m) {}
  void check_signal(const Tensor& x, const char* what) const;
  void check_measurement(const Tensor& y, const char* what) const;

 private:
  ImageShape shape_;
  std::size_t m_;
};

using OperatorPtr = std::shared_ptr<const ForwardOperator>;

// Keeps an arbitrary subset of pixels (in increasing index order).
class SelectOperator final : public ForwardOperator {
 public:
  SelectOperator(ImageShape shape, std::vector<std::size_t> kept, std::string kind);
  std::string kind() const override { return kind_; }
  bool is_linear() const override { return true; }
  ad::Var apply(ad::Graph& g, ad::Var x) const override;
  using ForwardOperator::apply;
  Tensor adjoint(const Tensor& y) const override;
  const std::vector<std::size_t>& kept() const { return kept_; }

 private:
  std::vector<std::size_t> kept_;
  std::string kind_;
};

struct BoxRect {
  std::size_t top = 0, left = 0, height = 0, width = 0;
};

// Drops the pixels inside `box` (an empty box keeps everything).
OperatorPtr make_box_mask(ImageShape shape, BoxRect box);
// Keeps each pixel with probability keep_prob; the mask is drawn once from seed.
OperatorPtr make_random_mask(ImageShape shape, double keep_prob, std::uint64_t seed);
// Keeps exactly `count` pixels chosen uniformly without replacement.
OperatorPtr make_random_mask_count(ImageShape shape, std::size_t count, std::uint64_t seed);

// "Same"-size convolution with reflect padding.
class BlurOperator final : public ForwardOperator {
 public:
  BlurOperator(ImageShape shape, Tensor kernel);
  std::string kind() const override { return "blur"; }
  bool is_linear() const override { return true; }
  ad::Var apply(ad::Graph& g, ad::Var x) const override;
  using ForwardOperator::apply;
  Tensor adjoint(const Tensor& y) const override;
  const Tensor& kernel() const { return kernel_; }

 private:
  Tensor kernel_;
};

// Normalized isotropic Gaussian kernel of odd `size`.
Tensor gaussian_kernel(std::size_t size, double sigma);
// Stand-in for a motion kernel: normalized anisotropic Gaussian with a seeded
// orientation, long axis size/3, short axis 0.5.
Tensor motion_kernel(std::size_t size, std::uint64_t seed);

// Block averaging by `factor` in both directions.
class DownsampleOperator final : public ForwardOperator {
 public:
  DownsampleOperator(ImageShape shape, std::size_t factor);
  std::string kind() const override { return "downsample"; }
  bool is_linear() const override { return true; }
  ad::Var apply(ad::Graph& g, ad::Var x) const override;
  using ForwardOperator::apply;
  Tensor adjoint(const Tensor& y) const override;
  Tensor forward_values(const Tensor& x) const;

 private:
  std::size_t factor_;
};

enum class FourierPattern { kUniformRows, kGaussianRows };

// Orthonormal 2D DFT restricted to a set of frequency rows, returned as
// interleaved (Re, Im) pairs: m = 2 * rows * W.
class FourierMaskOperator final : public ForwardOperator {
 public:
  FourierMaskOperator(ImageShape shape, std::vector<std::size_t> rows);
  std::string kind() const override { return "fourier"; }
  bool is_linear() const override { return true; }
  ad::Var apply(ad::Graph& g, ad::Var x) const override;
  using ForwardOperator::apply;
  Tensor adjoint(const Tensor& y) const override;
  Tensor forward_values(const Tensor& x) const;
  const std::vector<std::size_t>& rows() const { return rows_; }

 private:
  std::vector<std::size_t> rows_;
};

// uniform-rows keeps rows u with u % acceleration == 0. gaussian-rows keeps
// max(1, H / acceleration) rows drawn without replacement with weights
// decaying in |frequency|; the zero-frequency row is always kept.
OperatorPtr make_fourier_mask(ImageShape shape, FourierPattern pattern, std::size_t acceleration,
                              std::uint64_t seed);

// |DFT| of x zero-padded to ceil(oversample * H) x ceil(oversample * W)
// (a height-1 signal is padded along its length only).
class PhaseRetrievalOperator final : public ForwardOperator {
 public:
  PhaseRetrievalOperator(ImageShape shape, double oversample);
  std::string kind() const override { return "phase-retrieval"; }
  bool is_linear() const override { return false; }
  ad::Var apply(ad::Graph& g, ad::Var x) const override;
  using ForwardOperator::apply;
  std::size_t padded_rows() const { return P_; }
  std::size_t padded_cols() const { return Q_; }

 private:
  std::size_t P_, Q_;
};

// y = clip(factor * x, -1, 1)
class DynamicRangeClipOperator final : public ForwardOperator {
 public:
  DynamicRangeClipOperator(ImageShape shape, double factor);
  std::string kind() const override { return "hdr"; }
  bool is_linear() const override { return false; }
  ad::Var apply(ad::Graph& g, ad::Var x) const override;
  using ForwardOperator::apply;

 private:
  double factor_;
};

// c * A
class ScaledOperator final : public ForwardOperator {
 public:
  ScaledOperator(OperatorPtr inner, double c);
  std::string kind() const override { return inner_->kind(); }
  bool is_linear() const override { return inner_->is_linear(); }
  ad::Var apply(ad::Graph& g, ad::Var x) const override;
  using ForwardOperator::apply;
  Tensor adjoint(const Tensor& y) const override;

 private:
  OperatorPtr inner_;
  double c_;
};

// ---- measurements -----------------------------------------------------------

enum class NoiseKind { kGaussian, kPoisson };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kGaussian;
  double sigma_y = 0.0;    // gaussian std; also the nominal level used for delta
  double lambda_y = 1.0;   // poisson rate
};

struct ProblemInstance {
  std::optional<Tensor> x_true;
  Tensor y;
  NoiseSpec noise;
  OperatorPtr op;
  std::uint64_t seed = 0;
};

// gaussian: y = A(x) + sigma_y * eta.
// poisson:  with z = A(x) and s = max(1, -min z),
//           y = Poisson(lambda_y (z + s) / (2 s)) * 2 s / lambda_y - s.
// For signals in [-1, 1] s = 1, the usual (z + 1)/2 rate map.
ProblemInstance synthesize_measurements(const Tensor& x_true, OperatorPtr op, const NoiseSpec& noise,
                                        std::uint64_t seed);

}  // namespace sitcom
