#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace sitcom::ad {

class Graph;

// Handle to a node in a Graph. Cheap to copy; valid as long as the graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  Graph* graph() const noexcept { return graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

struct BackwardContext {
  const Tensor& grad_out;
  const Tensor& out;
  std::span<const Tensor* const> in;
  std::span<Tensor* const> grad_in;  // entry is nullptr when that input needs no gradient
};

// Accumulates (+=) the vector-Jacobian product into ctx.grad_in.
using BackwardFn = std::function<void(const BackwardContext& ctx)>;

// Tape of operations in creation order, which is a topological order.
// Single-writer; build one graph per evaluation.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var input(Tensor value);     // differentiable leaf
  Var constant(Tensor value);  // non-differentiable leaf

  // Appends an op node. Throws if `value` holds a non-finite entry.
  Var record(std::string op, std::vector<Var> inputs, Tensor value, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Reverse sweep from the scalar `output`. Each node is visited at most once.
  // Throws if output is not scalar or a wrt variable does not reach it.
  std::vector<Tensor> backward(Var output, std::span<const Var> wrt) const;

 private:
  struct Node {
    std::string op;
    std::vector<std::size_t> inputs;
    Tensor value;
    BackwardFn backward;
    bool requires_grad = false;
  };

  void check_owned(Var v, const char* what) const;

  std::vector<Node> nodes_;
};

Tensor gradient(Var output, Var wrt);

// ---- ops -------------------------------------------------------------------
// Binary elementwise ops require equal shapes, or one operand of size 1.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);

// [m,k] x [k,n] -> [m,n]; [m,k] x [k] -> [m]
Var matmul(Var a, Var b);
// x[B,in] * W[in,out] + b[out]
Var affine(Var x, Var w, Var b);
// [B,p] | [B,q] -> [B,p+q]
Var concat_cols(Var a, Var b);
Var reshape(Var a, Shape shape);

Var sum(Var a);
Var mean(Var a);
Var squared_norm(Var a);

Var tanh(Var a);
Var silu(Var a);

// Flat-index selection: out[j] = a[indices[j]].
Var gather(Var a, std::vector<std::size_t> indices);
// Elementwise multiplication by a fixed mask.
Var mask(Var a, const Tensor& m);

enum class Padding { kZero, kReflect };
// "Same"-size 2D convolution of x[H,W] with an odd-sized kernel[kh,kw].
// A 1D signal is the H = 1 case.
Var conv2d(Var x, Var kernel, Padding padding);

// |DFT| of x[H,W] zero-padded to [P,Q], orthonormal scaling.
// The gradient at an exactly zero magnitude is defined as 0.
Var dft_magnitude(Var x, std::size_t P, std::size_t Q);

// Elementwise clamp to [lo, hi]. Gradient passes strictly inside the
// interval and is 0 outside and on the boundary.
Var clip(Var a, double lo, double hi);

// ---- finite-difference checker ---------------------------------------------

using ScalarFn = std::function<Var(Graph&, Var)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool passed = false;
  // Coordinates where the one-sided differences disagree (a kink within one
  // step). They are reported, not counted against `passed`.
  std::vector<std::size_t> ambiguous;
};

// Compares reverse-mode against central differences at every coordinate of
// `at`. Relative error is |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
GradCheckReport check_gradient(const ScalarFn& fn, const Tensor& at, double step, double tol);

}  // namespace sitcom::ad
