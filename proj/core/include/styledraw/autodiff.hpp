// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "styledraw/geometry.hpp"
#include "styledraw/tensor.hpp"

namespace styledraw::ad {

namespace detail {
struct Node;
}

/// Handle to a node in a reverse-mode autodiff graph. Graphs are built per
/// evaluation (define-by-run); leaves hold parameters, constants hold data
/// that needs no gradient. backward() on a scalar root fills leaf gradients.
class Var {
 public:
  Var() = default;

  static Var leaf(Tensor value);
  static Var constant(Tensor value);

  bool valid() const { return node_ != nullptr; }
  const Tensor& value() const;
  /// Gradient accumulated by backward(); zero tensor if the node was never
  /// reached.
  Tensor grad_or_zero() const;
  bool requires_grad() const;

  /// Reverse pass from a scalar root. Call once per graph.
  void backward() const;

  std::shared_ptr<detail::Node> node() const { return node_; }

 private:
  explicit Var(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;

  friend Var make_op(Tensor, std::vector<Var>, std::function<void(const Tensor&)>);
};

/// Builds a custom differentiable op. `backward` receives the output gradient
/// and must accumulate into the parents' buffers via var_grad_buffer(). It is
/// only invoked when some parent requires a gradient.
Var make_op(Tensor value, std::vector<Var> parents,
            std::function<void(const Tensor& out_grad)> backward);

bool var_needs_grad(const Var& v);
Tensor& var_grad_buffer(const Var& v);

// ---- generic ops ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var sum(const Var& a);
Var mean(const Var& a);
Var relu(const Var& a);

/// [n,k] x [k,m] -> [n,m]
Var matmul(const Var& a, const Var& b);

/// Rank-1 [d] or rank-2 [n,d]; rows scaled to unit L2 norm.
Var l2_normalize_rows(const Var& a, double eps = 1e-12);

/// 1 - clamp(dot(a, b), -1, 1) for unit-norm rank-1 vectors.
Var unit_cosine_distance(const Var& a, const Var& b);

/// img [H,W,Cin], weight [3,3,Cin,Cout], bias [Cout]; stride 1, zero pad 1.
Var conv2d_3x3(const Var& img, const Var& weight, const Var& bias);

/// [H,W,C] -> [H/2,W/2,C]; H and W must be even.
Var maxpool2(const Var& img);
Var avgpool2(const Var& img);

/// Exact block-average pooling; H and W must be divisible by block.
Var avgpool_blocks(const Var& img, int block);

/// Bilinear resample through a projective map from output-normalized to
/// source-normalized coordinates. Border-clamped; identity map at equal
/// resolution is a bit-exact copy.
Var resample_projective(const Var& img, const Mat3& out_to_src, int oh, int ow);

/// Bilinear samples at normalized coords; [N, C]. Coords must be in [0,1]^2.
Var sample_bilinear(const Var& img, const std::vector<Vec2>& coords);

/// Rows of img at integer (y, x) locations; [N, C].
Var gather_pixels(const Var& img, const std::vector<std::pair<int, int>>& yx);

/// Column-wise concat of [N, d_i] matrices -> [N, sum d_i].
Var concat_cols(const std::vector<Var>& parts);

/// Same elements, new dims; element count must match.
Var reshape(const Var& a, const std::vector<int>& dims);

// ---- raw tensor helpers shared by op implementations ----

/// Bilinear sample of an HWC tensor at continuous pixel coords (border clamp).
void bilinear_taps(int H, int W, double px, double py, int idx[4], double w[4]);

}  // namespace styledraw::ad
