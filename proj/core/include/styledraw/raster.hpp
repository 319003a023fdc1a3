// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <functional>
#include <vector>

#include "styledraw/autodiff.hpp"
#include "styledraw/stroke_model.hpp"
#include "styledraw/tensor.hpp"

namespace styledraw {

/// Composited drawing, pixels [H,W,3] row-major in [0,1].
struct RasterImage {
  Tensor pixels;
  int height = 0;
  int width = 0;
};

/// Anti-aliased forward render: strokes composited in list order over the
/// background, out = a*color + (1-a)*under with a = opacity * coverage.
/// Coverage falls off smoothly across a 1 px band around the stroke edge,
/// which is also what makes the render differentiable. Deterministic.
RasterImage render(const Drawing& d);

/// Leaf variables for one drawing: per stroke, points [n,2] in normalized
/// coordinates, color [3], opacity [1], width [1]. The optimizer steps these
/// leaves; render_var ties them into a loss graph.
struct DrawingVars {
  std::vector<ad::Var> points;
  std::vector<ad::Var> color;
  std::vector<ad::Var> opacity;
  std::vector<ad::Var> width;
  int canvas_width = 0;
  int canvas_height = 0;
  std::array<double, 3> background_color{1.0, 1.0, 1.0};

  std::size_t stroke_count() const { return points.size(); }
};

DrawingVars make_drawing_vars(const Drawing& d);

/// Reads the current leaf values back into a plain Drawing.
Drawing drawing_from_vars(const DrawingVars& v);

/// Differentiable render producing a [H,W,3] graph node; gradients reach
/// every control point, color channel, opacity, and width.
ad::Var render_var(const DrawingVars& v);

/// Builds a scalar loss graph from the rendered image node.
using PixelLossBuilder = std::function<ad::Var(const ad::Var& pixels)>;

/// Central-difference audit of render gradients. Perturbs every stroke
/// parameter by +-step and returns the worst relative error among parameters
/// whose analytic gradient magnitude exceeds 1e-6; 0 if none does.
double gradient_check(const Drawing& d, const PixelLossBuilder& loss, double step);

}  // namespace styledraw
