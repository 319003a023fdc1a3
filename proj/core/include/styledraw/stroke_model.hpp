// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "styledraw/geometry.hpp"

namespace styledraw {

inline constexpr double kDefaultWidthMin = 0.1;

/// One cubic Bezier chain: 3k+1 control points in normalized [0,1]^2 canvas
/// coordinates plus paint attributes. Width is in pixels.
struct StrokePath {
  std::vector<Vec2> control_points;
  std::array<double, 3> color{0.0, 0.0, 0.0};
  double opacity = 1.0;
  double width = 1.0;

  int segment_count() const {
    return static_cast<int>((control_points.size() - 1) / 3);
  }
};

/// Later strokes composite over earlier ones.
struct Drawing {
  std::vector<StrokePath> strokes;
  int canvas_width = 224;
  int canvas_height = 224;
  std::array<double, 3> background_color{1.0, 1.0, 1.0};
};

/// Knobs for the synthesis loop. Defaults mirror the CLI defaults.
struct OptimizationConfig {
  int num_paths = 64;
  int segments_per_path = 2;
  int canvas_width = 224;
  int canvas_height = 224;
  int iterations = 200;
  int snapshot_interval = 10;
  // Pixels per step; applied per axis as lr_points / canvas extent in the
  // normalized coordinates the control points live in.
  double lr_points = 0.8;
  double lr_color = 0.02;
  double lr_width = 0.1;
  double style_weight = 1.0;
  int style_warmup_iters = 50;
  int num_augmentations = 4;
  int feature_samples = 1024;
  std::uint64_t seed = 0;
};

/// Throws std::invalid_argument naming the first violated invariant.
void validate_stroke(const StrokePath& s, double width_min = kDefaultWidthMin);
void validate_drawing(const Drawing& d, double width_min = kDefaultWidthMin);
void validate_optimization(const OptimizationConfig& cfg);

/// Strokes start as short random walks: first point uniform in [0,1]^2, each
/// following control point offset by uniform [-0.05, 0.05]^2 and clamped.
/// Colors and opacity uniform in [0,1], width 1 px. Pure in (args, seed).
Drawing random_drawing(int num_paths, int segments, int canvas_width,
                       int canvas_height, std::uint64_t seed);

/// Clips color and opacity to [0,1] and width to [width_min, canvas_width/4].
/// Control points are deliberately left alone: curves may run off canvas.
/// Idempotent.
Drawing clamp_parameters(Drawing d, double width_min = kDefaultWidthMin);

}  // namespace styledraw
