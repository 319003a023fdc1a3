// SPDX-License-Identifier: Apache-2.0
#include "styledraw/stroke_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "styledraw/rng.hpp"

namespace styledraw {

void validate_stroke(const StrokePath& s, double width_min) {
  const std::size_t n = s.control_points.size();
  if (n < 4 || n % 3 != 1)
    throw std::invalid_argument("stroke: control point count must be 3k+1, k >= 1, got " +
                                std::to_string(n));
  for (const auto& p : s.control_points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw std::invalid_argument("stroke: non-finite control point");
  for (double c : s.color)
    if (!(c >= 0.0 && c <= 1.0))
      throw std::invalid_argument("stroke: color channel outside [0,1]");
  if (!(s.opacity >= 0.0 && s.opacity <= 1.0))
    throw std::invalid_argument("stroke: opacity outside [0,1]");
  if (!std::isfinite(s.width) || s.width < width_min)
    throw std::invalid_argument("stroke: width below minimum");
}

void validate_drawing(const Drawing& d, double width_min) {
  if (d.strokes.empty()) throw std::invalid_argument("drawing: no strokes");
  if (d.canvas_width < 8 || d.canvas_height < 8)
    throw std::invalid_argument("drawing: canvas must be at least 8x8");
  for (double c : d.background_color)
    if (!(c >= 0.0 && c <= 1.0))
      throw std::invalid_argument("drawing: background channel outside [0,1]");
  for (const auto& s : d.strokes) validate_stroke(s, width_min);
}

Drawing random_drawing(int num_paths, int segments, int canvas_width,
                       int canvas_height, std::uint64_t seed) {
  if (num_paths < 1) throw std::invalid_argument("random_drawing: num_paths must be >= 1");
  if (segments < 1) throw std::invalid_argument("random_drawing: segments must be >= 1");
  if (canvas_width < 8 || canvas_height < 8)
    throw std::invalid_argument("random_drawing: canvas must be at least 8x8");

  Rng rng(seed);
  Drawing d;
  d.canvas_width = canvas_width;
  d.canvas_height = canvas_height;
  d.strokes.reserve(static_cast<std::size_t>(num_paths));
  for (int i = 0; i < num_paths; ++i) {
    StrokePath s;
    const int n_points = 3 * segments + 1;
    s.control_points.reserve(static_cast<std::size_t>(n_points));
    Vec2 p{rng.uniform(), rng.uniform()};
    s.control_points.push_back(p);
    for (int j = 1; j < n_points; ++j) {
      p.x = clamp01(p.x + rng.uniform(-0.05, 0.05));
      p.y = clamp01(p.y + rng.uniform(-0.05, 0.05));
      s.control_points.push_back(p);
    }
    for (auto& c : s.color) c = rng.uniform();
    s.opacity = rng.uniform();
    s.width = 1.0;
    d.strokes.push_back(std::move(s));
  }
  return d;
}

Drawing clamp_parameters(Drawing d, double width_min) {
  const double width_max = d.canvas_width / 4.0;
  for (auto& s : d.strokes) {
    for (auto& c : s.color) c = clamp01(c);
    s.opacity = clamp01(s.opacity);
    s.width = clamp(s.width, width_min, width_max);
  }
  return d;
}

void validate_optimization(const OptimizationConfig& cfg) {
  const auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string("optimization config: ") + what +
                                  " must be positive and finite");
  };
  if (cfg.iterations < 0)
    throw std::invalid_argument("optimization config: iterations must be >= 0");
  if (cfg.num_paths < 1)
    throw std::invalid_argument("optimization config: num_paths must be >= 1");
  if (cfg.segments_per_path < 1)
    throw std::invalid_argument(
        "optimization config: segments_per_path must be >= 1");
  if (cfg.canvas_width < 8 || cfg.canvas_height < 8)
    throw std::invalid_argument(
        "optimization config: canvas must be at least 8x8");
  if (cfg.snapshot_interval < 1)
    throw std::invalid_argument(
        "optimization config: snapshot_interval must be >= 1");
  if (cfg.num_augmentations < 1)
    throw std::invalid_argument(
        "optimization config: num_augmentations must be >= 1");
  if (cfg.feature_samples < 1)
    throw std::invalid_argument(
        "optimization config: feature_samples must be >= 1");
  positive(cfg.lr_points, "lr_points");
  positive(cfg.lr_color, "lr_color");
  positive(cfg.lr_width, "lr_width");
  if (!(cfg.style_weight >= 0.0) || !std::isfinite(cfg.style_weight))
    throw std::invalid_argument(
        "optimization config: style_weight must be >= 0 and finite");
  if (cfg.style_warmup_iters < 0)
    throw std::invalid_argument(
        "optimization config: style_warmup_iters must be >= 0");
}

}  // namespace styledraw
