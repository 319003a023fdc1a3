// SPDX-License-Identifier: Apache-2.0
#include "styledraw/augment.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "styledraw/rng.hpp"

namespace styledraw {
namespace {

// Homography sending the unit-square corners to the given quad, TL TR BR BL.
Mat3 unit_square_to_quad(const Vec2 q[4]) {
  constexpr double cx[4] = {0.0, 1.0, 1.0, 0.0};
  constexpr double cy[4] = {0.0, 0.0, 1.0, 1.0};
  Eigen::Matrix<double, 8, 8> A = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> b;
  for (int k = 0; k < 4; ++k) {
    const double x = cx[k], y = cy[k], X = q[k].x, Y = q[k].y;
    A(2 * k, 0) = x;
    A(2 * k, 1) = y;
    A(2 * k, 2) = 1.0;
    A(2 * k, 6) = -x * X;
    A(2 * k, 7) = -y * X;
    b(2 * k) = X;
    A(2 * k + 1, 3) = x;
    A(2 * k + 1, 4) = y;
    A(2 * k + 1, 5) = 1.0;
    A(2 * k + 1, 6) = -x * Y;
    A(2 * k + 1, 7) = -y * Y;
    b(2 * k + 1) = Y;
  }
  const Eigen::Matrix<double, 8, 1> h = A.partialPivLu().solve(b);
  Mat3 m;
  for (int i = 0; i < 8; ++i) m.m[i] = h(i);
  m.m[8] = 1.0;
  return m;
}

Mat3 view_map(const AugmentationConfig& cfg, Rng& rng) {
  // Corners pull inward by up to strength/2 per axis, TL TR BR BL, x then y.
  const double j = cfg.perspective_strength * 0.5;
  Vec2 q[4];
  q[0] = {rng.uniform(0.0, j), rng.uniform(0.0, j)};
  q[1] = {1.0 - rng.uniform(0.0, j), rng.uniform(0.0, j)};
  q[2] = {1.0 - rng.uniform(0.0, j), 1.0 - rng.uniform(0.0, j)};
  q[3] = {rng.uniform(0.0, j), 1.0 - rng.uniform(0.0, j)};
  const Mat3 persp = unit_square_to_quad(q);

  const double area =
      rng.uniform(cfg.crop_scale_range.first, cfg.crop_scale_range.second);
  const double s = std::sqrt(area);
  const double ox = rng.uniform(0.0, 1.0 - s);
  const double oy = rng.uniform(0.0, 1.0 - s);
  Mat3 crop{{s, 0.0, ox, 0.0, s, oy, 0.0, 0.0, 1.0}};
  return persp * crop;
}

}  // namespace

void validate_augmentation(const AugmentationConfig& cfg) {
  if (cfg.num_views < 0)
    throw std::invalid_argument("augment: num_views must be >= 0");
  if (!(cfg.perspective_strength >= 0.0 && cfg.perspective_strength <= 1.0))
    throw std::invalid_argument("augment: perspective_strength outside [0,1]");
  const auto [lo, hi] = cfg.crop_scale_range;
  if (!(lo > 0.0 && lo <= hi && hi <= 1.0))
    throw std::invalid_argument("augment: crop_scale_range wants 0 < lo <= hi <= 1");
  if (cfg.out_resolution < 1)
    throw std::invalid_argument("augment: out_resolution must be positive");
}

std::vector<Mat3> augment_maps(const AugmentationConfig& cfg,
                               std::uint64_t seed) {
  validate_augmentation(cfg);
  std::vector<Mat3> maps;
  maps.reserve(static_cast<std::size_t>(cfg.num_views));
  for (int i = 0; i < cfg.num_views; ++i) {
    if (!cfg.enabled) {
      maps.push_back(Mat3::identity());
      continue;
    }
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    maps.push_back(view_map(cfg, rng));
  }
  return maps;
}

std::vector<ad::Var> augment_batch_var(const ad::Var& img,
                                       const AugmentationConfig& cfg,
                                       std::uint64_t seed) {
  const auto maps = augment_maps(cfg, seed);
  std::vector<ad::Var> views;
  views.reserve(maps.size());
  for (const Mat3& m : maps)
    views.push_back(ad::resample_projective(img, m, cfg.out_resolution,
                                            cfg.out_resolution));
  return views;
}

std::vector<RasterImage> augment_batch(const RasterImage& img,
                                       const AugmentationConfig& cfg,
                                       std::uint64_t seed) {
  const auto views = augment_batch_var(ad::Var::constant(img.pixels), cfg, seed);
  std::vector<RasterImage> out;
  out.reserve(views.size());
  for (const auto& v : views)
    out.push_back({v.value(), cfg.out_resolution, cfg.out_resolution});
  return out;
}

}  // namespace styledraw
