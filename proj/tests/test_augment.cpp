// SPDX-License-Identifier: Apache-2.0
#include "styledraw/augment.hpp"

#include <cmath>

#include "doctest.h"
#include "styledraw/raster.hpp"
#include "styledraw/stroke_model.hpp"
#include "support/oracles.hpp"

using namespace styledraw;

namespace {

RasterImage constant_image(int res, double v) {
  RasterImage img{Tensor::full({res, res, 3}, v), res, res};
  return img;
}

RasterImage textured_image(int res) {
  RasterImage img{Tensor::zeros({res, res, 3}), res, res};
  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x)
      for (int c = 0; c < 3; ++c)
        img.pixels.at(y, x, c) =
            0.5 + 0.5 * std::sin(0.7 * x + 1.3 * y + 2.1 * c);
  return img;
}

}  // namespace

TEST_CASE("augment: zero views is an empty batch") {
  AugmentationConfig cfg;
  cfg.num_views = 0;
  CHECK(augment_batch(constant_image(16, 0.25), cfg, 1).empty());
}

TEST_CASE("augment: disabled path copies bit-identically at equal resolution") {
  AugmentationConfig cfg;
  cfg.enabled = false;
  cfg.num_views = 2;
  cfg.out_resolution = 20;
  const auto img = textured_image(20);
  const auto views = augment_batch(img, cfg, 9);
  REQUIRE(views.size() == 2);
  for (const auto& v : views) {
    REQUIRE(v.pixels.size() == img.pixels.size());
    for (std::int64_t i = 0; i < img.pixels.size(); ++i)
      CHECK(v.pixels[i] == img.pixels[i]);
  }
}

TEST_CASE("augment: warps of a constant image stay constant") {
  AugmentationConfig cfg;
  cfg.num_views = 4;
  cfg.out_resolution = 24;
  const auto views = augment_batch(constant_image(32, 0.5), cfg, 7);
  REQUIRE(views.size() == 4);
  for (const auto& v : views)
    for (std::int64_t i = 0; i < v.pixels.size(); ++i)
      CHECK(std::fabs(v.pixels[i] - 0.5) < 1e-6);
}

TEST_CASE("augment: deterministic per seed, distinct across seeds") {
  AugmentationConfig cfg;
  cfg.num_views = 3;
  cfg.out_resolution = 16;
  const auto img = textured_image(24);
  const auto a = augment_batch(img, cfg, 5);
  const auto b = augment_batch(img, cfg, 5);
  const auto c = augment_batch(img, cfg, 6);
  bool differs = false;
  for (std::size_t v = 0; v < a.size(); ++v)
    for (std::int64_t i = 0; i < a[v].pixels.size(); ++i) {
      CHECK(a[v].pixels[i] == b[v].pixels[i]);
      differs |= a[v].pixels[i] != c[v].pixels[i];
    }
  CHECK(differs);
}

TEST_CASE("augment: outputs stay inside [0,1]") {
  AugmentationConfig cfg;
  cfg.num_views = 6;
  cfg.out_resolution = 16;
  const auto d = random_drawing(5, 2, 24, 24, 11);
  const auto views = augment_batch(render(d), cfg, 3);
  for (const auto& v : views)
    for (std::int64_t i = 0; i < v.pixels.size(); ++i) {
      CHECK(v.pixels[i] >= 0.0);
      CHECK(v.pixels[i] <= 1.0);
    }
}

TEST_CASE("augment: gradient reaches the source pixels") {
  AugmentationConfig cfg;
  cfg.num_views = 2;
  cfg.out_resolution = 12;
  const auto img = textured_image(16);

  auto eval = [&](const Tensor& px, ad::Var* leaf_out) {
    auto leaf = ad::Var::leaf(px);
    auto views = augment_batch_var(leaf, cfg, 13);
    auto total = ad::mean(views[0]);
    for (std::size_t i = 1; i < views.size(); ++i)
      total = ad::add(total, ad::mean(views[i]));
    if (leaf_out) *leaf_out = leaf;
    return total;
  };

  ad::Var leaf;
  auto loss = eval(img.pixels, &leaf);
  loss.backward();
  const Tensor& analytic = leaf.grad_or_zero();

  double max_abs = 0.0;
  for (std::int64_t i = 0; i < analytic.size(); ++i)
    max_abs = std::max(max_abs, std::fabs(analytic[i]));
  CHECK(max_abs > 0.0);

  auto f = [&](const std::vector<double>& flat) {
    Tensor px = img.pixels;
    for (std::int64_t i = 0; i < px.size(); ++i) px[i] = flat[static_cast<std::size_t>(i)];
    return eval(px, nullptr).value().scalar_value();
  };
  const std::vector<double> x = img.pixels.vec();
  for (std::size_t i = 0; i < x.size(); i += 37) {
    const double fd = oracles::central_diff(f, x, i, 1e-5);
    CHECK(std::fabs(analytic[static_cast<std::int64_t>(i)] - fd) < 1e-7);
  }
}

TEST_CASE("augment: rejects bad configs") {
  const auto img = constant_image(8, 0.0);
  AugmentationConfig cfg;
  cfg.num_views = -1;
  CHECK_THROWS_AS(augment_batch(img, cfg, 0), std::invalid_argument);
  cfg = {};
  cfg.perspective_strength = 1.5;
  CHECK_THROWS_AS(augment_batch(img, cfg, 0), std::invalid_argument);
  cfg = {};
  cfg.crop_scale_range = {0.0, 0.9};
  CHECK_THROWS_AS(augment_batch(img, cfg, 0), std::invalid_argument);
  cfg = {};
  cfg.crop_scale_range = {0.9, 0.7};
  CHECK_THROWS_AS(augment_batch(img, cfg, 0), std::invalid_argument);
}
