// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "styledraw/autodiff.hpp"
#include "styledraw/geometry.hpp"
#include "styledraw/raster.hpp"

namespace styledraw {

// Randomized views fed to the text-alignment branch. Each view is a random
// perspective warp composed with a random resized crop, resampled to the
// encoder's input resolution. All corners jitter inward, so every sample
// stays inside the source image and no padding is introduced.
struct AugmentationConfig {
  int num_views = 4;
  double perspective_strength = 0.5;
  std::pair<double, double> crop_scale_range{0.7, 0.9};
  int out_resolution = 224;
  bool enabled = true;
};

void validate_augmentation(const AugmentationConfig& cfg);

// Output-normalized to source-normalized maps, one per view. Deterministic
// for a fixed (cfg, seed); identity maps when cfg.enabled is false.
std::vector<Mat3> augment_maps(const AugmentationConfig& cfg,
                               std::uint64_t seed);

std::vector<RasterImage> augment_batch(const RasterImage& img,
                                       const AugmentationConfig& cfg,
                                       std::uint64_t seed);

// Graph-building variant; gradients flow back to img's pixels.
std::vector<ad::Var> augment_batch_var(const ad::Var& img,
                                       const AugmentationConfig& cfg,
                                       std::uint64_t seed);

}  // namespace styledraw
