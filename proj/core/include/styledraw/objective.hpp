// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "styledraw/augment.hpp"
#include "styledraw/autodiff.hpp"
#include "styledraw/encoders.hpp"
#include "styledraw/raster.hpp"

namespace styledraw {

// Per-iteration record; total_loss = content_loss +
// style_weight_effective * style_loss within 1e-6.
struct LossReport {
  int iteration = 0;
  double content_loss = 0.0;
  double style_loss = 0.0;
  double total_loss = 0.0;
  double style_weight_effective = 0.0;
};

struct StyleLossWeights {
  double remd = 1.0;
  double moments = 1.0;
  double palette = 0.25;
};

// 1 - a.b for unit vectors, in [0, 2]. Rejects inputs whose norm strays
// more than 1e-4 from 1.
double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b);

// Mean cosine distance between the text embedding and the embeddings of
// augmented views of the render. Needs cfg.num_views >= 1; views are
// produced at the encoder's input resolution regardless of cfg.
double content_loss(const RasterImage& render, const EmbeddingVector& text,
                    const AugmentationConfig& cfg,
                    const TextImageEncoder& encoder, std::uint64_t seed);

// Relaxed earth mover's distance with cosine ground metric:
// max(mean_i min_j C_ij, mean_j min_i C_ij). Lower-bounds the exact
// assignment EMD for equal-size uniform-weight sets.
double relaxed_emd(const FeatureStack& a, const FeatureStack& b);

// (1/d)|mu_a - mu_b|_1 + (1/d^2)|cov_a - cov_b|_1 with sample covariance
// (1/(N-1)). The covariance term is dropped unless both sides have N >= 2.
// Bitwise invariant under row permutation of either side.
double moment_matching_loss(const FeatureStack& a, const FeatureStack& b);

// Relaxed EMD with Euclidean ground metric over n_samples RGB pixels drawn
// from each image. Both images draw coordinates from identically seeded
// streams, so equal images at equal resolution sample equal pixels.
double palette_loss(const RasterImage& render, const RasterImage& style,
                    int n_samples, std::uint64_t seed);

// weights.remd * relaxed_emd + weights.moments * moment_matching +
// weights.palette * palette_loss over hypercolumns sampled at
// sample_feature_coords(n_samples, seed). Zero-weight terms are skipped.
double style_loss(const RasterImage& render, const RasterImage& style,
                  const FeatureExtractor& extractor, int n_samples,
                  std::uint64_t seed, const StyleLossWeights& weights = {});

// content + lambda_eff * style; lambda_eff must be >= 0 and finite.
double total_loss(double content, double style, double lambda_eff);

// Structure-preservation term for pixel-space refinement. With D the
// pairwise cosine-distance matrix over feature rows (exact-zero diagonal)
// and W its row-normalized form, returns mean_ij |W_ij(cur) - W_ij(ref)|.
// Both inputs must share the same [N, d] shape.
double self_similarity_loss(const Tensor& cur, const Tensor& ref);

// The shared normalized sample locations style_loss uses for hypercolumns.
std::vector<Vec2> sample_feature_coords(int n, std::uint64_t seed);

// First three layers, or all of them when the extractor has fewer.
std::vector<int> default_feature_layers(const FeatureExtractor& extractor);

// Graph-building forms; gradients flow to the render (style side is data).
ad::Var content_loss_var(const ad::Var& render, const ad::Var& text_emb,
                         const AugmentationConfig& cfg,
                         const TextImageEncoder& encoder, std::uint64_t seed);
ad::Var relaxed_emd_var(const ad::Var& a, const ad::Var& b);
ad::Var relaxed_emd_euclidean_var(const ad::Var& a, const ad::Var& b);
ad::Var moment_matching_var(const ad::Var& a, const ad::Var& b);
ad::Var palette_loss_var(const ad::Var& render, const RasterImage& style,
                         int n_samples, std::uint64_t seed);
ad::Var style_loss_var(const ad::Var& render, const RasterImage& style,
                       const FeatureExtractor& extractor, int n_samples,
                       std::uint64_t seed,
                       const StyleLossWeights& weights = {});
ad::Var self_similarity_var(const ad::Var& cur, const Tensor& ref);

}  // namespace styledraw
