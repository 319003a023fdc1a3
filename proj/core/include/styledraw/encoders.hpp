// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "styledraw/autodiff.hpp"
#include "styledraw/geometry.hpp"
#include "styledraw/raster.hpp"

namespace styledraw {

// Unit-norm embedding in the joint text-image space.
struct EmbeddingVector {
  std::vector<double> values;
};

// Hypercolumns: per sample location, bilinearly sampled activations of the
// selected layers concatenated into one row of `samples`.
struct FeatureStack {
  Tensor samples;  // [N, total_dim]
  std::vector<int> layer_dims;
  int total_dim() const {
    int t = 0;
    for (int d : layer_dims) t += d;
    return t;
  }
};

// Joint text-image embedding model. The image side builds an autodiff graph;
// the text side is gradient-free. Public entry points validate inputs, then
// dispatch to the implementation.
class TextImageEncoder {
 public:
  virtual ~TextImageEncoder() = default;
  virtual int input_resolution() const = 0;
  virtual int dim() const = 0;

  // Rejects empty prompts; returns a unit-norm [dim] constant.
  ad::Var embed_text_var(const std::string& prompt) const;
  // Rejects images not at [input_resolution]^2; returns unit-norm [dim].
  ad::Var embed_image_var(const ad::Var& img) const;

  EmbeddingVector embed_text(const std::string& prompt) const;
  EmbeddingVector embed_image(const RasterImage& img) const;

 protected:
  virtual ad::Var do_embed_text(const std::string& prompt) const = 0;
  virtual ad::Var do_embed_image(const ad::Var& img) const = 0;
};

// Convolutional feature extractor; layer ids index post-activation maps.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual int input_resolution() const = 0;
  virtual int layer_count() const = 0;
  virtual int layer_dim(int layer) const = 0;

  // Rejects an empty layer list, out-of-range layer ids, empty coords, and
  // coords outside [0,1]^2. Returns [N, total_dim].
  ad::Var extract_var(const ad::Var& img, const std::vector<int>& layers,
                      const std::vector<Vec2>& coords) const;

  FeatureStack extract(const RasterImage& img, const std::vector<int>& layers,
                       const std::vector<Vec2>& coords) const;

 protected:
  virtual ad::Var do_extract(const ad::Var& img, const std::vector<int>& layers,
                             const std::vector<Vec2>& coords) const = 0;
};

// Deterministic offline test doubles: fixed-seed random projections over a
// trigram hash (text) and a downsampled image; a fixed-seed two-layer conv
// stack for features. Differentiable wherever the real encoders are.
std::unique_ptr<TextImageEncoder> make_stub_text_image_encoder();
std::unique_ptr<FeatureExtractor> make_stub_feature_extractor();

struct EncoderSet {
  std::unique_ptr<TextImageEncoder> joint;
  std::unique_ptr<FeatureExtractor> features;
};

EncoderSet make_stub_encoders();

// Loads pretrained weights from a directory holding manifest.json plus raw
// little-endian float32 blobs. Throws std::runtime_error with a message that
// names the missing piece when the directory or any blob is absent/malformed.
EncoderSet load_encoders(const std::string& weights_dir);

// Value of STYLEDRAW_WEIGHTS, or "" when unset.
std::string weights_dir_from_env();

}  // namespace styledraw
