// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "styledraw/encoders.hpp"
#include "styledraw/rng.hpp"

namespace styledraw {

namespace {

constexpr int kStubDim = 64;
constexpr int kStubResolution = 64;
constexpr int kTextBuckets = 512;
constexpr std::uint64_t kStubSeed = 0x7374796c65647277ull;

Tensor random_matrix(int rows, int cols, double scale, std::uint64_t seed) {
  Tensor t = Tensor::zeros({rows, cols});
  Rng rng(seed);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * scale;
  return t;
}

std::uint64_t fnv1a(const char* s, int n) {
  std::uint64_t h = 1469598103934665603ull;
  for (int i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(s[i]);
    h *= 1099511628211ull;
  }
  return h;
}

class StubJoint final : public TextImageEncoder {
 public:
  StubJoint()
      : text_proj_(random_matrix(kTextBuckets, kStubDim,
                                 1.0 / std::sqrt(double(kTextBuckets)),
                                 mix_seed(kStubSeed, 1))),
        image_proj_(random_matrix(16 * 16 * 3, kStubDim,
                                  1.0 / std::sqrt(16.0 * 16.0 * 3.0),
                                  mix_seed(kStubSeed, 2))) {}

  int input_resolution() const override { return kStubResolution; }
  int dim() const override { return kStubDim; }

 protected:
  ad::Var do_embed_text(const std::string& prompt) const override {
    // Sentinel padding guarantees at least one trigram for any non-empty
    // prompt, so the count vector never normalizes to zero.
    const std::string s = "^" + prompt + "$";
    std::vector<double> counts(kTextBuckets, 0.0);
    for (std::size_t i = 0; i + 3 <= s.size(); ++i)
      counts[fnv1a(s.data() + i, 3) % kTextBuckets] += 1.0;
    std::vector<double> v(kStubDim, 0.0);
    for (int b = 0; b < kTextBuckets; ++b) {
      if (counts[b] == 0.0) continue;
      for (int d = 0; d < kStubDim; ++d)
        v[static_cast<std::size_t>(d)] += counts[b] * text_proj_.at(b, d);
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(std::max(n, 1e-24));
    for (double& x : v) x /= n;
    return ad::Var::constant(Tensor({kStubDim}, std::move(v)));
  }

  ad::Var do_embed_image(const ad::Var& img) const override {
    auto pooled = ad::avgpool_blocks(img, kStubResolution / 16);
    auto flat = ad::reshape(pooled, {1, 16 * 16 * 3});
    auto proj = ad::matmul(flat, ad::Var::constant(image_proj_));
    return ad::l2_normalize_rows(ad::reshape(proj, {kStubDim}));
  }

 private:
  Tensor text_proj_;
  Tensor image_proj_;
};

class StubFeatures final : public FeatureExtractor {
 public:
  StubFeatures()
      : w0_(random_matrix_shaped({3, 3, 3, 8}, he_scale(3),
                                 mix_seed(kStubSeed, 3))),
        b0_(Tensor::zeros({8})),
        w1_(random_matrix_shaped({3, 3, 8, 16}, he_scale(8),
                                 mix_seed(kStubSeed, 4))),
        b1_(Tensor::zeros({16})) {}

  int input_resolution() const override { return kStubResolution; }
  int layer_count() const override { return 2; }
  int layer_dim(int layer) const override { return layer == 0 ? 8 : 16; }

 protected:
  ad::Var do_extract(const ad::Var& img, const std::vector<int>& layers,
                     const std::vector<Vec2>& coords) const override {
    auto m0 = ad::relu(ad::conv2d_3x3(img, ad::Var::constant(w0_),
                                      ad::Var::constant(b0_)));
    auto m1 = ad::relu(ad::conv2d_3x3(ad::maxpool2(m0), ad::Var::constant(w1_),
                                      ad::Var::constant(b1_)));
    std::vector<ad::Var> cols;
    cols.reserve(layers.size());
    for (int id : layers)
      cols.push_back(ad::sample_bilinear(id == 0 ? m0 : m1, coords));
    return ad::concat_cols(cols);
  }

 private:
  static double he_scale(int cin) { return std::sqrt(2.0 / (9.0 * cin)); }
  static Tensor random_matrix_shaped(std::vector<int> dims, double scale,
                                     std::uint64_t seed) {
    Tensor t = Tensor::zeros(std::move(dims));
    Rng rng(seed);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * scale;
    return t;
  }

  Tensor w0_, b0_, w1_, b1_;
};

void check_image_shape(const Tensor& v, int res, const char* who) {
  if (v.rank() != 3 || v.dim(0) != res || v.dim(1) != res || v.dim(2) != 3)
    throw std::invalid_argument(std::string(who) +
                                ": image must be [res, res, 3] at the "
                                "encoder input resolution");
}

}  // namespace

ad::Var TextImageEncoder::embed_text_var(const std::string& prompt) const {
  if (prompt.empty())
    throw std::invalid_argument("encoder: empty prompt");
  return do_embed_text(prompt);
}

ad::Var TextImageEncoder::embed_image_var(const ad::Var& img) const {
  check_image_shape(img.value(), input_resolution(), "encoder");
  return do_embed_image(img);
}

EmbeddingVector TextImageEncoder::embed_text(const std::string& prompt) const {
  return {embed_text_var(prompt).value().vec()};
}

EmbeddingVector TextImageEncoder::embed_image(const RasterImage& img) const {
  return {embed_image_var(ad::Var::constant(img.pixels)).value().vec()};
}

ad::Var FeatureExtractor::extract_var(const ad::Var& img,
                                      const std::vector<int>& layers,
                                      const std::vector<Vec2>& coords) const {
  check_image_shape(img.value(), input_resolution(), "features");
  if (layers.empty())
    throw std::invalid_argument("features: layer list is empty");
  for (int id : layers)
    if (id < 0 || id >= layer_count())
      throw std::invalid_argument("features: layer id out of range");
  if (coords.empty())
    throw std::invalid_argument("features: need at least one sample point");
  for (const Vec2& c : coords)
    if (!(c.x >= 0.0 && c.x <= 1.0 && c.y >= 0.0 && c.y <= 1.0))
      throw std::invalid_argument("features: sample coordinate outside [0,1]^2");
  return do_extract(img, layers, coords);
}

FeatureStack FeatureExtractor::extract(const RasterImage& img,
                                       const std::vector<int>& layers,
                                       const std::vector<Vec2>& coords) const {
  FeatureStack fs;
  fs.samples = extract_var(ad::Var::constant(img.pixels), layers, coords).value();
  fs.layer_dims.reserve(layers.size());
  for (int id : layers) fs.layer_dims.push_back(layer_dim(id));
  return fs;
}

std::unique_ptr<TextImageEncoder> make_stub_text_image_encoder() {
  return std::make_unique<StubJoint>();
}

std::unique_ptr<FeatureExtractor> make_stub_feature_extractor() {
  return std::make_unique<StubFeatures>();
}

EncoderSet make_stub_encoders() {
  return {make_stub_text_image_encoder(), make_stub_feature_extractor()};
}

std::string weights_dir_from_env() {
  const char* v = std::getenv("STYLEDRAW_WEIGHTS");
  return v ? std::string(v) : std::string();
}

}  // namespace styledraw
