// SPDX-License-Identifier: Apache-2.0
#include "styledraw/encoders.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "styledraw/rng.hpp"
#include "support/oracles.hpp"

using namespace styledraw;

namespace {

double norm(const std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  return std::sqrt(n);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] * b[i];
  return d;
}

RasterImage textured(int res, std::uint64_t seed) {
  RasterImage img{Tensor::zeros({res, res, 3}), res, res};
  Rng rng(seed);
  for (std::int64_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("encoders: stub text embeddings are unit norm and deterministic") {
  auto enc = make_stub_text_image_encoder();
  const auto a = enc->embed_text("a horse on a beach");
  const auto b = enc->embed_text("a horse on a beach");
  CHECK(std::fabs(norm(a.values) - 1.0) < 1e-5);
  CHECK(a.values == b.values);
  const auto c = enc->embed_text("the starry night");
  CHECK(std::fabs(norm(c.values) - 1.0) < 1e-5);
  CHECK(cosine(a.values, c.values) < 1.0);
  CHECK_THROWS_AS(enc->embed_text(""), std::invalid_argument);
}

TEST_CASE("encoders: stub image embeddings are unit norm and deterministic") {
  auto enc = make_stub_text_image_encoder();
  const auto img = textured(enc->input_resolution(), 4);
  const auto a = enc->embed_image(img);
  const auto b = enc->embed_image(img);
  CHECK(std::fabs(norm(a.values) - 1.0) < 1e-5);
  CHECK(a.values == b.values);
  const auto other = enc->embed_image(textured(enc->input_resolution(), 5));
  CHECK(cosine(a.values, other.values) < 1.0);
  RasterImage wrong{Tensor::zeros({16, 16, 3}), 16, 16};
  CHECK_THROWS_AS(enc->embed_image(wrong), std::invalid_argument);
}

TEST_CASE("encoders: cosine distance gradient through the stub image encoder") {
  auto enc = make_stub_text_image_encoder();
  const auto img = textured(enc->input_resolution(), 9);
  const auto text = enc->embed_text_var("a sketch of a tree");

  auto eval = [&](const Tensor& px, ad::Var* leaf_out) {
    auto leaf = ad::Var::leaf(px);
    auto d = ad::unit_cosine_distance(enc->embed_image_var(leaf), text);
    if (leaf_out) *leaf_out = leaf;
    return d;
  };

  ad::Var leaf;
  auto loss = eval(img.pixels, &leaf);
  loss.backward();
  const Tensor& analytic = leaf.grad_or_zero();

  auto f = [&](const std::vector<double>& flat) {
    Tensor px = img.pixels;
    for (std::int64_t i = 0; i < px.size(); ++i) px[i] = flat[static_cast<std::size_t>(i)];
    return eval(px, nullptr).value().scalar_value();
  };
  const std::vector<double> x = img.pixels.vec();
  int checked = 0;
  for (std::size_t i = 0; i < x.size() && checked < 8; i += x.size() / 8, ++checked) {
    const double fd = oracles::central_diff(f, x, i, 1e-5);
    const double a = analytic[static_cast<std::int64_t>(i)];
    const double denom = std::max(std::fabs(a), std::fabs(fd));
    if (denom < 1e-9) continue;
    CHECK(std::fabs(a - fd) / denom < 1e-2);
  }
  CHECK(checked == 8);
}

TEST_CASE("encoders: stub feature stacks are deterministic with stated shape") {
  auto fx = make_stub_feature_extractor();
  const auto img = textured(fx->input_resolution(), 2);
  const std::vector<Vec2> coords{{0.3, 0.4}, {0.7, 0.6}, {0.5, 0.5}};
  const auto a = fx->extract(img, {0, 1}, coords);
  const auto b = fx->extract(img, {0, 1}, coords);
  REQUIRE(a.samples.rank() == 2);
  CHECK(a.samples.dim(0) == 3);
  CHECK(a.samples.dim(1) == a.total_dim());
  CHECK(a.total_dim() == 8 + 16);
  for (std::int64_t i = 0; i < a.samples.size(); ++i)
    CHECK(a.samples[i] == b.samples[i]);

  const auto single = fx->extract(img, {1}, {{0.5, 0.5}});
  CHECK(single.samples.dim(0) == 1);
  CHECK(single.samples.dim(1) == 16);
}

TEST_CASE("encoders: constant image gives equal interior hypercolumns") {
  auto fx = make_stub_feature_extractor();
  const int res = fx->input_resolution();
  RasterImage img{Tensor::full({res, res, 3}, 0.6), res, res};
  const std::vector<Vec2> coords{{0.25, 0.3}, {0.5, 0.5}, {0.7, 0.65}, {0.4, 0.7}};
  const auto fs = fx->extract(img, {0, 1}, coords);
  for (int i = 1; i < fs.samples.dim(0); ++i)
    for (int j = 0; j < fs.samples.dim(1); ++j)
      CHECK(std::fabs(fs.samples.at(i, j) - fs.samples.at(0, j)) < 1e-4);
}

TEST_CASE("encoders: feature extraction rejects bad requests") {
  auto fx = make_stub_feature_extractor();
  const auto img = textured(fx->input_resolution(), 3);
  CHECK_THROWS_AS(fx->extract(img, {}, {{0.5, 0.5}}), std::invalid_argument);
  CHECK_THROWS_AS(fx->extract(img, {2}, {{0.5, 0.5}}), std::invalid_argument);
  CHECK_THROWS_AS(fx->extract(img, {0}, {}), std::invalid_argument);
  CHECK_THROWS_AS(fx->extract(img, {0}, {{1.2, 0.5}}), std::invalid_argument);
}

TEST_CASE("encoders: feature gradients reach the image") {
  auto fx = make_stub_feature_extractor();
  const auto img = textured(fx->input_resolution(), 8);
  const std::vector<Vec2> coords{{0.4, 0.45}, {0.6, 0.55}};

  auto eval = [&](const Tensor& px, ad::Var* leaf_out) {
    auto leaf = ad::Var::leaf(px);
    auto fsv = fx->extract_var(leaf, {0, 1}, coords);
    if (leaf_out) *leaf_out = leaf;
    return ad::mean(fsv);
  };

  ad::Var leaf;
  auto loss = eval(img.pixels, &leaf);
  loss.backward();
  const Tensor& analytic = leaf.grad_or_zero();

  auto f = [&](const std::vector<double>& flat) {
    Tensor px = img.pixels;
    for (std::int64_t i = 0; i < px.size(); ++i) px[i] = flat[static_cast<std::size_t>(i)];
    return eval(px, nullptr).value().scalar_value();
  };
  const std::vector<double> x = img.pixels.vec();
  std::vector<std::size_t> probes;
  for (std::int64_t i = 0; i < analytic.size() && probes.size() < 8; ++i)
    if (std::fabs(analytic[i]) > 1e-9) probes.push_back(static_cast<std::size_t>(i));
  REQUIRE(!probes.empty());
  for (std::size_t i : probes) {
    const double fd = oracles::central_diff(f, x, i, 1e-5);
    CHECK(std::fabs(analytic[static_cast<std::int64_t>(i)] - fd) < 1e-6);
  }
  // A pixel far outside every receptive field gets no gradient.
  CHECK(analytic[analytic.size() - 1] == 0.0);
}

namespace {

void write_blob(const std::filesystem::path& p, const std::vector<float>& v) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * 4));
}

std::vector<float> random_floats(std::size_t n, std::uint64_t seed, double s) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal() * s);
  return v;
}

std::filesystem::path make_synthetic_weights() {
  namespace fsys = std::filesystem;
  const auto dir = fsys::temp_directory_path() / "styledraw_synth_weights";
  fsys::create_directories(dir);
  write_blob(dir / "ji0_w.bin", random_floats(3 * 3 * 3 * 4, 1, 0.3));
  write_blob(dir / "ji0_b.bin", std::vector<float>(4, 0.01f));
  write_blob(dir / "jproj.bin", random_floats(4 * 8, 2, 0.5));
  write_blob(dir / "jtext.bin", random_floats(3 * 8, 3, 0.5));
  std::ofstream(dir / "vocab.txt") << "horse\nbeach\ntree\n";
  write_blob(dir / "f0_w.bin", random_floats(3 * 3 * 3 * 4, 4, 0.3));
  write_blob(dir / "f0_b.bin", std::vector<float>(4, 0.0f));
  write_blob(dir / "f1_w.bin", random_floats(3 * 3 * 4 * 6, 5, 0.3));
  write_blob(dir / "f1_b.bin", std::vector<float>(6, 0.0f));
  std::ofstream(dir / "manifest.json") << R"({
    "format_version": 1,
    "joint": {
      "dim": 8,
      "input_resolution": 16,
      "image_convs": [{"out": 4, "pool": true, "weight": "ji0_w.bin", "bias": "ji0_b.bin"}],
      "image_proj": "jproj.bin",
      "text_vocab": "vocab.txt",
      "text_embed": "jtext.bin"
    },
    "features": {
      "input_resolution": 16,
      "convs": [
        {"out": 4, "pool": true, "weight": "f0_w.bin", "bias": "f0_b.bin"},
        {"out": 6, "pool": false, "weight": "f1_w.bin", "bias": "f1_b.bin"}
      ]
    }
  })";
  return dir;
}

}  // namespace

TEST_CASE("encoders: weight-file loader round trip on synthetic weights") {
  const auto dir = make_synthetic_weights();
  auto set = load_encoders(dir.string());
  REQUIRE(set.joint);
  REQUIRE(set.features);
  CHECK(set.joint->dim() == 8);
  CHECK(set.joint->input_resolution() == 16);

  const auto t = set.joint->embed_text("a horse under a tree");
  CHECK(std::fabs(norm(t.values) - 1.0) < 1e-5);
  const auto img = textured(16, 6);
  const auto e = set.joint->embed_image(img);
  CHECK(std::fabs(norm(e.values) - 1.0) < 1e-5);
  CHECK(e.values == set.joint->embed_image(img).values);

  CHECK(set.features->layer_count() == 2);
  const auto fs = set.features->extract(img, {0, 1}, {{0.5, 0.5}});
  CHECK(fs.samples.dim(1) == 4 + 6);
  CHECK(fs.samples.all_finite());
}

TEST_CASE("encoders: loader errors name the missing piece") {
  CHECK_THROWS_WITH_AS(load_encoders(""),
                       doctest::Contains("no weights directory"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(load_encoders("/nonexistent/path"),
                       doctest::Contains("manifest"), std::runtime_error);
}
