// SPDX-License-Identifier: Apache-2.0
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"
#include "styledraw/encoders.hpp"

namespace styledraw {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error(
      "encoder weights: " + what +
      "; pass --weights DIR or set STYLEDRAW_WEIGHTS, or run with "
      "--stub-encoders");
}

// Raw little-endian float32 blob with a known element count.
Tensor load_blob(const fs::path& path, std::vector<int> dims) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail("missing blob " + path.string());
  const auto bytes = static_cast<std::uint64_t>(in.tellg());
  Tensor t = Tensor::zeros(std::move(dims));
  if (bytes != static_cast<std::uint64_t>(t.size()) * 4)
    fail("blob " + path.string() + " holds " + std::to_string(bytes / 4) +
         " floats, expected " + std::to_string(t.size()));
  in.seekg(0);
  std::vector<float> raw(static_cast<std::size_t>(t.size()));
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(bytes));
  if (!in) fail("short read on " + path.string());
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = raw[static_cast<std::size_t>(i)];
  return t;
}

struct ConvLayer {
  Tensor w, b;
  bool pool = false;
  int cout = 0;
};

std::vector<ConvLayer> load_conv_stack(const json& arr, const fs::path& dir,
                                       int cin) {
  if (!arr.is_array() || arr.empty()) fail("manifest conv list empty");
  std::vector<ConvLayer> stack;
  for (const auto& j : arr) {
    ConvLayer l;
    l.cout = j.at("out").get<int>();
    l.pool = j.value("pool", false);
    if (l.cout < 1) fail("manifest conv out-channels must be positive");
    l.w = load_blob(dir / j.at("weight").get<std::string>(), {3, 3, cin, l.cout});
    l.b = load_blob(dir / j.at("bias").get<std::string>(), {l.cout});
    cin = l.cout;
    stack.push_back(std::move(l));
  }
  return stack;
}

// Runs the stack; when `taps` is set, records each post-activation map.
ad::Var run_conv_stack(const std::vector<ConvLayer>& stack, ad::Var x,
                       std::vector<ad::Var>* taps) {
  for (const auto& l : stack) {
    x = ad::relu(ad::conv2d_3x3(x, ad::Var::constant(l.w), ad::Var::constant(l.b)));
    if (taps) taps->push_back(x);
    if (l.pool) x = ad::maxpool2(x);
  }
  return x;
}

std::vector<std::string> tokenize(const std::string& prompt) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : prompt) {
    const unsigned char u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

std::uint64_t fnv1a_str(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

class RealJoint final : public TextImageEncoder {
 public:
  RealJoint(const json& j, const fs::path& dir) {
    dim_ = j.at("dim").get<int>();
    res_ = j.at("input_resolution").get<int>();
    if (dim_ < 1 || res_ < 8) fail("joint manifest has degenerate dims");
    convs_ = load_conv_stack(j.at("image_convs"), dir, 3);
    int final_res = res_;
    for (const auto& l : convs_)
      if (l.pool) final_res /= 2;
    if (final_res < 1) fail("joint image stack pools below 1 px");
    final_res_ = final_res;
    proj_ = load_blob(dir / j.at("image_proj").get<std::string>(),
                      {convs_.back().cout, dim_});

    const fs::path vocab_path = dir / j.at("text_vocab").get<std::string>();
    std::ifstream vin(vocab_path);
    if (!vin) fail("missing vocab " + vocab_path.string());
    std::string line;
    while (std::getline(vin, line))
      if (!line.empty()) vocab_.emplace(line, static_cast<int>(vocab_.size()));
    if (vocab_.empty()) fail("vocab " + vocab_path.string() + " is empty");
    text_embed_ = load_blob(dir / j.at("text_embed").get<std::string>(),
                            {static_cast<int>(vocab_.size()), dim_});
  }

  int input_resolution() const override { return res_; }
  int dim() const override { return dim_; }

 protected:
  ad::Var do_embed_text(const std::string& prompt) const override {
    const auto tokens = tokenize(prompt);
    if (tokens.empty())
      throw std::invalid_argument("encoder: prompt has no tokens");
    std::vector<double> v(static_cast<std::size_t>(dim_), 0.0);
    for (const auto& tok : tokens) {
      auto it = vocab_.find(tok);
      const int row = it != vocab_.end()
                          ? it->second
                          : static_cast<int>(fnv1a_str(tok) % vocab_.size());
      for (int d = 0; d < dim_; ++d)
        v[static_cast<std::size_t>(d)] += text_embed_.at(row, d);
    }
    double n = 0.0;
    for (double& x : v) {
      x /= static_cast<double>(tokens.size());
      n += x * x;
    }
    n = std::sqrt(std::max(n, 1e-24));
    for (double& x : v) x /= n;
    return ad::Var::constant(Tensor({dim_}, std::move(v)));
  }

  ad::Var do_embed_image(const ad::Var& img) const override {
    auto x = run_conv_stack(convs_, img, nullptr);
    auto pooled = ad::avgpool_blocks(x, final_res_);
    auto flat = ad::reshape(pooled, {1, convs_.back().cout});
    auto out = ad::matmul(flat, ad::Var::constant(proj_));
    return ad::l2_normalize_rows(ad::reshape(out, {dim_}));
  }

 private:
  int dim_ = 0, res_ = 0, final_res_ = 0;
  std::vector<ConvLayer> convs_;
  Tensor proj_;
  std::unordered_map<std::string, int> vocab_;
  Tensor text_embed_;
};

class RealFeatures final : public FeatureExtractor {
 public:
  RealFeatures(const json& j, const fs::path& dir) {
    res_ = j.at("input_resolution").get<int>();
    if (res_ < 8) fail("features manifest has degenerate resolution");
    convs_ = load_conv_stack(j.at("convs"), dir, 3);
    int r = res_;
    for (const auto& l : convs_) {
      if (r < 1) fail("features stack pools below 1 px");
      if (l.pool) r /= 2;
    }
  }

  int input_resolution() const override { return res_; }
  int layer_count() const override { return static_cast<int>(convs_.size()); }
  int layer_dim(int layer) const override {
    return convs_[static_cast<std::size_t>(layer)].cout;
  }

 protected:
  ad::Var do_extract(const ad::Var& img, const std::vector<int>& layers,
                     const std::vector<Vec2>& coords) const override {
    std::vector<ad::Var> taps;
    run_conv_stack(convs_, img, &taps);
    std::vector<ad::Var> cols;
    cols.reserve(layers.size());
    for (int id : layers)
      cols.push_back(ad::sample_bilinear(taps[static_cast<std::size_t>(id)], coords));
    return ad::concat_cols(cols);
  }

 private:
  int res_ = 0;
  std::vector<ConvLayer> convs_;
};

}  // namespace

EncoderSet load_encoders(const std::string& weights_dir) {
  if (weights_dir.empty()) fail("no weights directory given");
  const fs::path dir(weights_dir);
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) fail("missing manifest " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    fail("unparseable manifest " + manifest_path.string() + " (" + e.what() + ")");
  }
  if (manifest.value("format_version", 0) != 1)
    fail("manifest " + manifest_path.string() + " has unsupported format_version");
  try {
    EncoderSet set;
    set.joint = std::make_unique<RealJoint>(manifest.at("joint"), dir);
    set.features = std::make_unique<RealFeatures>(manifest.at("features"), dir);
    return set;
  } catch (const json::exception& e) {
    fail("manifest " + manifest_path.string() + " is missing fields (" + e.what() + ")");
  }
}

}  // namespace styledraw
