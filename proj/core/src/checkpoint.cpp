// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "styledraw/io.hpp"

namespace styledraw {
namespace {

using nlohmann::json;

json drawing_to_json(const Drawing& d) {
  json strokes = json::array();
  for (const auto& s : d.strokes) {
    json pts = json::array();
    for (const auto& p : s.control_points) pts.push_back({p.x, p.y});
    strokes.push_back({{"color", {s.color[0], s.color[1], s.color[2]}},
                       {"control_points", pts},
                       {"opacity", s.opacity},
                       {"width", s.width}});
  }
  return {{"background_color",
           {d.background_color[0], d.background_color[1],
            d.background_color[2]}},
          {"canvas_height", d.canvas_height},
          {"canvas_width", d.canvas_width},
          {"strokes", strokes}};
}

json config_to_json(const OptimizationConfig& c) {
  return {{"canvas_height", c.canvas_height},
          {"canvas_width", c.canvas_width},
          {"feature_samples", c.feature_samples},
          {"iterations", c.iterations},
          {"lr_color", c.lr_color},
          {"lr_points", c.lr_points},
          {"lr_width", c.lr_width},
          {"num_augmentations", c.num_augmentations},
          {"num_paths", c.num_paths},
          {"seed", c.seed},
          {"segments_per_path", c.segments_per_path},
          {"snapshot_interval", c.snapshot_interval},
          {"style_warmup_iters", c.style_warmup_iters},
          {"style_weight", c.style_weight}};
}

json moments_to_json(const std::vector<Tensor>& slots) {
  json out = json::array();
  for (const auto& t : slots) out.push_back(t.vec());
  return out;
}

Drawing drawing_from_json(const json& j) {
  Drawing d;
  d.strokes.clear();
  d.canvas_width = j.at("canvas_width").get<int>();
  d.canvas_height = j.at("canvas_height").get<int>();
  const auto bg = j.at("background_color");
  if (!bg.is_array() || bg.size() != 3)
    throw json::type_error::create(302, "background_color must have 3 values",
                                   &j);
  for (std::size_t c = 0; c < 3; ++c)
    d.background_color[c] = bg.at(c).get<double>();
  for (const auto& js : j.at("strokes")) {
    StrokePath s;
    const auto col = js.at("color");
    if (!col.is_array() || col.size() != 3)
      throw json::type_error::create(302, "color must have 3 values", &js);
    for (std::size_t c = 0; c < 3; ++c)
      s.color[c] = col.at(c).get<double>();
    s.opacity = js.at("opacity").get<double>();
    s.width = js.at("width").get<double>();
    for (const auto& jp : js.at("control_points")) {
      if (!jp.is_array() || jp.size() != 2)
        throw json::type_error::create(302, "control point must be [x, y]",
                                       &js);
      s.control_points.emplace_back(jp.at(0).get<double>(),
                                    jp.at(1).get<double>());
    }
    d.strokes.push_back(std::move(s));
  }
  return d;
}

OptimizationConfig config_from_json(const json& j) {
  OptimizationConfig c;
  c.canvas_height = j.at("canvas_height").get<int>();
  c.canvas_width = j.at("canvas_width").get<int>();
  c.feature_samples = j.at("feature_samples").get<int>();
  c.iterations = j.at("iterations").get<int>();
  c.lr_color = j.at("lr_color").get<double>();
  c.lr_points = j.at("lr_points").get<double>();
  c.lr_width = j.at("lr_width").get<double>();
  c.num_augmentations = j.at("num_augmentations").get<int>();
  c.num_paths = j.at("num_paths").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.segments_per_path = j.at("segments_per_path").get<int>();
  c.snapshot_interval = j.at("snapshot_interval").get<int>();
  c.style_warmup_iters = j.at("style_warmup_iters").get<int>();
  c.style_weight = j.at("style_weight").get<double>();
  return c;
}

// Rebuilds moment tensors in the drawing's slot shapes from flat arrays.
std::vector<Tensor> moments_from_json(const json& j, const Drawing& d) {
  std::vector<std::vector<int>> shapes;
  for (const auto& s : d.strokes)
    shapes.push_back({static_cast<int>(s.control_points.size()), 2});
  for (std::size_t i = 0; i < d.strokes.size(); ++i) {
    shapes.push_back({3});
    shapes.push_back({1});
  }
  for (std::size_t i = 0; i < d.strokes.size(); ++i) shapes.push_back({1});

  if (!j.is_array() || j.size() != shapes.size())
    throw json::type_error::create(302, "optimizer slot count mismatch", &j);
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    auto data = j.at(i).get<std::vector<double>>();
    Tensor t(shapes[i]);
    if (static_cast<std::int64_t>(data.size()) != t.size())
      throw json::type_error::create(302, "optimizer slot size mismatch", &j);
    t = Tensor(shapes[i], std::move(data));
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  const json doc = {{"config", config_to_json(ck.config)},
                    {"drawing", drawing_to_json(ck.drawing)},
                    {"format_version", ck.format_version},
                    {"iteration", ck.iteration},
                    {"optimizer",
                     {{"m", moments_to_json(ck.optimizer.m)},
                      {"step_count", ck.optimizer.step_count},
                      {"v", moments_to_json(ck.optimizer.v)}}},
                    {"prompt", ck.prompt},
                    {"rng_state", ck.rng_state},
                    {"style_path", ck.style_path}};
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint save: cannot open " + path);
  f << doc.dump(2) << "\n";
  if (!f)
    throw std::runtime_error("checkpoint save: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointSchemaError("checkpoint load: cannot open " + path);
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::parse_error& e) {
    throw CheckpointSchemaError(std::string("checkpoint load: not JSON: ") +
                                e.what());
  }

  if (!doc.is_object() || !doc.contains("format_version") ||
      !doc.at("format_version").is_number_integer())
    throw CheckpointSchemaError(
        "checkpoint load: missing integer format_version");
  const int version = doc.at("format_version").get<int>();
  if (version != Checkpoint::kCheckpointFormatVersion)
    throw CheckpointVersionError(
        "checkpoint load: format_version " + std::to_string(version) +
        " is not supported (want " +
        std::to_string(Checkpoint::kCheckpointFormatVersion) + ")");

  Checkpoint ck;
  try {
    ck.drawing = drawing_from_json(doc.at("drawing"));
    ck.config = config_from_json(doc.at("config"));
    ck.iteration = doc.at("iteration").get<int>();
    ck.prompt = doc.at("prompt").get<std::string>();
    ck.style_path = doc.at("style_path").get<std::string>();
    ck.rng_state = doc.at("rng_state").get<std::string>();
    const auto& opt = doc.at("optimizer");
    ck.optimizer.step_count = opt.at("step_count").get<int>();
    ck.optimizer.m = moments_from_json(opt.at("m"), ck.drawing);
    ck.optimizer.v = moments_from_json(opt.at("v"), ck.drawing);
    ck.format_version = version;
  } catch (const json::exception& e) {
    throw CheckpointSchemaError(std::string("checkpoint load: ") + e.what());
  }

  try {
    validate_drawing(ck.drawing);
    validate_optimization(ck.config);
    validate_optimizer_state(ck.optimizer, ck.drawing);
    if (ck.drawing.canvas_width != ck.config.canvas_width ||
        ck.drawing.canvas_height != ck.config.canvas_height)
      throw std::invalid_argument(
          "drawing canvas does not match the config canvas");
    if (ck.iteration < 0 || ck.iteration > ck.config.iterations)
      throw std::invalid_argument(
          "iteration outside [0, config.iterations]");
  } catch (const std::invalid_argument& e) {
    throw CheckpointInvariantError(std::string("checkpoint load: ") +
                                   e.what());
  }
  return ck;
}

}  // namespace styledraw
