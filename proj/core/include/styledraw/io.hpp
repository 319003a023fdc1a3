// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "styledraw/objective.hpp"
#include "styledraw/optimize.hpp"
#include "styledraw/raster.hpp"
#include "styledraw/stroke_model.hpp"

namespace styledraw {

// One SVG path element per stroke, pixel coordinates at 4 decimals,
// full-canvas background rect first. import_svg / parse_svg accept only
// this dialect and recover the drawing within 1e-4 in normalized
// coordinates (colors within 8-bit quantization).
std::string svg_string(const Drawing& d);
void export_svg(const Drawing& d, const std::string& path);
Drawing parse_svg(const std::string& text);
Drawing import_svg(const std::string& path);

// 8-bit RGB with value = round(channel * 255), half away from zero.
void export_png(const RasterImage& img, const std::string& path);

// Any common raster format, decoded to RGB in [0, 1].
RasterImage load_image(const std::string& path);

// load_image, center-cropped square, resized to resolution x resolution.
RasterImage load_style_image(const std::string& path, int resolution);

// Header iteration,content,style,total,lambda; one row per report, doubles
// at full round-trip precision.
void write_loss_csv(const std::vector<LossReport>& history,
                    const std::string& path);

// Saved run state. Beyond the drawing / config / completed-iteration core,
// it records the prompt and style path so --resume needs no repeated flags,
// and the optimizer moments so a resumed run is bit-identical to an
// uninterrupted one. rng_state documents the sampling discipline; every
// per-iteration stream is derived from (config.seed, iteration), so no
// generator position needs saving.
struct Checkpoint {
  Drawing drawing;
  OptimizationConfig config;
  int iteration = 0;
  std::string prompt;
  std::string style_path;
  OptimizerState optimizer;
  std::string rng_state = kCheckpointRngState;
  int format_version = kCheckpointFormatVersion;

  static constexpr int kCheckpointFormatVersion = 1;
  static constexpr const char* kCheckpointRngState = "per-iteration-seeds-v1";
};

struct CheckpointVersionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CheckpointSchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CheckpointInvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Canonical JSON with sorted keys and round-trip float precision.
void save_checkpoint(const Checkpoint& ck, const std::string& path);

// Rejects unknown format versions (CheckpointVersionError), malformed or
// mistyped documents (CheckpointSchemaError), and well-formed documents
// whose values break type invariants (CheckpointInvariantError).
Checkpoint load_checkpoint(const std::string& path);

}  // namespace styledraw
