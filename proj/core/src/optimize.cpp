// SPDX-License-Identifier: Apache-2.0
#include "styledraw/optimize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "styledraw/rng.hpp"

namespace styledraw {
namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kClipNorm = 10.0;

constexpr std::uint64_t kViewSeedTag = 0x61756776u;
constexpr std::uint64_t kStyleSeedTag = 0x7374796cu;
constexpr std::uint64_t kRefineStyleTag = 0x73326c73u;
constexpr std::uint64_t kRefineSelfTag = 0x73327373u;

// Slot layout shared by moments, gradients, and parameter tensors: one
// [k, 2] tensor per stroke, then color + opacity pairs, then widths.
std::vector<Tensor> slot_tensors(const Drawing& d) {
  std::vector<Tensor> out;
  out.reserve(4 * d.strokes.size());
  for (const auto& s : d.strokes) {
    const int k = static_cast<int>(s.control_points.size());
    Tensor p({k, 2});
    for (int i = 0; i < k; ++i) {
      p.at(i, 0) = s.control_points[static_cast<std::size_t>(i)].x;
      p.at(i, 1) = s.control_points[static_cast<std::size_t>(i)].y;
    }
    out.push_back(std::move(p));
  }
  for (const auto& s : d.strokes) {
    out.push_back(Tensor({3}, {s.color[0], s.color[1], s.color[2]}));
    out.push_back(Tensor({1}, {s.opacity}));
  }
  for (const auto& s : d.strokes) out.push_back(Tensor({1}, {s.width}));
  return out;
}

void store_slots(Drawing& d, const std::vector<Tensor>& slots) {
  const std::size_t S = d.strokes.size();
  for (std::size_t s = 0; s < S; ++s) {
    auto& stroke = d.strokes[s];
    const Tensor& p = slots[s];
    for (std::size_t i = 0; i < stroke.control_points.size(); ++i) {
      stroke.control_points[i].x = p.at(static_cast<int>(i), 0);
      stroke.control_points[i].y = p.at(static_cast<int>(i), 1);
    }
    const Tensor& c = slots[S + 2 * s];
    stroke.color = {c[0], c[1], c[2]};
    stroke.opacity = slots[S + 2 * s + 1][0];
    stroke.width = slots[3 * S + s][0];
  }
}

OptimizerState zero_state(const Drawing& d) {
  OptimizerState st;
  for (Tensor& t : slot_tensors(d)) {
    std::fill(t.vec().begin(), t.vec().end(), 0.0);
    st.m.push_back(t);
  }
  st.v = st.m;
  return st;
}

// Per-group global-norm clip followed by one bias-corrected Adam update.
void adam_step(Drawing& d, const DrawingVars& vars, OptimizerState& state,
               const OptimizationConfig& cfg) {
  const int S = static_cast<int>(d.strokes.size());
  std::vector<Tensor> grads;
  grads.reserve(static_cast<std::size_t>(4) * S);
  for (const auto& v : vars.points) grads.push_back(v.grad_or_zero());
  for (int s = 0; s < S; ++s) {
    grads.push_back(vars.color[static_cast<std::size_t>(s)].grad_or_zero());
    grads.push_back(vars.opacity[static_cast<std::size_t>(s)].grad_or_zero());
  }
  for (const auto& v : vars.width) grads.push_back(v.grad_or_zero());

  std::vector<Tensor> params = slot_tensors(d);
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, state.step_count);
  const double bc2 = 1.0 - std::pow(kAdamBeta2, state.step_count);

  // lr_points counts pixels, so each point axis steps lr / canvas extent in
  // normalized coordinates; the other groups use their rates directly.
  const std::array<std::pair<int, int>, 3> groups{
      {{0, S}, {S, 3 * S}, {3 * S, 4 * S}}};
  const std::array<double, 3> lrs{cfg.lr_points, cfg.lr_color, cfg.lr_width};
  for (std::size_t g = 0; g < groups.size(); ++g) {
    double sq = 0.0;
    for (int slot = groups[g].first; slot < groups[g].second; ++slot)
      for (double gv : grads[static_cast<std::size_t>(slot)].vec())
        sq += gv * gv;
    const double norm = std::sqrt(sq);
    const double rescale = norm > kClipNorm ? kClipNorm / norm : 1.0;
    for (int slot = groups[g].first; slot < groups[g].second; ++slot) {
      Tensor& m = state.m[static_cast<std::size_t>(slot)];
      Tensor& v = state.v[static_cast<std::size_t>(slot)];
      Tensor& p = params[static_cast<std::size_t>(slot)];
      const Tensor& gr = grads[static_cast<std::size_t>(slot)];
      for (std::int64_t e = 0; e < gr.size(); ++e) {
        double lr = lrs[g];
        if (g == 0)
          lr /= e % 2 == 0 ? double(d.canvas_width) : double(d.canvas_height);
        const double gv = gr[e] * rescale;
        m[e] = kAdamBeta1 * m[e] + (1.0 - kAdamBeta1) * gv;
        v[e] = kAdamBeta2 * v[e] + (1.0 - kAdamBeta2) * gv * gv;
        p[e] -= lr * (m[e] / bc1) / (std::sqrt(v[e] / bc2) + kAdamEps);
      }
    }
  }
  store_slots(d, params);
}

void check_finite_drawing(const Drawing& d, int iteration) {
  bool ok = true;
  for (const auto& s : d.strokes) {
    for (const auto& p : s.control_points)
      ok = ok && std::isfinite(p.x) && std::isfinite(p.y);
    for (double c : s.color) ok = ok && std::isfinite(c);
    ok = ok && std::isfinite(s.opacity) && std::isfinite(s.width);
  }
  if (!ok)
    throw std::runtime_error("synthesis diverged at iteration " +
                             std::to_string(iteration) +
                             ": non-finite drawing parameter");
}

double effective_style_weight(const OptimizationConfig& cfg, int iteration) {
  if (cfg.style_warmup_iters <= 0) return cfg.style_weight;
  return cfg.style_weight *
         std::min(1.0, double(iteration) / cfg.style_warmup_iters);
}

RunResult run_loop(const std::string& prompt, const RasterImage* style,
                   const OptimizationConfig& cfg, const EncoderSet& encoders,
                   const ProgressFn& progress, const ResumePoint* resume) {
  validate_optimization(cfg);
  if (!encoders.joint)
    throw std::invalid_argument("synthesize: encoder set has no joint encoder");
  if (style && !encoders.features)
    throw std::invalid_argument(
        "synthesize: encoder set has no feature extractor");

  RunResult out;
  out.config_echo = cfg;

  Drawing d;
  int start = 0;
  if (resume) {
    d = resume->drawing;
    validate_drawing(d);
    if (d.canvas_width != cfg.canvas_width ||
        d.canvas_height != cfg.canvas_height)
      throw std::invalid_argument(
          "resume state: canvas size does not match the config");
    validate_optimizer_state(resume->optimizer, d);
    out.optimizer_state = resume->optimizer;
    start = resume->start_iteration;
    if (start < 0 || start > cfg.iterations)
      throw std::invalid_argument(
          "resume state: start iteration outside [0, iterations]");
  } else {
    d = random_drawing(cfg.num_paths, cfg.segments_per_path, cfg.canvas_width,
                       cfg.canvas_height, cfg.seed);
    out.optimizer_state = zero_state(d);
  }

  const ad::Var text = encoders.joint->embed_text_var(prompt);
  AugmentationConfig aug;
  aug.num_views = cfg.num_augmentations;

  for (int iter = start; iter < cfg.iterations; ++iter) {
    const DrawingVars vars = make_drawing_vars(d);
    const ad::Var render_v = render_var(vars);
    const ad::Var content_v =
        content_loss_var(render_v, text, aug, *encoders.joint,
                         mix_seed(cfg.seed, std::uint64_t(iter), kViewSeedTag));
    const double lambda_eff = effective_style_weight(cfg, iter);

    double style_val = 0.0;
    ad::Var total_v = content_v;
    if (style) {
      const ad::Var style_v = style_loss_var(
          render_v, *style, *encoders.features, cfg.feature_samples,
          mix_seed(cfg.seed, std::uint64_t(iter), kStyleSeedTag));
      style_val = style_v.value().scalar_value();
      if (lambda_eff > 0.0)
        total_v = ad::add(content_v, ad::scale(style_v, lambda_eff));
    }
    const double content_val = content_v.value().scalar_value();
    const double total_val = total_loss(content_val, style_val, lambda_eff);
    if (!std::isfinite(total_val))
      throw std::runtime_error(
          "synthesis diverged at iteration " + std::to_string(iter) +
          ": content=" + std::to_string(content_val) +
          " style=" + std::to_string(style_val));

    total_v.backward();
    adam_step(d, vars, out.optimizer_state, cfg);
    d = clamp_parameters(std::move(d));
    check_finite_drawing(d, iter);

    const LossReport report{iter, content_val, style_val, total_val,
                            lambda_eff};
    out.loss_history.push_back(report);
    if (progress) progress(iter, report);
    if ((iter + 1) % cfg.snapshot_interval == 0)
      out.snapshots.push_back({iter, render(d)});
  }

  out.final_drawing = std::move(d);
  return out;
}

}  // namespace

void validate_optimizer_state(const OptimizerState& st, const Drawing& d) {
  const auto want = slot_tensors(d);
  if (st.m.size() != want.size() || st.v.size() != want.size())
    throw std::invalid_argument(
        "resume state: optimizer slot count does not match the drawing");
  for (std::size_t i = 0; i < want.size(); ++i)
    if (st.m[i].shape() != want[i].shape() ||
        st.v[i].shape() != want[i].shape())
      throw std::invalid_argument(
          "resume state: optimizer slot shape does not match the drawing");
  if (st.step_count < 0)
    throw std::invalid_argument("resume state: negative step count");
}

RunResult synthesize(const std::string& prompt, const RasterImage& style,
                     const OptimizationConfig& cfg, const EncoderSet& encoders,
                     const ProgressFn& progress, const ResumePoint* resume) {
  return run_loop(prompt, &style, cfg, encoders, progress, resume);
}

RunResult synthesize_content_only(const std::string& prompt,
                                  const OptimizationConfig& cfg,
                                  const EncoderSet& encoders,
                                  const ProgressFn& progress,
                                  const ResumePoint* resume) {
  OptimizationConfig content_cfg = cfg;
  content_cfg.style_weight = 0.0;
  return run_loop(prompt, nullptr, content_cfg, encoders, progress, resume);
}

DecoupledResult decoupled_baseline(const std::string& prompt,
                                   const RasterImage& style,
                                   const OptimizationConfig& cfg,
                                   const EncoderSet& encoders,
                                   const DecoupledStage2Config& stage2,
                                   const ProgressFn& stage2_progress) {
  if (stage2.iterations < 0)
    throw std::invalid_argument(
        "decoupled baseline: stage-2 iterations must be >= 0");
  if (!(stage2.lr > 0.0) || !std::isfinite(stage2.lr))
    throw std::invalid_argument(
        "decoupled baseline: stage-2 lr must be positive and finite");
  if (!(stage2.self_similarity_weight >= 0.0) ||
      !std::isfinite(stage2.self_similarity_weight))
    throw std::invalid_argument(
        "decoupled baseline: self_similarity_weight must be >= 0");
  if (!encoders.features)
    throw std::invalid_argument(
        "decoupled baseline: encoder set has no feature extractor");

  DecoupledResult out;
  out.stage1 = synthesize_content_only(prompt, cfg, encoders);
  out.final_pixels = render(out.stage1.final_drawing);
  if (stage2.iterations == 0) return out;

  const FeatureExtractor& fx = *encoders.features;
  const int res = fx.input_resolution();
  const auto layers = default_feature_layers(fx);
  const int h = out.final_pixels.height, w = out.final_pixels.width;

  const Tensor base_at_res =
      (h == res && w == res)
          ? out.final_pixels.pixels
          : ad::resample_projective(ad::Var::constant(out.final_pixels.pixels),
                                    Mat3::identity(), res, res)
                .value();
  const RasterImage base_img{base_at_res, res, res};

  Tensor px = out.final_pixels.pixels;
  const double beta = stage2.self_similarity_weight;

  for (int iter = 0; iter < stage2.iterations; ++iter) {
    const ad::Var leaf = ad::Var::leaf(px);
    const ad::Var style_v = style_loss_var(
        leaf, style, fx, cfg.feature_samples,
        mix_seed(cfg.seed, std::uint64_t(iter), kRefineStyleTag));
    const double style_val = style_v.value().scalar_value();

    double content_val = 0.0;
    ad::Var total_v = style_v;
    if (beta > 0.0) {
      const auto coords = sample_feature_coords(
          cfg.feature_samples,
          mix_seed(cfg.seed, std::uint64_t(iter), kRefineSelfTag));
      const ad::Var cur_at_res =
          (h == res && w == res)
              ? leaf
              : ad::resample_projective(leaf, Mat3::identity(), res, res);
      const ad::Var cur_feats = fx.extract_var(cur_at_res, layers, coords);
      const Tensor ref_feats = fx.extract(base_img, layers, coords).samples;
      const ad::Var self_v =
          ad::scale(self_similarity_var(cur_feats, ref_feats), beta);
      content_val = self_v.value().scalar_value();
      total_v = ad::add(style_v, self_v);
    }
    const double total_val = total_loss(content_val, style_val, 1.0);
    if (!std::isfinite(total_val))
      throw std::runtime_error(
          "pixel refinement diverged at iteration " + std::to_string(iter) +
          ": style=" + std::to_string(style_val) +
          " structure=" + std::to_string(content_val));

    total_v.backward();
    const Tensor g = leaf.grad_or_zero();

    // Plain descent: the pixel leaf sits at the loss minimum when the style
    // matches, and only a step proportional to the gradient keeps it there.
    double sq = 0.0;
    for (double gv : g.vec()) sq += gv * gv;
    const double norm = std::sqrt(sq);
    const double rescale = norm > kClipNorm ? kClipNorm / norm : 1.0;
    for (std::int64_t e = 0; e < px.size(); ++e)
      px[e] = std::clamp(px[e] - stage2.lr * g[e] * rescale, 0.0, 1.0);

    if (stage2_progress)
      stage2_progress(iter,
                      LossReport{iter, content_val, style_val, total_val, 1.0});
  }

  out.final_pixels = RasterImage{std::move(px), h, w};
  return out;
}

}  // namespace styledraw
