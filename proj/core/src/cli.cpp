// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "styledraw/cli.hpp"
#include "styledraw/io.hpp"

namespace styledraw {
namespace {

namespace fs = std::filesystem;

void usage_error(const CLI::App& app, const std::string& message) {
  std::fprintf(stderr, "error: %s\n%s", message.c_str(), app.help().c_str());
}

std::string snapshot_name(int iteration) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "iter_%04d.png", iteration);
  return buf;
}

void write_outputs(const fs::path& out_dir, const Drawing& drawing,
                   const RasterImage& final_image, const RunResult& run,
                   const std::string& prompt, const std::string& style_path) {
  fs::create_directories(out_dir / "snapshots");
  export_svg(drawing, (out_dir / "final.svg").string());
  export_png(final_image, (out_dir / "final.png").string());
  write_loss_csv(run.loss_history, (out_dir / "losses.csv").string());
  Checkpoint ck;
  ck.drawing = drawing;
  ck.config = run.config_echo;
  ck.iteration = run.config_echo.iterations;
  ck.prompt = prompt;
  ck.style_path = style_path;
  ck.optimizer = run.optimizer_state;
  save_checkpoint(ck, (out_dir / "checkpoint.json").string());
  for (const auto& snap : run.snapshots)
    export_png(snap.image,
               (out_dir / "snapshots" / snapshot_name(snap.iteration))
                   .string());
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"stroke-based drawing synthesis from a prompt and a style"};
  app.get_formatter()->column_width(28);

  OptimizationConfig defaults;
  std::string prompt, style_path, out_dir = "out", weights_dir, resume_path;
  std::string baseline = "coupled";
  int size = defaults.canvas_width;
  int stage2_iters = DecoupledStage2Config{}.iterations;
  bool stub_encoders = false;
  OptimizationConfig cfg = defaults;

  auto* prompt_opt =
      app.add_option("--prompt", prompt, "text the drawing should depict");
  auto* style_opt = app.add_option("--style", style_path, "style image path");
  app.add_option("--out", out_dir, "output directory");
  auto* iters_opt =
      app.add_option("--iters", cfg.iterations, "optimization iterations");
  app.add_option("--num-paths", cfg.num_paths, "number of strokes");
  app.add_option("--segments", cfg.segments_per_path,
                 "curve segments per stroke");
  app.add_option("--style-weight", cfg.style_weight, "style loss weight");
  app.add_option("--warmup", cfg.style_warmup_iters,
                 "style weight warmup iterations");
  app.add_option("--augments", cfg.num_augmentations,
                 "augmented views per iteration");
  app.add_option("--seed", cfg.seed, "random seed");
  app.add_option("--size", size, "canvas size in pixels");
  app.add_option("--snapshot-every", cfg.snapshot_interval,
                 "iterations between snapshots");
  app.add_option("--stage2-iters", stage2_iters,
                 "pixel refinement iterations (decoupled baseline)");
  app.add_flag("--stub-encoders", stub_encoders,
               "use the built-in deterministic test encoders");
  app.add_option("--weights", weights_dir,
                 "encoder weights directory (default: STYLEDRAW_WEIGHTS)");
  app.add_option("--baseline", baseline, "optimization scheme")
      ->check(CLI::IsMember({"coupled", "decoupled"}));
  app.add_option("--resume", resume_path, "checkpoint to continue from");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::printf("%s", app.help().c_str());
    return 0;
  } catch (const CLI::ParseError& e) {
    usage_error(app, e.what());
    return 1;
  }

  if (resume_path.empty() && prompt.empty()) {
    usage_error(app, "--prompt is required unless --resume is given");
    return 1;
  }
  if (baseline == "decoupled" && style_path.empty()) {
    usage_error(app, "--baseline decoupled requires --style");
    return 1;
  }
  if (baseline == "decoupled" && !resume_path.empty()) {
    usage_error(app,
                "--resume only continues coupled runs; rerun the decoupled "
                "baseline instead");
    return 1;
  }
  try {
    EncoderSet encoders =
        stub_encoders
            ? make_stub_encoders()
            : load_encoders(weights_dir.empty() ? weights_dir_from_env()
                                                : weights_dir);

    ResumePoint resume;
    const ResumePoint* resume_ptr = nullptr;
    if (!resume_path.empty()) {
      const Checkpoint ck = load_checkpoint(resume_path);
      const int target =
          iters_opt->count() > 0 ? cfg.iterations : ck.config.iterations;
      cfg = ck.config;
      cfg.iterations = target;
      if (cfg.iterations < ck.iteration) {
        usage_error(app, "--iters is below the checkpoint's iteration count");
        return 1;
      }
      if (prompt_opt->count() == 0) prompt = ck.prompt;
      if (style_opt->count() == 0) style_path = ck.style_path;
      resume = ResumePoint{ck.drawing, ck.optimizer, ck.iteration};
      resume_ptr = &resume;
    } else {
      cfg.canvas_width = cfg.canvas_height = size;
    }
    validate_optimization(cfg);

    RasterImage style;
    const bool have_style = !style_path.empty();
    if (have_style)
      style = load_style_image(style_path,
                               encoders.features->input_resolution());

    const ProgressFn progress = [&cfg](int iter, const LossReport& rep) {
      if ((iter + 1) % cfg.snapshot_interval == 0 ||
          iter + 1 == cfg.iterations)
        std::printf("iter %d content %.6f style %.6f total %.6f\n",
                    rep.iteration, rep.content_loss, rep.style_loss,
                    rep.total_loss);
    };

    const fs::path out(out_dir);
    if (baseline == "decoupled") {
      DecoupledStage2Config stage2;
      stage2.iterations = stage2_iters;
      const auto result = decoupled_baseline(
          prompt, style, cfg, encoders, stage2,
          [](int iter, const LossReport& rep) {
            std::printf("refine %d structure %.6f style %.6f\n", iter,
                        rep.content_loss, rep.style_loss);
          });
      write_outputs(out, result.stage1.final_drawing, result.final_pixels,
                    result.stage1, prompt, style_path);
    } else {
      const RunResult run =
          have_style
              ? synthesize(prompt, style, cfg, encoders, progress, resume_ptr)
              : synthesize_content_only(prompt, cfg, encoders, progress,
                                        resume_ptr);
      write_outputs(out, run.final_drawing, render(run.final_drawing), run,
                    prompt, style_path);
    }
    std::printf("wrote %s\n", (out / "final.svg").string().c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace styledraw
