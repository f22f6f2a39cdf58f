#include "fuse4d/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <string>

namespace {

int default_threads() {
  if (const char* env = std::getenv("FUSE4D_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 0;  // resolve to hardware concurrency
}

}  // namespace

int main(int argc, char** argv) {
  using namespace fuse4d::cli;

  CLI::App app{"fuse4d: intensity-guided multi-frame 4D fusion for depth sequence denoising"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("fuse4d ") + kVersion);

  SynthOptions synth;
  synth.threads = default_threads();
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic sequence");
  synth_cmd->add_option("--out", synth.out, "output sequence directory")->required();
  synth_cmd->add_option("--scene", synth.scene, "sphere|plane")
      ->check(CLI::IsMember({"sphere", "plane"}));
  synth_cmd->add_option("--frames", synth.frames, "frame count");
  synth_cmd->add_option("--size", synth.size, "frame size in px");
  synth_cmd->add_option("--radius-mm", synth.radius_mm, "sphere radius");
  synth_cmd->add_option("--center-depth-mm", synth.center_depth_mm, "sphere center depth");
  synth_cmd->add_option("--fall-px", synth.fall_px, "fall speed, px/frame");
  synth_cmd->add_option("--plane-depth-mm", synth.plane_depth_mm, "plane depth");
  synth_cmd->add_option("--background-depth-mm", synth.background_depth_mm,
                        "background depth (0 = masked)");
  synth_cmd->add_option("--texture-contrast", synth.texture_contrast, "texture contrast in [0,1]");
  synth_cmd->add_option("--depth-noise-mm", synth.depth_noise_mm, "depth noise sigma");
  synth_cmd->add_option("--intensity-noise", synth.intensity_noise,
                        "intensity noise sigma (fraction of 1)");
  synth_cmd->add_flag("--texture-noise", synth.texture_noise,
                      "scale depth noise by local texture gradient");
  synth_cmd->add_option("--seed", synth.seed, "RNG seed");
  synth_cmd->add_option("--threads", synth.threads, "worker threads (0 = auto)");

  FuseOptions fuse;
  fuse.threads = default_threads();
  CLI::App* fuse_cmd = app.add_subcommand("fuse", "run the 4D fusion pipeline");
  fuse_cmd->add_option("--in", fuse.in, "input sequence directory")->required();
  fuse_cmd->add_option("--out", fuse.out, "output sequence directory")->required();
  fuse_cmd->add_option("--frames-fused", fuse.frames_fused, "temporal window n (odd)");
  fuse_cmd->add_option("--spatial-radius", fuse.spatial_radius, "spatial neighborhood radius");
  fuse_cmd->add_option("--theta", fuse.theta, "forward-backward threshold, px");
  fuse_cmd->add_option("--fb-3d-mm", fuse.fb_3d_mm,
                       "use the 3D forward-backward check with this mm threshold");
  fuse_cmd->add_option("--delta-d", fuse.delta_d, "spatial Gaussian, mm (0 = auto)");
  fuse_cmd->add_option("--delta-g", fuse.delta_g, "intensity Gaussian");
  fuse_cmd->add_option("--delta-f", fuse.delta_f, "temporal Gaussian, frames (0 = auto)");
  fuse_cmd->add_option("--delta-h", fuse.delta_h, "hole-fill Gaussian, mm (0 = auto)");
  fuse_cmd->add_option("--motion-smooth-radius", fuse.motion_smooth_radius,
                       "motion-field smoothing radius, px (0 disables)");
  fuse_cmd->add_option("--patch-radius", fuse.patch_radius, "flow patch radius");
  fuse_cmd->add_option("--search-radius", fuse.search_radius, "flow search radius");
  fuse_cmd->add_option("--lambda", fuse.lambda, "flow smoothness weight");
  fuse_cmd->add_option("--tau1", fuse.tau1, "flow unary truncation");
  fuse_cmd->add_option("--tau2", fuse.tau2, "flow pairwise truncation");
  fuse_cmd->add_option("--flow-iterations", fuse.flow_iterations, "BP iterations");
  fuse_cmd->add_option("--label", fuse.label, "method label recorded in provenance");
  fuse_cmd->add_flag("--verbose", fuse.verbose, "print per-frame progress to stderr");
  fuse_cmd->add_option("--threads", fuse.threads, "worker threads (0 = auto)");

  BaselineOptions baseline;
  baseline.threads = default_threads();
  CLI::App* baseline_cmd = app.add_subcommand("baseline", "run a reference denoiser");
  baseline_cmd->add_option("--in", baseline.in, "input sequence directory")->required();
  baseline_cmd->add_option("--out", baseline.out, "output sequence directory")->required();
  baseline_cmd->add_option("--method", baseline.method,
                           "gaussian|bilateral|joint_bilateral|guided|temporal_average|st_median")
      ->required();
  baseline_cmd->add_option("--window-radius", baseline.window_radius, "window radius, px");
  baseline_cmd->add_option("--sigma-spatial", baseline.sigma_spatial, "spatial sigma, px");
  baseline_cmd->add_option("--sigma-range", baseline.sigma_range, "depth range sigma, mm");
  baseline_cmd->add_option("--sigma-intensity", baseline.sigma_intensity,
                           "intensity range sigma");
  baseline_cmd->add_option("--eps-guided", baseline.eps_guided, "guided-filter regularizer");
  baseline_cmd->add_option("--temporal-radius", baseline.temporal_radius,
                           "temporal radius, frames");
  baseline_cmd->add_option("--threads", baseline.threads, "worker threads (0 = auto)");

  EvalOptions eval;
  eval.threads = default_threads();
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate sequences into a metrics CSV");
  eval_cmd->add_option("--in", eval.inputs, "input sequence directory (repeatable)")->required();
  eval_cmd->add_option("--csv", eval.csv, "output CSV path")->required();
  eval_cmd->add_option("--window", eval.window, "roughness window (odd)");
  eval_cmd->add_option("--roi", eval.roi, "ROI as x0:y0:x1:y1");
  eval_cmd->add_option("--roi-fraction", eval.roi_fraction, "central ROI fraction");
  eval_cmd->add_option("--gt-radius", eval.gt_radius, "ground-truth sphere radius, mm");
  eval_cmd->add_flag("--signed", eval.signed_roughness, "average signed roughness");
  eval_cmd->add_option("--noise-sigma-mm", eval.noise_sigma_mm, "MLESAC inlier sigma, mm");
  eval_cmd->add_option("--seed", eval.seed, "MLESAC seed");
  eval_cmd->add_option("--threads", eval.threads, "worker threads (0 = auto)");

  PipelineOptions pipeline;
  pipeline.threads = default_threads();
  CLI::App* pipeline_cmd = app.add_subcommand("pipeline", "reproduce a figure experiment");
  pipeline_cmd->add_option("--experiment", pipeline.experiment, "fig2|fig3|fig4")->required();
  pipeline_cmd->add_option("--scale", pipeline.scale, "desk|paper");
  pipeline_cmd->add_option("--out", pipeline.out, "output directory")->required();
  pipeline_cmd->add_option("--seed", pipeline.seed, "RNG seed");
  pipeline_cmd->add_option("--window", pipeline.roughness_window,
                           "roughness window override (0 = per-scale default)");
  pipeline_cmd->add_option("--threads", pipeline.threads, "worker threads (0 = auto)");
  pipeline_cmd->add_flag("--verbose", pipeline.verbose, "print sweep progress to stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (synth_cmd->parsed()) return run_synth(synth);
  if (fuse_cmd->parsed()) return run_fuse(fuse);
  if (baseline_cmd->parsed()) return run_baseline(baseline);
  if (eval_cmd->parsed()) return run_eval(eval);
  if (pipeline_cmd->parsed()) return run_pipeline(pipeline);
  return kExitUsage;
}
