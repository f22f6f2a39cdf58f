#pragma once

#include "fuse4d/baselines.hpp"
#include "fuse4d/flow.hpp"
#include "fuse4d/fusion.hpp"
#include "fuse4d/metrics.hpp"
#include "fuse4d/synth.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fuse4d::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit code contract: 0 success, 1 usage/validation, 2 data/compute failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

struct SynthOptions {
  std::string out;
  std::string scene = "sphere";  // sphere | plane
  int frames = 16;
  int size = 128;
  double radius_mm = 140.0;
  double center_depth_mm = 840.0;
  double fall_px = 2.0;
  double plane_depth_mm = 840.0;
  double background_depth_mm = 0.0;
  double texture_contrast = 0.7;
  double depth_noise_mm = 0.0;
  double intensity_noise = 0.0;
  bool texture_noise = false;
  std::uint64_t seed = 1;
  int threads = 0;
};

struct FuseOptions {
  std::string in;
  std::string out;
  int frames_fused = 9;
  int spatial_radius = 2;
  double theta = 2.0;        // FB threshold, px
  double fb_3d_mm = 0.0;     // > 0 switches the FB check to the 3D mm norm
  double delta_d = 0.0;      // 0 = auto
  double delta_g = 0.1;
  double delta_f = 0.0;      // 0 = auto
  double delta_h = 0.0;      // 0 = auto
  int motion_smooth_radius = 4;  // 0 disables motion-field smoothing
  int patch_radius = 3;
  int search_radius = 4;
  double lambda = 0.001;
  double tau1 = 0.05;
  double tau2 = 16.0;
  int flow_iterations = 4;
  std::string label = "ours";
  int threads = 0;
  bool verbose = false;
};

struct BaselineOptions {
  std::string in;
  std::string out;
  std::string method;
  int window_radius = 2;
  double sigma_spatial = 1.5;
  double sigma_range = 5.0;
  double sigma_intensity = 0.1;
  double eps_guided = 1e-2;
  int temporal_radius = 4;
  int threads = 0;
};

struct EvalOptions {
  std::vector<std::string> inputs;
  std::string csv;
  int window = 7;
  std::string roi;             // "x0:y0:x1:y1"; empty = central fraction
  double roi_fraction = 0.47;
  double gt_radius = 0.0;      // 0 = take from the manifest ground truth
  bool signed_roughness = false;
  double noise_sigma_mm = 0.0; // MLESAC inlier sigma; 0 = 1 mm fallback
  std::uint64_t seed = 1;
  int threads = 0;
};

struct PipelineOptions {
  std::string experiment;  // fig2 | fig3 | fig4
  std::string scale = "desk";
  std::string out;
  std::uint64_t seed = 1;
  int roughness_window = 0;  // 0 = per-scale default
  int threads = 0;
  bool verbose = false;
};

int run_synth(const SynthOptions& opt);
int run_fuse(const FuseOptions& opt);
int run_baseline(const BaselineOptions& opt);
int run_eval(const EvalOptions& opt);
int run_pipeline(const PipelineOptions& opt);

// Shared helpers (also used by the acceptance suite).

fusion::FusionParams fusion_params_from(const FuseOptions& opt);
flow::FlowParams flow_params_from(const FuseOptions& opt);

/// Writes `<dir>/provenance.txt` with the command name, version, and every
/// effective parameter, one "key = value" line each, keys sorted.
void write_provenance(const std::string& dir, const std::string& command,
                      const std::vector<std::pair<std::string, std::string>>& params);

/// Reads a provenance file back as key/value pairs (missing file -> empty).
std::vector<std::pair<std::string, std::string>> read_provenance(const std::string& dir);

}  // namespace fuse4d::cli
