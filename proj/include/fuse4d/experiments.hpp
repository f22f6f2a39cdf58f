#pragma once

#include "fuse4d/cli.hpp"
#include "fuse4d/metrics.hpp"
#include "fuse4d/synth.hpp"

#include <string>
#include <vector>

namespace fuse4d::cli {

/// Scene and measurement settings for one experiment scale.
/// desk: 128 px frames, 16 frames, a small near ball (fast).
/// paper: 600 px frames, 50 frames, a 140 mm ball that nearly fills the
/// frame, so the central measurement band lies on its near-frontal cap.
struct ScaleProfile {
  std::string name;
  synth::SphereSceneSpec sphere;
  CameraIntrinsics intrinsics;
  int roughness_window = 7;
  double roi_fraction = 0.47;
  double depth_noise_mm = 0.2;
  double intensity_noise = 0.02;
};

ScaleProfile scale_profile(const std::string& scale);

/// Noisy falling-sphere dataset for a profile (optionally overriding the
/// noise levels; negative keeps the profile value).
Sequence make_sphere_dataset(const ScaleProfile& profile, double depth_noise_mm,
                             double intensity_noise, std::uint64_t seed, int threads);

metrics::RoughnessParams roughness_params_for(const ScaleProfile& profile, int width, int height);

/// The frames-fused ladder used by the sweeps.
std::vector<int> frames_fused_ladder();

/// Baseline configurations compared against the fusion pipeline.
std::vector<baselines::BaselineMethod> comparison_baselines();

/// Mean/std sequence roughness of a baseline applied to every frame.
std::pair<double, double> baseline_sequence_roughness(const Sequence& seq,
                                                      const baselines::BaselineMethod& method,
                                                      const metrics::RoughnessParams& rp,
                                                      int threads);

}  // namespace fuse4d::cli
