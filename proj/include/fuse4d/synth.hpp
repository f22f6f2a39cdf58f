#pragma once

#include "fuse4d/flow.hpp"
#include "fuse4d/types.hpp"

#include <cstdint>

namespace fuse4d::synth {

/// Falling-sphere scene: a textured sphere translating parallel to the image
/// plane so that its projection falls at `fall_px` pixels per frame, over a
/// textured (or masked) background.
struct SphereSceneSpec {
  double radius_mm = 140.0;
  double center_depth_mm = 840.0;
  int image_size = 128;
  double fall_px = 2.0;
  int frame_count = 16;
  double background_depth_mm = 0.0;  // 0 = background masked out
  double texture_contrast = 0.7;
  double start_row_px = -1.0;  // < 0: center the whole fall vertically

  void validate() const {
    if (radius_mm <= 0.0 || center_depth_mm <= radius_mm || image_size < 16 || frame_count < 1 ||
        fall_px < 0.0 || texture_contrast < 0.0 || texture_contrast > 1.0) {
      throw InvalidInput("SphereSceneSpec: out-of-range parameter");
    }
  }
};

struct NoiseSpec {
  double depth_sigma = 0.0;      // mm
  double intensity_sigma = 0.0;  // fraction of max intensity
  bool texture_correlated = false;
  double outlier_fraction = 0.0;  // flow corruption budget, used by inject_outliers callers
  std::uint64_t seed = 0;

  void validate() const {
    if (depth_sigma < 0.0 || intensity_sigma < 0.0 || outlier_fraction < 0.0 ||
        outlier_fraction > 1.0) {
      throw InvalidInput("NoiseSpec: magnitudes must be >= 0 and fractions <= 1");
    }
  }
};

/// Intrinsics used by the synthetic experiments: focal length scales with the
/// frame size (f = 700 px at 600 px frames), principal point at the grid
/// center.
CameraIntrinsics default_intrinsics(int image_size);

/// Renders the noiseless falling sphere analytically (ray-sphere
/// intersection per pixel), with a rigid procedural texture on the sphere.
/// The returned sequence carries the analytic ground truth (radius and
/// per-frame centers). Throws when the sphere's projection leaves the frame.
Sequence gen_falling_sphere(const SphereSceneSpec& spec, const CameraIntrinsics& k);

/// Ground-truth flow t -> t+1 of a generated sphere sequence: (0, fall_px)
/// on pixels where the sphere is visible in both frames, invalid elsewhere.
flow::Flow2D sphere_gt_flow(const Sequence& seq, int t);

/// Static fronto-parallel plane with a procedural texture; all points share
/// z == depth_mm exactly.
Sequence gen_textured_plane(int size, double depth_mm, double texture_contrast,
                            const CameraIntrinsics& k, int frame_count = 1);

/// Adds per-pixel Gaussian noise to depth (sigma in mm) and intensity
/// (sigma as a fraction of 1, output clipped to [0,1]). In texture-correlated
/// mode the depth sigma is scaled by the normalized local intensity-gradient
/// magnitude of the clean frame. Each frame draws from its own substream of
/// (seed, frame index), so results are reproducible and parallel-safe.
Sequence add_noise(const Sequence& seq, const NoiseSpec& noise, int threads = 1);

struct CorruptedFlow {
  flow::Flow2D flow;
  Mask corrupted;
};

/// Replaces floor(fraction * N) flow vectors with random vectors whose error
/// norm is at least `magnitude` pixels. Returns the corrupted field and the
/// mask of altered pixels.
CorruptedFlow inject_outliers(const flow::Flow2D& f, double fraction, double magnitude,
                              std::uint64_t seed);

}  // namespace fuse4d::synth
