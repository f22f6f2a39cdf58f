#pragma once

#include "fuse4d/flow.hpp"
#include "fuse4d/lift.hpp"
#include "fuse4d/types.hpp"

#include <map>
#include <vector>

namespace fuse4d::fusion {

struct FusionParams {
  int temporal_window = 9;   // n: frames fused, odd, centered on t
  int spatial_radius = 2;    // N(i): square window radius, px
  double delta_d = 0.0;      // spatial Gaussian, mm; 0 = 2 x median point spacing
  double delta_g = 0.1;      // range Gaussian, intensity units
  double delta_f = 0.0;      // temporal Gaussian, frames; 0 = n/2
  double delta_h = 0.0;      // hole-fill Gaussian, mm; 0 = same as delta_d
  double theta_px = 2.0;     // forward-backward threshold, px
  bool fb_use_3d = false;    // switch Eq. 4 check to 3D mm norm
  double theta_mm = 5.0;     // threshold for the 3D variant

  // Spatial smoothing of each integrated motion field before fusing
  // (0 disables). Raw per-pixel motion vectors carry the depth noise of
  // both endpoints into every temporal term; the underlying field of a
  // smoothly moving surface is spatially smooth.
  int motion_smoothing_radius = 4;

  void validate() const {
    if (temporal_window < 1 || temporal_window % 2 == 0) {
      throw InvalidInput("FusionParams: temporal_window must be odd and >= 1");
    }
    if (spatial_radius < 1) throw InvalidInput("FusionParams: spatial_radius must be >= 1");
    if (delta_d < 0.0 || delta_g <= 0.0 || delta_f < 0.0 || delta_h < 0.0 || theta_px <= 0.0 ||
        theta_mm <= 0.0) {
      throw InvalidInput("FusionParams: Gaussian scales and thresholds must be positive");
    }
    if (motion_smoothing_radius < 0) {
      throw InvalidInput("FusionParams: motion_smoothing_radius must be >= 0");
    }
  }

  double resolved_delta_f() const {
    return delta_f > 0.0 ? delta_f : temporal_window / 2.0;
  }
};

/// One temporal term of a fusion window: the organized data at frame T and
/// the integrated motion t -> T. The T == t term carries a null motion
/// (m = 0, nu = true there).
struct FusionTerm {
  const OrganizedCloud* cloud = nullptr;
  const IntensityFrame* intensity = nullptr;
  int frame_index = 0;
  const lift::MotionField3D* motion = nullptr;

  static FusionTerm of(const SequenceFrame& frame, const lift::MotionField3D* motion = nullptr) {
    return {&frame.cloud(), &frame.intensity(), frame.index(), motion};
  }
};

/// Piecewise spatio-temporal 4D fusion of one frame. For every pixel with at
/// least one valid temporal term, the motion-compensated, intensity-guided
/// bilateral centroids of the window frames are blended with temporal
/// Gaussian weights. Pixels with no valid term are left invalid (holes).
OrganizedCloud fuse_frame(const std::vector<FusionTerm>& window, int t, const FusionParams& params,
                          int threads = 1);

/// Gradient-directed hole filling: each hole pixel with at least 3 valid
/// neighbors within the spatial radius receives a Gaussian-weighted average
/// of its neighbors' tangent-plane extrapolations along the hole's camera
/// ray. Unfillable holes stay invalid. When `targets` is given, only flagged
/// pixels are candidates (the sequence pipeline passes the center frame's
/// validity so the fill never extends an object past its silhouette).
OrganizedCloud fill_holes(const OrganizedCloud& cloud, const CameraIntrinsics& k,
                          const FusionParams& params, int threads = 1,
                          const Mask* targets = nullptr);

/// Runs the whole per-frame pipeline (flows to the window frames, FB
/// validation, lifting, integration, fusion, hole filling) over a sequence.
/// Consecutive-pair flows are computed once and shared by every center
/// frame, and can be reused across different temporal window sizes.
class SequenceFuser {
 public:
  SequenceFuser(const Sequence& seq, flow::FlowParams flow_params, FusionParams params,
                int threads = 1);

  /// Fused cloud at frame t (holes filled).
  OrganizedCloud fused_frame(int t);

  /// All frames, in order.
  std::vector<OrganizedCloud> fuse_all();

  /// Changes the temporal window without discarding cached flows.
  void set_temporal_window(int n);

  const FusionParams& params() const { return params_; }

 private:
  const lift::MotionField3D& link(int from, int to);

  const Sequence& seq_;
  flow::FlowParams flow_params_;
  FusionParams params_;
  int threads_;
  std::map<std::pair<int, int>, flow::Flow2D> flows_;
  std::map<std::pair<int, int>, lift::MotionField3D> links_;

  const flow::Flow2D& pair_flow(int from, int to);
};

/// Convenience wrapper: fuse every frame of `seq`.
std::vector<OrganizedCloud> fuse_sequence(const Sequence& seq, const FusionParams& params,
                                          const flow::FlowParams& flow_params, int threads = 1);

/// Re-encodes fused clouds as a sequence: depth takes each fused point's z
/// (lateral components are re-derived from the pixel ray on load), intensity
/// is carried over from the source sequence.
Sequence clouds_to_sequence(const Sequence& src, const std::vector<OrganizedCloud>& clouds);

}  // namespace fuse4d::fusion
