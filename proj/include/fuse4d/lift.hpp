#pragma once

#include "fuse4d/flow.hpp"
#include "fuse4d/types.hpp"

#include <vector>

namespace fuse4d::lift {

/// Per-pixel 3D motion vectors (mm) from a source frame to a target frame,
/// with validity flags. Each valid pixel also stores the composed integer
/// pixel offset that reaches the target frame's grid, so consumers can index
/// the target's organized neighborhoods.
class MotionField3D {
 public:
  MotionField3D() = default;

  MotionField3D(Grid<Vec3> vectors, Grid<flow::Disp> pixel_offsets, Mask valid, int source_index,
                int target_index)
      : vectors_(std::move(vectors)),
        pixel_offsets_(std::move(pixel_offsets)),
        valid_(std::move(valid)),
        source_index_(source_index),
        target_index_(target_index) {
    if (!vectors_.same_shape(valid_) || !vectors_.same_shape(pixel_offsets_)) {
      throw InvalidInput("MotionField3D: grid shape mismatch");
    }
  }

  int width() const { return vectors_.width(); }
  int height() const { return vectors_.height(); }
  int source_index() const { return source_index_; }
  int target_index() const { return target_index_; }
  const Vec3& vector(int x, int y) const { return vectors_(x, y); }
  flow::Disp offset(int x, int y) const { return pixel_offsets_(x, y); }
  bool valid(int x, int y) const { return valid_(x, y) != 0; }
  const Mask& mask() const { return valid_; }

 private:
  Grid<Vec3> vectors_;
  Grid<flow::Disp> pixel_offsets_;
  Mask valid_;
  int source_index_ = 0;
  int target_index_ = 0;
};

/// Lifts a 2D flow into 3D motion vectors m = p_T(target px) - p_t(px).
/// Pixels are invalid when the flow is invalid, the target lands out of
/// bounds, either endpoint depth is masked, or `extra_valid` (e.g. a
/// forward-backward consistency grid) rejects them.
MotionField3D lift_flow(const SequenceFrame& frame_t, const SequenceFrame& frame_T,
                        const flow::Flow2D& f, const CameraIntrinsics& k,
                        const Mask* extra_valid = nullptr);

/// Forward-backward consistency in pixel space: pixel (x, y) passes iff its
/// forward target is in bounds, both flows are valid there, and
/// ||s_fwd(x,y) + s_bwd(x+sx, y+sy)|| < theta (strict).
Mask fb_check(const flow::Flow2D& fwd, const flow::Flow2D& bwd, double theta_px = 2.0);

/// 3D-norm variant of the consistency check, thresholded in millimetres on
/// ||m_fwd(x,y) + m_bwd(target px)||.
Mask fb_check_3d(const MotionField3D& fwd, const MotionField3D& bwd, double theta_mm);

/// Returns a copy of `field` with validity restricted to `extra`.
MotionField3D apply_mask(const MotionField3D& field, const Mask& extra);

/// Spatially smooths the motion vectors of valid pixels with a Gaussian
/// over the valid neighbors in a (2*radius+1)^2 window. Offsets, validity
/// and frame indices are unchanged. Surface motion between nearby frames is
/// spatially smooth, while each raw vector carries the depth noise of both
/// of its endpoints; smoothing recovers the underlying field.
MotionField3D smooth_motion(const MotionField3D& field, int radius_px, double sigma_px,
                            int threads = 1);

/// Composes a temporally contiguous chain of motion fields into one field
/// from the chain's first source to its last target. Each summand is sampled
/// at the pixel reached by composing the integer offsets; validity is the
/// conjunction along the walked path.
MotionField3D integrate_motion(const std::vector<const MotionField3D*>& chain);

}  // namespace fuse4d::lift
