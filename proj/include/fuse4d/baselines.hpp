#pragma once

#include "fuse4d/types.hpp"

#include <string>

namespace fuse4d::baselines {

enum class Kind {
  kGaussian,
  kBilateral,
  kJointBilateral,
  kGuided,
  kTemporalAverage,
  kSTMedian,
};

Kind kind_from_string(const std::string& name);
std::string to_string(Kind kind);

/// Reference depth-map denoisers in their standard non-adaptive forms.
/// joint_bilateral and guided read the registered intensity as guidance;
/// temporal_average and st_median use the plain space-time window without
/// motion compensation.
struct BaselineMethod {
  Kind kind = Kind::kGaussian;
  int window_radius = 2;         // px
  double sigma_spatial = 1.5;    // px
  double sigma_range = 5.0;      // mm, bilateral range weight
  double sigma_intensity = 0.1;  // intensity units, joint-bilateral range weight
  double eps_guided = 1e-2;      // guided-filter variance regularizer (intensity^2)
  int temporal_radius = 4;       // frames

  void validate() const;
};

/// Applies `method` to the depth of frame t. Masked pixels are excluded from
/// every window; the output keeps frame t's validity mask.
DepthFrame apply_baseline(const BaselineMethod& method, const Sequence& seq, int t,
                          int threads = 1);

}  // namespace fuse4d::baselines
