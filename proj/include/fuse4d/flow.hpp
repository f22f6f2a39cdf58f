#pragma once

#include "fuse4d/types.hpp"

#include <cstdint>
#include <vector>

namespace fuse4d::flow {

/// Integer pixel displacement.
struct Disp {
  std::int16_t x = 0;
  std::int16_t y = 0;

  friend bool operator==(Disp a, Disp b) { return a.x == b.x && a.y == b.y; }
  friend bool operator!=(Disp a, Disp b) { return !(a == b); }
};

/// Dense integer 2D correspondence field between two frames of a sequence.
class Flow2D {
 public:
  Flow2D() = default;

  Flow2D(Grid<Disp> vectors, Mask valid, int source_index, int target_index)
      : vectors_(std::move(vectors)),
        valid_(std::move(valid)),
        source_index_(source_index),
        target_index_(target_index) {
    if (!vectors_.same_shape(valid_)) throw InvalidInput("Flow2D: vector/mask shape mismatch");
  }

  int width() const { return vectors_.width(); }
  int height() const { return vectors_.height(); }
  int source_index() const { return source_index_; }
  int target_index() const { return target_index_; }
  Disp at(int x, int y) const { return vectors_(x, y); }
  bool valid(int x, int y) const { return valid_(x, y) != 0; }
  const Grid<Disp>& vectors() const { return vectors_; }
  const Mask& mask() const { return valid_; }

 private:
  Grid<Disp> vectors_;
  Mask valid_;
  int source_index_ = 0;
  int target_index_ = 0;
};

struct FlowParams {
  int patch_radius = 3;
  int search_radius = 4;
  double smoothness_weight = 0.001;  // lambda
  double unary_truncation = 0.05;    // tau1, squared intensity units
  double pairwise_truncation = 16.0; // tau2, px^2
  int iterations = 4;

  void validate() const {
    if (patch_radius < 1 || search_radius < 1 || iterations < 1 || smoothness_weight < 0.0 ||
        unary_truncation <= 0.0 || pairwise_truncation <= 0.0) {
      throw InvalidInput("FlowParams: out-of-range parameter");
    }
  }
};

/// Truncated mean squared patch difference for displacing pixel (x, y) of
/// `src` by (sx, sy) into `dst`. The patch is clipped at the source border
/// and target pixels falling outside `dst` are excluded from the mean.
/// Returns +infinity when no target pixel of the patch is in bounds.
double unary_cost(const IntensityFrame& src, const IntensityFrame& dst, int x, int y, int sx,
                  int sy, const FlowParams& params);

/// Truncated quadratic smoothness cost between two neighboring displacements.
double pairwise_cost(Disp a, Disp b, const FlowParams& params);

/// Total objective of a labeling: sum of unary costs plus the pairwise cost
/// over every 4-neighborhood edge (each edge counted once).
double flow_energy(const IntensityFrame& src, const IntensityFrame& dst, const Flow2D& labeling,
                   const FlowParams& params);

/// Energy of the maintained labeling after initialization and after each
/// message sweep; non-increasing by construction.
struct EstimateTrace {
  std::vector<double> sweep_energies;
};

/// Estimates the displacement field from `src` to `dst` by sequential loopy
/// belief propagation over the (2r+1)^2 integer label space, with a fixed
/// left-right / right-left / top-bottom / bottom-top sweep schedule per
/// iteration. After every sweep the beliefs are decoded and the labeling is
/// replaced only if its exact energy improves, so the returned field never
/// has higher energy than the zero field. Output is deterministic for fixed
/// inputs and params, independent of `threads`.
Flow2D estimate_flow(const IntensityFrame& src, const IntensityFrame& dst,
                     const FlowParams& params, int source_index = 0, int target_index = 1,
                     int threads = 1, EstimateTrace* trace = nullptr);

}  // namespace fuse4d::flow
