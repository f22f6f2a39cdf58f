#pragma once

#include "fuse4d/types.hpp"

namespace fuse4d {

/// Pixel-space result of projecting a 3D point.
struct PixelDepth {
  double x = 0.0;
  double y = 0.0;
  double d = 0.0;
};

/// Back-projects pixel (x, y) with depth d (mm) through the pinhole model:
/// p = d * [ (x - u0)/fx, (y - v0)/fy, 1 ].
Vec3 back_project(double x, double y, double d, const CameraIntrinsics& k);

/// Inverse of back_project for points in front of the camera (p.z > 0).
PixelDepth project(const Vec3& p, const CameraIntrinsics& k);

/// Per-pixel back-projection of a whole depth frame. Invalid pixels stay
/// invalid; valid pixels satisfy cloud(x,y) == back_project(x, y, d(x,y), k).
OrganizedCloud cloud_from_depth(const DepthFrame& depth, const CameraIntrinsics& k);

/// Median 3D distance between valid 4-neighbor pixel pairs, in mm.
/// Returns 0 when the cloud has no valid adjacent pair.
double median_point_spacing(const OrganizedCloud& cloud);

/// Total least-squares plane through a point set.
struct PlaneFit {
  Vec3 centroid = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();  // unit length
};

/// Fits a plane to `points` by smallest-eigenvector analysis of the scatter
/// matrix. Returns nullopt for fewer than 3 points or a degenerate
/// (rank-deficient) configuration.
std::optional<PlaneFit> fit_plane(const std::vector<Vec3>& points);

}  // namespace fuse4d
