#include "fuse4d/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>

namespace fuse4d {

Vec3 back_project(double x, double y, double d, const CameraIntrinsics& k) {
  k.validate();
  if (!std::isfinite(d) || d <= 0.0) {
    throw InvalidInput("back_project: depth must be finite and > 0");
  }
  return {d * (x - k.u0) / k.fx, d * (y - k.v0) / k.fy, d};
}

PixelDepth project(const Vec3& p, const CameraIntrinsics& k) {
  k.validate();
  if (!(p.z() > 0.0)) {
    throw BehindCamera("project: point has non-positive z");
  }
  return {k.fx * p.x() / p.z() + k.u0, k.fy * p.y() / p.z() + k.v0, p.z()};
}

OrganizedCloud cloud_from_depth(const DepthFrame& depth, const CameraIntrinsics& k) {
  k.validate();
  const int w = depth.width();
  const int h = depth.height();
  Grid<Vec3> points(w, h, Vec3::Zero());
  Mask valid = depth.mask();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (depth.valid(x, y)) {
        const double d = depth.at(x, y);
        points(x, y) = {d * (x - k.u0) / k.fx, d * (y - k.v0) / k.fy, d};
      }
    }
  }
  return {std::move(points), std::move(valid)};
}

SequenceFrame::SequenceFrame(int index, IntensityFrame intensity, DepthFrame depth,
                             const CameraIntrinsics& k)
    : index_(index), intensity_(std::move(intensity)), depth_(std::move(depth)) {
  if (intensity_.width() != depth_.width() || intensity_.height() != depth_.height()) {
    throw InvalidInput("SequenceFrame: intensity/depth shape mismatch");
  }
  k.validate_for(depth_.width(), depth_.height());
  cloud_ = cloud_from_depth(depth_, k);
}

double median_point_spacing(const OrganizedCloud& cloud) {
  std::vector<double> spacings;
  spacings.reserve(cloud.points().size() * 2);
  for (int y = 0; y < cloud.height(); ++y) {
    for (int x = 0; x < cloud.width(); ++x) {
      if (!cloud.valid(x, y)) continue;
      if (x + 1 < cloud.width() && cloud.valid(x + 1, y)) {
        spacings.push_back((cloud.at(x, y) - cloud.at(x + 1, y)).norm());
      }
      if (y + 1 < cloud.height() && cloud.valid(x, y + 1)) {
        spacings.push_back((cloud.at(x, y) - cloud.at(x, y + 1)).norm());
      }
    }
  }
  if (spacings.empty()) return 0.0;
  const std::size_t mid = spacings.size() / 2;
  std::nth_element(spacings.begin(), spacings.begin() + mid, spacings.end());
  return spacings[mid];
}

std::optional<PlaneFit> fit_plane(const std::vector<Vec3>& points) {
  if (points.size() < 3) return std::nullopt;
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const Vec3& p : points) {
    const Vec3 d = p - centroid;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(scatter);
  if (es.info() != Eigen::Success) return std::nullopt;
  // Rank < 2 means the points do not span a plane.
  const auto& ev = es.eigenvalues();
  if (!(ev[1] > 0.0) || !std::isfinite(ev[2])) return std::nullopt;
  PlaneFit fit;
  fit.centroid = centroid;
  fit.normal = es.eigenvectors().col(0).normalized();
  return fit;
}

}  // namespace fuse4d
