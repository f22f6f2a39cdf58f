#pragma once

#include <Eigen/Core>

#include <cassert>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fuse4d {

using Vec3 = Eigen::Vector3d;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Precondition violation on an operation input (sizes, ranges, indices).
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Projection of a point with non-positive z.
class BehindCamera : public std::domain_error {
 public:
  explicit BehindCamera(const std::string& what) : std::domain_error(what) {}
};

/// File loading failure; carries the offending file and byte offset.
class LoadError : public std::runtime_error {
 public:
  LoadError(std::string path, std::size_t byte_offset, const std::string& what)
      : std::runtime_error(path + " @" + std::to_string(byte_offset) + ": " + what),
        path_(std::move(path)),
        byte_offset_(byte_offset) {}

  const std::string& path() const { return path_; }
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::string path_;
  std::size_t byte_offset_;
};

/// Robust model estimation found no acceptable model.
class FitFailure : public std::runtime_error {
 public:
  explicit FitFailure(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

/// Dense row-major 2D grid. (x, y) indexes column x of row y.
template <typename T>
class Grid {
 public:
  Grid() = default;

  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {
    if (width <= 0 || height <= 0) throw InvalidInput("Grid: dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  bool in_bounds(int x, int y) const { return x >= 0 && x < width_ && y >= 0 && y < height_; }

  T& operator()(int x, int y) {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& operator()(int x, int y) const {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  T* row(int y) { return data_.data() + static_cast<std::size_t>(y) * width_; }
  const T* row(int y) const { return data_.data() + static_cast<std::size_t>(y) * width_; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(int w, int h) const { return width_ == w && height_ == h; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;

// ---------------------------------------------------------------------------
// Camera
// ---------------------------------------------------------------------------

/// Pinhole model: focal lengths and principal point, in pixels.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double u0 = 0.0;
  double v0 = 0.0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy) ||
        !std::isfinite(u0) || !std::isfinite(v0)) {
      throw InvalidInput("CameraIntrinsics: fx, fy must be positive and all fields finite");
    }
  }

  /// Principal point must land inside a bound frame.
  void validate_for(int width, int height) const {
    validate();
    if (u0 < 0.0 || u0 >= width || v0 < 0.0 || v0 >= height) {
      throw InvalidInput("CameraIntrinsics: principal point outside frame");
    }
  }
};

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

/// Normalized intensity image, values in [0, 1].
class IntensityFrame {
 public:
  IntensityFrame() = default;

  explicit IntensityFrame(Grid<double> values) : values_(std::move(values)) {
    for (double a : values_.data()) {
      if (!std::isfinite(a) || a < 0.0 || a > 1.0) {
        throw InvalidInput("IntensityFrame: values must be finite and in [0,1]");
      }
    }
  }

  int width() const { return values_.width(); }
  int height() const { return values_.height(); }
  double at(int x, int y) const { return values_(x, y); }
  const Grid<double>& values() const { return values_; }

 private:
  Grid<double> values_;
};

/// Depth image in millimetres with an explicit per-pixel validity mask.
/// Invalid pixels carry no magic value in memory; their stored depth is
/// unspecified and must not be read through valid paths.
class DepthFrame {
 public:
  DepthFrame() = default;

  DepthFrame(Grid<double> values, Mask valid)
      : values_(std::move(values)), valid_(std::move(valid)) {
    if (!values_.same_shape(valid_)) throw InvalidInput("DepthFrame: value/mask shape mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (valid_.data()[i] && !(std::isfinite(values_.data()[i]) && values_.data()[i] > 0.0)) {
        throw InvalidInput("DepthFrame: valid depths must be finite and > 0");
      }
    }
  }

  int width() const { return values_.width(); }
  int height() const { return values_.height(); }
  bool valid(int x, int y) const { return valid_(x, y) != 0; }
  double at(int x, int y) const { return values_(x, y); }
  const Grid<double>& values() const { return values_; }
  const Mask& mask() const { return valid_; }

 private:
  Grid<double> values_;
  Mask valid_;
};

/// 3D points on the pixel grid of their source depth frame, in millimetres.
class OrganizedCloud {
 public:
  OrganizedCloud() = default;

  OrganizedCloud(Grid<Vec3> points, Mask valid)
      : points_(std::move(points)), valid_(std::move(valid)) {
    if (!points_.same_shape(valid_)) throw InvalidInput("OrganizedCloud: point/mask shape mismatch");
  }

  int width() const { return points_.width(); }
  int height() const { return points_.height(); }
  bool valid(int x, int y) const { return valid_(x, y) != 0; }
  const Vec3& at(int x, int y) const { return points_(x, y); }
  const Grid<Vec3>& points() const { return points_; }
  const Mask& mask() const { return valid_; }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid_.data()) n += v ? 1 : 0;
    return n;
  }

 private:
  Grid<Vec3> points_;
  Mask valid_;
};

/// One time step of a registered intensity/depth sequence. The organized
/// cloud is derived from the depth frame at construction and cached.
class SequenceFrame {
 public:
  SequenceFrame() = default;
  SequenceFrame(int index, IntensityFrame intensity, DepthFrame depth,
                const CameraIntrinsics& k);

  int index() const { return index_; }
  int width() const { return intensity_.width(); }
  int height() const { return intensity_.height(); }
  const IntensityFrame& intensity() const { return intensity_; }
  const DepthFrame& depth() const { return depth_; }
  const OrganizedCloud& cloud() const { return cloud_; }

 private:
  int index_ = 0;
  IntensityFrame intensity_;
  DepthFrame depth_;
  OrganizedCloud cloud_;
};

/// Analytic shape parameters carried by synthetic sequences.
struct GroundTruth {
  std::string shape;            // "sphere" | "plane"
  double radius_mm = 0.0;       // sphere radius
  double fall_px = 0.0;         // image-space fall speed, px/frame
  std::vector<Vec3> centers;    // per-frame sphere center, camera coords (mm)
};

/// A registered sequence with one shared camera model.
struct Sequence {
  CameraIntrinsics intrinsics;
  std::vector<SequenceFrame> frames;
  std::optional<GroundTruth> ground_truth;

  int width() const { return frames.empty() ? 0 : frames.front().width(); }
  int height() const { return frames.empty() ? 0 : frames.front().height(); }
  std::size_t size() const { return frames.size(); }
};

}  // namespace fuse4d
