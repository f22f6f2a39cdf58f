#include "fuse4d/synth.hpp"

#include "fuse4d/geometry.hpp"
#include "fuse4d/parallel.hpp"
#include "fuse4d/rng.hpp"

#include <algorithm>
#include <cmath>

namespace fuse4d::synth {

namespace {

// Deterministic lattice value noise; the tag separates independent textures.
double lattice_value(std::int64_t ix, std::int64_t iy, std::int64_t iz, std::uint64_t tag) {
  std::uint64_t z = tag;
  z ^= static_cast<std::uint64_t>(ix) * 0x9E3779B97F4A7C15ULL;
  z ^= static_cast<std::uint64_t>(iy) * 0xC2B2AE3D27D4EB4FULL;
  z ^= static_cast<std::uint64_t>(iz) * 0x165667B19E3779F9ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise3(double x, double y, double z, std::uint64_t tag) {
  const double fx = std::floor(x), fy = std::floor(y), fz = std::floor(z);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const auto iz = static_cast<std::int64_t>(fz);
  const double ux = smoothstep(x - fx), uy = smoothstep(y - fy), uz = smoothstep(z - fz);
  double corners[2][2][2];
  for (int cz = 0; cz < 2; ++cz) {
    for (int cy = 0; cy < 2; ++cy) {
      for (int cx = 0; cx < 2; ++cx) {
        corners[cz][cy][cx] = lattice_value(ix + cx, iy + cy, iz + cz, tag);
      }
    }
  }
  auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
  const double x00 = lerp(corners[0][0][0], corners[0][0][1], ux);
  const double x10 = lerp(corners[0][1][0], corners[0][1][1], ux);
  const double x01 = lerp(corners[1][0][0], corners[1][0][1], ux);
  const double x11 = lerp(corners[1][1][0], corners[1][1][1], ux);
  const double y0 = lerp(x00, x10, uy);
  const double y1 = lerp(x01, x11, uy);
  return lerp(y0, y1, uz);
}

// Octaves scale with the surface size so features stay trackable at any
// scene scale; the background uses pixel-based cells.
double surface_texture(const Vec3& q, double feature_mm, std::uint64_t tag) {
  const double o1 = value_noise3(q.x() / feature_mm, q.y() / feature_mm, q.z() / feature_mm, tag);
  const double f2 = feature_mm / 2.0, f4 = feature_mm / 4.0;
  const double o2 = value_noise3(q.x() / f2, q.y() / f2, q.z() / f2, tag + 1);
  const double o3 = value_noise3(q.x() / f4, q.y() / f4, q.z() / f4, tag + 2);
  return 0.5 * o1 + 0.3 * o2 + 0.2 * o3;
}

double background_texture(int x, int y, std::uint64_t tag) {
  const double o1 = value_noise3(x / 8.0, y / 8.0, 0.0, tag);
  const double o2 = value_noise3(x / 4.0, y / 4.0, 0.0, tag + 1);
  return 0.7 * o1 + 0.3 * o2;
}

double contrast_map(double t, double contrast) {
  return std::clamp(0.5 + contrast * (t - 0.5), 0.0, 1.0);
}

constexpr std::uint64_t kSphereTextureTag = 0x5EEDF00D0001ULL;
constexpr std::uint64_t kBackgroundTextureTag = 0x5EEDF00D1001ULL;
constexpr std::uint64_t kPlaneTextureTag = 0x5EEDF00D2001ULL;

bool sphere_hit(const Vec3& ray, const Vec3& center, double radius, double& depth_out) {
  const double a = ray.squaredNorm();
  const double b = ray.dot(center);
  const double c = center.squaredNorm() - radius * radius;
  const double disc = b * b - a * c;
  if (disc < 0.0) return false;
  const double d = (b - std::sqrt(disc)) / a;
  if (!(d > 0.0)) return false;
  depth_out = d;
  return true;
}

}  // namespace

CameraIntrinsics default_intrinsics(int image_size) {
  CameraIntrinsics k;
  k.fx = k.fy = 700.0 * image_size / 600.0;
  k.u0 = k.v0 = (image_size - 1) / 2.0;
  return k;
}

Sequence gen_falling_sphere(const SphereSceneSpec& spec, const CameraIntrinsics& k) {
  spec.validate();
  const int size = spec.image_size;
  k.validate_for(size, size);

  const double start_row = spec.start_row_px >= 0.0
                               ? spec.start_row_px
                               : ((size - 1) - (spec.frame_count - 1) * spec.fall_px) / 2.0;

  Sequence seq;
  seq.intrinsics = k;
  GroundTruth gt;
  gt.shape = "sphere";
  gt.radius_mm = spec.radius_mm;
  gt.fall_px = spec.fall_px;

  for (int t = 0; t < spec.frame_count; ++t) {
    const double row = start_row + t * spec.fall_px;
    const Vec3 center(0.0, (row - k.v0) * spec.center_depth_mm / k.fy, spec.center_depth_mm);
    gt.centers.push_back(center);

    Grid<double> depth(size, size, 0.0);
    Mask valid(size, size, 0);
    Grid<double> intensity(size, size, 0.0);
    bool touches_border = false;

    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const Vec3 ray((x - k.u0) / k.fx, (y - k.v0) / k.fy, 1.0);
        double d;
        if (sphere_hit(ray, center, spec.radius_mm, d)) {
          depth(x, y) = d;
          valid(x, y) = 1;
          const Vec3 local = d * ray - center;
          intensity(x, y) = contrast_map(
              surface_texture(local, spec.radius_mm / 6.0, kSphereTextureTag),
              spec.texture_contrast);
          if (x == 0 || y == 0 || x == size - 1 || y == size - 1) touches_border = true;
        } else {
          if (spec.background_depth_mm > 0.0) {
            depth(x, y) = spec.background_depth_mm;
            valid(x, y) = 1;
          }
          intensity(x, y) = contrast_map(background_texture(x, y, kBackgroundTextureTag),
                                         spec.texture_contrast);
        }
      }
    }
    if (touches_border) {
      throw InvalidInput("gen_falling_sphere: sphere leaves the frame at step " +
                         std::to_string(t));
    }
    seq.frames.emplace_back(t, IntensityFrame(std::move(intensity)),
                            DepthFrame(std::move(depth), std::move(valid)), k);
  }
  seq.ground_truth = std::move(gt);
  return seq;
}

flow::Flow2D sphere_gt_flow(const Sequence& seq, int t) {
  if (!seq.ground_truth || seq.ground_truth->shape != "sphere") {
    throw InvalidInput("sphere_gt_flow: sequence has no sphere ground truth");
  }
  if (t < 0 || t + 1 >= static_cast<int>(seq.frames.size())) {
    throw InvalidInput("sphere_gt_flow: frame pair out of range");
  }
  const GroundTruth& gt = *seq.ground_truth;
  const CameraIntrinsics& k = seq.intrinsics;
  const int w = seq.width();
  const int h = seq.height();
  const auto fall = static_cast<std::int16_t>(std::lround(gt.fall_px));

  Grid<flow::Disp> vectors(w, h, flow::Disp{0, fall});
  Mask valid(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int yt = y + fall;
      if (yt < 0 || yt >= h) continue;
      const Vec3 ray_t((x - k.u0) / k.fx, (y - k.v0) / k.fy, 1.0);
      const Vec3 ray_T((x - k.u0) / k.fx, (yt - k.v0) / k.fy, 1.0);
      double d;
      if (sphere_hit(ray_t, gt.centers[t], gt.radius_mm, d) &&
          sphere_hit(ray_T, gt.centers[t + 1], gt.radius_mm, d)) {
        valid(x, y) = 1;
      }
    }
  }
  return {std::move(vectors), std::move(valid), t, t + 1};
}

Sequence gen_textured_plane(int size, double depth_mm, double texture_contrast,
                            const CameraIntrinsics& k, int frame_count) {
  if (size < 8 || depth_mm <= 0.0 || frame_count < 1 || texture_contrast < 0.0 ||
      texture_contrast > 1.0) {
    throw InvalidInput("gen_textured_plane: out-of-range parameter");
  }
  k.validate_for(size, size);

  Grid<double> intensity(size, size, 0.0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      intensity(x, y) =
          contrast_map(background_texture(x, y, kPlaneTextureTag), texture_contrast);
    }
  }
  const IntensityFrame intensity_frame{intensity};
  const DepthFrame depth_frame{Grid<double>(size, size, depth_mm), Mask(size, size, 1)};

  Sequence seq;
  seq.intrinsics = k;
  GroundTruth gt;
  gt.shape = "plane";
  seq.ground_truth = std::move(gt);
  for (int t = 0; t < frame_count; ++t) {
    seq.frames.emplace_back(t, intensity_frame, depth_frame, k);
  }
  return seq;
}

Sequence add_noise(const Sequence& seq, const NoiseSpec& noise, int threads) {
  noise.validate();
  if (noise.depth_sigma == 0.0 && noise.intensity_sigma == 0.0) return seq;

  const int w = seq.width();
  const int h = seq.height();
  std::vector<SequenceFrame> out(seq.frames.size());

  parallel_for(0, static_cast<int>(seq.frames.size()), threads, [&](int i) {
    const SequenceFrame& frame = seq.frames[i];
    Rng depth_rng(substream_seed(noise.seed, frame.index(), 0));
    Rng intensity_rng(substream_seed(noise.seed, frame.index(), 1));

    // Normalized gradient magnitude of the clean intensity, for the
    // texture-correlated depth-noise mode.
    Grid<double> scale;
    if (noise.texture_correlated) {
      scale = Grid<double>(w, h, 0.0);
      double gmax = 0.0;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double gx = (frame.intensity().at(std::min(x + 1, w - 1), y) -
                             frame.intensity().at(std::max(x - 1, 0), y)) *
                            0.5;
          const double gy = (frame.intensity().at(x, std::min(y + 1, h - 1)) -
                             frame.intensity().at(x, std::max(y - 1, 0))) *
                            0.5;
          const double g = std::sqrt(gx * gx + gy * gy);
          scale(x, y) = g;
          gmax = std::max(gmax, g);
        }
      }
      if (gmax > 0.0) {
        for (double& g : scale.data()) g /= gmax;
      }
    }

    Grid<double> depth = frame.depth().values();
    Mask valid = frame.depth().mask();
    Grid<double> intensity(w, h, 0.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        // Draw unconditionally so the stream does not depend on the mask.
        const double zd = depth_rng.normal();
        const double zi = intensity_rng.normal();
        if (valid(x, y)) {
          const double s = noise.texture_correlated ? scale(x, y) : 1.0;
          const double d = depth(x, y) + noise.depth_sigma * s * zd;
          if (std::isfinite(d) && d > 0.0) {
            depth(x, y) = d;
          } else {
            valid(x, y) = 0;  // noise pushed the sample out of the sensor domain
          }
        }
        intensity(x, y) =
            std::clamp(frame.intensity().at(x, y) + noise.intensity_sigma * zi, 0.0, 1.0);
      }
    }
    out[i] = SequenceFrame(frame.index(), IntensityFrame(std::move(intensity)),
                           DepthFrame(std::move(depth), std::move(valid)), seq.intrinsics);
  });

  Sequence result;
  result.intrinsics = seq.intrinsics;
  result.ground_truth = seq.ground_truth;
  result.frames = std::move(out);
  return result;
}

CorruptedFlow inject_outliers(const flow::Flow2D& f, double fraction, double magnitude,
                              std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) throw InvalidInput("inject_outliers: fraction in [0,1]");
  const int w = f.width();
  const int h = f.height();
  const std::size_t total = static_cast<std::size_t>(w) * h;
  const auto n_alter = static_cast<std::size_t>(fraction * static_cast<double>(total));

  Grid<flow::Disp> vectors = f.vectors();
  Mask corrupted(w, h, 0);
  if (n_alter > 0) {
    Rng rng(substream_seed(seed, 0xF10C));
    std::vector<std::uint32_t> idx(total);
    for (std::size_t i = 0; i < total; ++i) idx[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = 0; i < n_alter; ++i) {
      const std::size_t j = i + rng.uniform_int(0, static_cast<int>(total - i - 1));
      std::swap(idx[i], idx[j]);
    }
    constexpr double two_pi = 6.283185307179586476925286766559;
    for (std::size_t i = 0; i < n_alter; ++i) {
      const int x = static_cast<int>(idx[i] % w);
      const int y = static_cast<int>(idx[i] / w);
      const flow::Disp old = vectors(x, y);
      for (;;) {
        const double angle = rng.uniform(0.0, two_pi);
        const double radius = magnitude + rng.uniform(0.0, 3.0);
        const auto dx = static_cast<int>(std::lround(radius * std::cos(angle)));
        const auto dy = static_cast<int>(std::lround(radius * std::sin(angle)));
        if (std::sqrt(static_cast<double>(dx) * dx + static_cast<double>(dy) * dy) < magnitude) {
          continue;
        }
        vectors(x, y) = {static_cast<std::int16_t>(old.x + dx),
                         static_cast<std::int16_t>(old.y + dy)};
        break;
      }
      corrupted(x, y) = 1;
    }
  }
  return {flow::Flow2D(std::move(vectors), f.mask(), f.source_index(), f.target_index()),
          std::move(corrupted)};
}

}  // namespace fuse4d::synth
