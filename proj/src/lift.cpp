#include "fuse4d/lift.hpp"

#include "fuse4d/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace fuse4d::lift {

MotionField3D lift_flow(const SequenceFrame& frame_t, const SequenceFrame& frame_T,
                        const flow::Flow2D& f, const CameraIntrinsics& k,
                        const Mask* extra_valid) {
  if (f.source_index() != frame_t.index() || f.target_index() != frame_T.index()) {
    throw InvalidInput("lift_flow: flow frame indices do not match the given frames");
  }
  if (f.width() != frame_t.width() || f.height() != frame_t.height() ||
      frame_T.width() != frame_t.width() || frame_T.height() != frame_t.height()) {
    throw InvalidInput("lift_flow: size mismatch");
  }
  if (extra_valid && !frame_t.depth().values().same_shape(*extra_valid)) {
    throw InvalidInput("lift_flow: extra validity grid shape mismatch");
  }
  k.validate();

  const int w = f.width();
  const int h = f.height();
  Grid<Vec3> vectors(w, h, Vec3::Zero());
  Grid<flow::Disp> offsets(w, h);
  Mask valid(w, h, 0);

  const OrganizedCloud& cloud_t = frame_t.cloud();
  const OrganizedCloud& cloud_T = frame_T.cloud();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!f.valid(x, y)) continue;
      if (extra_valid && !(*extra_valid)(x, y)) continue;
      const flow::Disp s = f.at(x, y);
      const int xt = x + s.x;
      const int yt = y + s.y;
      if (!cloud_T.points().in_bounds(xt, yt)) continue;
      if (!cloud_t.valid(x, y) || !cloud_T.valid(xt, yt)) continue;
      vectors(x, y) = cloud_T.at(xt, yt) - cloud_t.at(x, y);
      offsets(x, y) = s;
      valid(x, y) = 1;
    }
  }
  return {std::move(vectors), std::move(offsets), std::move(valid), frame_t.index(),
          frame_T.index()};
}

Mask fb_check(const flow::Flow2D& fwd, const flow::Flow2D& bwd, double theta_px) {
  if (fwd.width() != bwd.width() || fwd.height() != bwd.height()) {
    throw InvalidInput("fb_check: flow size mismatch");
  }
  const int w = fwd.width();
  const int h = fwd.height();
  Mask ok(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!fwd.valid(x, y)) continue;
      const flow::Disp s = fwd.at(x, y);
      const int xt = x + s.x;
      const int yt = y + s.y;
      if (!bwd.vectors().in_bounds(xt, yt) || !bwd.valid(xt, yt)) continue;
      const flow::Disp r = bwd.at(xt, yt);
      const double dx = s.x + r.x;
      const double dy = s.y + r.y;
      if (std::sqrt(dx * dx + dy * dy) < theta_px) ok(x, y) = 1;
    }
  }
  return ok;
}

Mask fb_check_3d(const MotionField3D& fwd, const MotionField3D& bwd, double theta_mm) {
  if (fwd.width() != bwd.width() || fwd.height() != bwd.height()) {
    throw InvalidInput("fb_check_3d: field size mismatch");
  }
  const int w = fwd.width();
  const int h = fwd.height();
  Mask ok(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!fwd.valid(x, y)) continue;
      const flow::Disp s = fwd.offset(x, y);
      const int xt = x + s.x;
      const int yt = y + s.y;
      if (!bwd.mask().in_bounds(xt, yt) || !bwd.valid(xt, yt)) continue;
      if ((fwd.vector(x, y) + bwd.vector(xt, yt)).norm() < theta_mm) ok(x, y) = 1;
    }
  }
  return ok;
}

MotionField3D apply_mask(const MotionField3D& field, const Mask& extra) {
  if (!field.mask().same_shape(extra)) throw InvalidInput("apply_mask: shape mismatch");
  Grid<Vec3> vectors(field.width(), field.height(), Vec3::Zero());
  Grid<flow::Disp> offsets(field.width(), field.height());
  Mask valid(field.width(), field.height(), 0);
  for (int y = 0; y < field.height(); ++y) {
    for (int x = 0; x < field.width(); ++x) {
      if (!field.valid(x, y) || !extra(x, y)) continue;
      vectors(x, y) = field.vector(x, y);
      offsets(x, y) = field.offset(x, y);
      valid(x, y) = 1;
    }
  }
  return {std::move(vectors), std::move(offsets), std::move(valid), field.source_index(),
          field.target_index()};
}

MotionField3D smooth_motion(const MotionField3D& field, int radius_px, double sigma_px,
                            int threads) {
  if (radius_px < 1 || sigma_px <= 0.0) {
    throw InvalidInput("smooth_motion: radius and sigma must be positive");
  }
  const int w = field.width();
  const int h = field.height();
  const double inv2s2 = 1.0 / (2.0 * sigma_px * sigma_px);

  Grid<Vec3> vectors(w, h, Vec3::Zero());
  Grid<flow::Disp> offsets(w, h);
  Mask valid(w, h, 0);
  parallel_for(0, h, threads, [&](int y) {
    for (int x = 0; x < w; ++x) {
      if (!field.valid(x, y)) continue;
      valid(x, y) = 1;
      offsets(x, y) = field.offset(x, y);
      double wsum = 0.0;
      Vec3 acc = Vec3::Zero();
      const int y0 = std::max(0, y - radius_px), y1 = std::min(h - 1, y + radius_px);
      const int x0 = std::max(0, x - radius_px), x1 = std::min(w - 1, x + radius_px);
      for (int ny = y0; ny <= y1; ++ny) {
        for (int nx = x0; nx <= x1; ++nx) {
          if (!field.valid(nx, ny)) continue;
          const double dx = nx - x, dy = ny - y;
          const double wgt = std::exp(-(dx * dx + dy * dy) * inv2s2);
          wsum += wgt;
          acc += wgt * field.vector(nx, ny);
        }
      }
      vectors(x, y) = acc / wsum;
    }
  });
  return {std::move(vectors), std::move(offsets), std::move(valid), field.source_index(),
          field.target_index()};
}

MotionField3D integrate_motion(const std::vector<const MotionField3D*>& chain) {
  if (chain.empty()) throw InvalidInput("integrate_motion: empty chain");
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    if (chain[i]->target_index() != chain[i + 1]->source_index()) {
      throw InvalidInput("integrate_motion: chain is not temporally contiguous");
    }
    if (chain[i]->width() != chain[i + 1]->width() ||
        chain[i]->height() != chain[i + 1]->height()) {
      throw InvalidInput("integrate_motion: chain field size mismatch");
    }
  }

  const int w = chain.front()->width();
  const int h = chain.front()->height();
  Grid<Vec3> vectors(w, h, Vec3::Zero());
  Grid<flow::Disp> offsets(w, h);
  Mask valid(w, h, 0);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Vec3 m = Vec3::Zero();
      int px = x, py = y;
      bool ok = true;
      for (const MotionField3D* link : chain) {
        if (!link->mask().in_bounds(px, py) || !link->valid(px, py)) {
          ok = false;
          break;
        }
        m += link->vector(px, py);
        const flow::Disp s = link->offset(px, py);
        px += s.x;
        py += s.y;
      }
      if (!ok) continue;
      vectors(x, y) = m;
      offsets(x, y) = {static_cast<std::int16_t>(px - x), static_cast<std::int16_t>(py - y)};
      valid(x, y) = 1;
    }
  }
  return {std::move(vectors), std::move(offsets), std::move(valid),
          chain.front()->source_index(), chain.back()->target_index()};
}

}  // namespace fuse4d::lift
