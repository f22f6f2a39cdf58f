#include "fuse4d/fusion.hpp"

#include "fuse4d/geometry.hpp"
#include "fuse4d/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace fuse4d::fusion {

namespace {

double resolve_delta_d(const FusionParams& params, const OrganizedCloud& cloud) {
  if (params.delta_d > 0.0) return params.delta_d;
  const double spacing = median_point_spacing(cloud);
  return spacing > 0.0 ? 2.0 * spacing : 1.0;
}

}  // namespace

OrganizedCloud fuse_frame(const std::vector<FusionTerm>& window, int t, const FusionParams& params,
                          int threads) {
  params.validate();
  if (window.empty()) throw InvalidInput("fuse_frame: empty window");

  std::vector<FusionTerm> terms = window;
  std::sort(terms.begin(), terms.end(), [](const FusionTerm& a, const FusionTerm& b) {
    return a.frame_index < b.frame_index;
  });

  const FusionTerm* center = nullptr;
  for (const FusionTerm& term : terms) {
    if (!term.cloud || !term.intensity) throw InvalidInput("fuse_frame: null data in window");
    if (term.frame_index == t) {
      if (term.motion) throw InvalidInput("fuse_frame: center term must not carry a motion field");
      center = &term;
    } else {
      if (!term.motion) throw InvalidInput("fuse_frame: missing motion field for window frame");
      if (term.motion->source_index() != t || term.motion->target_index() != term.frame_index) {
        throw InvalidInput("fuse_frame: motion field indices do not match the window");
      }
    }
  }
  if (!center) throw InvalidInput("fuse_frame: window does not contain the center frame");

  const int w = center->cloud->width();
  const int h = center->cloud->height();
  for (const FusionTerm& term : terms) {
    if (term.cloud->width() != w || term.cloud->height() != h ||
        term.intensity->width() != w || term.intensity->height() != h ||
        (term.motion && (term.motion->width() != w || term.motion->height() != h))) {
      throw InvalidInput("fuse_frame: window frame size mismatch");
    }
  }

  const double dd = resolve_delta_d(params, *center->cloud);
  const double inv2dd2 = 1.0 / (2.0 * dd * dd);
  const double inv2dg2 = 1.0 / (2.0 * params.delta_g * params.delta_g);
  const double df = params.resolved_delta_f();
  const double inv2df2 = 1.0 / (2.0 * df * df);
  const int sr = params.spatial_radius;

  Grid<Vec3> points(w, h, Vec3::Zero());
  Mask valid(w, h, 0);

  parallel_for(0, h, threads, [&](int y) {
    for (int x = 0; x < w; ++x) {
      Vec3 acc = Vec3::Zero();
      double kappa = 0.0;
      for (const FusionTerm& term : terms) {
        const int T = term.frame_index;
        int jx, jy;
        Vec3 m;
        if (T == t) {
          if (!center->cloud->valid(x, y)) continue;
          jx = x;
          jy = y;
          m = Vec3::Zero();
        } else {
          if (!term.motion->valid(x, y)) continue;
          const flow::Disp o = term.motion->offset(x, y);
          jx = x + o.x;
          jy = y + o.y;
          m = term.motion->vector(x, y);
        }
        const OrganizedCloud& cloud = *term.cloud;
        if (!cloud.points().in_bounds(jx, jy) || !cloud.valid(jx, jy)) continue;

        const Vec3& pc = cloud.at(jx, jy);
        const double ic = term.intensity->at(jx, jy);
        double ksum = 0.0;
        Vec3 csum = Vec3::Zero();
        const int ny0 = std::max(0, jy - sr), ny1 = std::min(h - 1, jy + sr);
        const int nx0 = std::max(0, jx - sr), nx1 = std::min(w - 1, jx + sr);
        for (int ny = ny0; ny <= ny1; ++ny) {
          for (int nx = nx0; nx <= nx1; ++nx) {
            if (!cloud.valid(nx, ny)) continue;
            const Vec3& pn = cloud.at(nx, ny);
            const double di = ic - term.intensity->at(nx, ny);
            const double wgt = std::exp(-(pc - pn).squaredNorm() * inv2dd2) *
                               std::exp(-di * di * inv2dg2);
            ksum += wgt;
            csum += wgt * pn;
          }
        }
        if (!(ksum > 0.0)) continue;
        const double dt = t - T;
        const double f = std::exp(-dt * dt * inv2df2);
        acc += f * (csum / ksum - m);
        kappa += f;
      }
      if (kappa > 0.0) {
        points(x, y) = acc / kappa;
        valid(x, y) = 1;
      }
    }
  });

  return {std::move(points), std::move(valid)};
}

OrganizedCloud fill_holes(const OrganizedCloud& cloud, const CameraIntrinsics& k,
                          const FusionParams& params, int threads, const Mask* targets) {
  params.validate();
  k.validate();
  const int w = cloud.width();
  const int h = cloud.height();
  if (targets && !cloud.mask().same_shape(*targets)) {
    throw InvalidInput("fill_holes: target mask shape mismatch");
  }
  const double spacing = median_point_spacing(cloud);
  if (spacing <= 0.0) return cloud;

  const double dh = params.delta_h > 0.0 ? params.delta_h
                    : params.delta_d > 0.0 ? params.delta_d
                                           : 2.0 * spacing;
  const double inv2dh2 = 1.0 / (2.0 * dh * dh);
  const int sr = params.spatial_radius;

  // Tangent-plane extrapolation of neighbor (nx, ny) onto the camera ray of
  // the hole pixel; falls back to the neighbor point itself when the local
  // fit is degenerate or the ray runs parallel to the plane.
  auto extrapolate = [&](int nx, int ny, const Vec3& ray) -> Vec3 {
    const Vec3& pn = cloud.at(nx, ny);
    std::vector<Vec3> patch;
    patch.reserve(9);
    for (int oy = -1; oy <= 1; ++oy) {
      for (int ox = -1; ox <= 1; ++ox) {
        const int px = nx + ox, py = ny + oy;
        if (cloud.points().in_bounds(px, py) && cloud.valid(px, py)) {
          patch.push_back(cloud.at(px, py));
        }
      }
    }
    const auto fit = fit_plane(patch);
    if (!fit) return pn;
    const double denom = ray.dot(fit->normal);
    if (std::abs(denom) < 1e-12) return pn;
    const double d = pn.dot(fit->normal) / denom;
    if (!(d > 0.0) || !std::isfinite(d)) return pn;
    return d * ray;
  };

  Grid<Vec3> points = cloud.points();
  Mask valid = cloud.mask();

  parallel_for(0, h, threads, [&](int y) {
    for (int x = 0; x < w; ++x) {
      if (cloud.valid(x, y)) continue;
      if (targets && !(*targets)(x, y)) continue;
      const int ny0 = std::max(0, y - sr), ny1 = std::min(h - 1, y + sr);
      const int nx0 = std::max(0, x - sr), nx1 = std::min(w - 1, x + sr);
      int count = 0;
      for (int ny = ny0; ny <= ny1 && count < 3; ++ny) {
        for (int nx = nx0; nx <= nx1 && count < 3; ++nx) {
          if (cloud.valid(nx, ny)) ++count;
        }
      }
      if (count < 3) continue;

      const Vec3 ray((x - k.u0) / k.fx, (y - k.v0) / k.fy, 1.0);
      double hsum = 0.0;
      Vec3 qsum = Vec3::Zero();
      for (int ny = ny0; ny <= ny1; ++ny) {
        for (int nx = nx0; nx <= nx1; ++nx) {
          if (!cloud.valid(nx, ny)) continue;
          const double dpx = x - nx, dpy = y - ny;
          const double dist2 = (dpx * dpx + dpy * dpy) * spacing * spacing;
          const double hw = std::exp(-dist2 * inv2dh2);
          hsum += hw;
          qsum += hw * extrapolate(nx, ny, ray);
        }
      }
      if (hsum > 0.0) {
        points(x, y) = qsum / hsum;
        valid(x, y) = 1;
      }
    }
  });

  return {std::move(points), std::move(valid)};
}

SequenceFuser::SequenceFuser(const Sequence& seq, flow::FlowParams flow_params,
                             FusionParams params, int threads)
    : seq_(seq), flow_params_(flow_params), params_(params), threads_(threads) {
  if (seq_.frames.empty()) throw InvalidInput("SequenceFuser: empty sequence");
  flow_params_.validate();
  params_.validate();
  seq_.intrinsics.validate();
}

const flow::Flow2D& SequenceFuser::pair_flow(int from, int to) {
  const auto key = std::make_pair(from, to);
  auto it = flows_.find(key);
  if (it == flows_.end()) {
    it = flows_
             .emplace(key, flow::estimate_flow(seq_.frames[from].intensity(),
                                               seq_.frames[to].intensity(), flow_params_, from, to,
                                               threads_))
             .first;
  }
  return it->second;
}

const lift::MotionField3D& SequenceFuser::link(int from, int to) {
  const auto key = std::make_pair(from, to);
  auto it = links_.find(key);
  if (it != links_.end()) return it->second;

  const flow::Flow2D& fwd = pair_flow(from, to);
  const flow::Flow2D& rev = pair_flow(to, from);
  lift::MotionField3D lifted;
  if (params_.fb_use_3d) {
    const auto raw_f = lift::lift_flow(seq_.frames[from], seq_.frames[to], fwd, seq_.intrinsics);
    const auto raw_b = lift::lift_flow(seq_.frames[to], seq_.frames[from], rev, seq_.intrinsics);
    const Mask ok = lift::fb_check_3d(raw_f, raw_b, params_.theta_mm);
    lifted = lift::apply_mask(raw_f, ok);
  } else {
    const Mask ok = lift::fb_check(fwd, rev, params_.theta_px);
    lifted = lift::lift_flow(seq_.frames[from], seq_.frames[to], fwd, seq_.intrinsics, &ok);
  }
  return links_.emplace(key, std::move(lifted)).first->second;
}

OrganizedCloud SequenceFuser::fused_frame(int t) {
  if (t < 0 || t >= static_cast<int>(seq_.frames.size())) {
    throw InvalidInput("SequenceFuser: frame index out of range");
  }
  const int half = params_.temporal_window / 2;
  const int lo = std::max(0, t - half);
  const int hi = std::min(static_cast<int>(seq_.frames.size()) - 1, t + half);

  std::deque<lift::MotionField3D> integrated;
  std::vector<FusionTerm> window;
  for (int T = lo; T <= hi; ++T) {
    if (T == t) {
      window.push_back(FusionTerm::of(seq_.frames[t]));
      continue;
    }
    std::vector<const lift::MotionField3D*> chain;
    const int step = T > t ? 1 : -1;
    for (int f = t; f != T; f += step) chain.push_back(&link(f, f + step));
    lift::MotionField3D motion = lift::integrate_motion(chain);
    if (params_.motion_smoothing_radius > 0) {
      motion = lift::smooth_motion(motion, params_.motion_smoothing_radius,
                                   params_.motion_smoothing_radius / 2.0, threads_);
    }
    integrated.push_back(std::move(motion));
    window.push_back(FusionTerm::of(seq_.frames[T], &integrated.back()));
  }

  OrganizedCloud fused = fuse_frame(window, t, params_, threads_);
  return fill_holes(fused, seq_.intrinsics, params_, threads_,
                    &seq_.frames[t].depth().mask());
}

std::vector<OrganizedCloud> SequenceFuser::fuse_all() {
  std::vector<OrganizedCloud> out;
  out.reserve(seq_.frames.size());
  for (int t = 0; t < static_cast<int>(seq_.frames.size()); ++t) out.push_back(fused_frame(t));
  return out;
}

void SequenceFuser::set_temporal_window(int n) {
  FusionParams p = params_;
  p.temporal_window = n;
  p.validate();
  params_ = p;
}

std::vector<OrganizedCloud> fuse_sequence(const Sequence& seq, const FusionParams& params,
                                          const flow::FlowParams& flow_params, int threads) {
  SequenceFuser fuser(seq, flow_params, params, threads);
  return fuser.fuse_all();
}

Sequence clouds_to_sequence(const Sequence& src, const std::vector<OrganizedCloud>& clouds) {
  if (clouds.size() != src.frames.size()) {
    throw InvalidInput("clouds_to_sequence: frame count mismatch");
  }
  Sequence out;
  out.intrinsics = src.intrinsics;
  out.ground_truth = src.ground_truth;
  out.frames.reserve(clouds.size());
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    const OrganizedCloud& c = clouds[i];
    Grid<double> depth(c.width(), c.height(), 0.0);
    Mask valid(c.width(), c.height(), 0);
    for (int y = 0; y < c.height(); ++y) {
      for (int x = 0; x < c.width(); ++x) {
        if (!c.valid(x, y)) continue;
        const double z = c.at(x, y).z();
        if (std::isfinite(z) && z > 0.0) {
          depth(x, y) = z;
          valid(x, y) = 1;
        }
      }
    }
    out.frames.emplace_back(src.frames[i].index(), src.frames[i].intensity(),
                            DepthFrame(std::move(depth), std::move(valid)), src.intrinsics);
  }
  return out;
}

}  // namespace fuse4d::fusion
