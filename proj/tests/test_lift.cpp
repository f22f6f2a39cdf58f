#include "fuse4d/lift.hpp"

#include "fuse4d/geometry.hpp"
#include "fuse4d/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace fuse4d;
using flow::Disp;
using flow::Flow2D;
using lift::MotionField3D;

namespace {

const CameraIntrinsics kCam{150.0, 140.0, 4.0, 4.5};

SequenceFrame random_frame(int index, int w, int h, std::uint64_t seed, double mask_rate = 0.0) {
  Rng rng(seed);
  Grid<double> intensity(w, h, 0.0);
  Grid<double> depth(w, h, 0.0);
  Mask valid(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      intensity(x, y) = rng.uniform();
      if (rng.uniform() >= mask_rate) {
        depth(x, y) = rng.uniform(200.0, 1200.0);
        valid(x, y) = 1;
      }
    }
  }
  return {index, IntensityFrame(intensity), DepthFrame(depth, valid), kCam};
}

SequenceFrame constant_frame(int index, int w, int h, double depth_mm) {
  return {index, IntensityFrame(Grid<double>(w, h, 0.5)),
          DepthFrame(Grid<double>(w, h, depth_mm), Mask(w, h, 1)), kCam};
}

Flow2D random_flow(int w, int h, int radius, int from, int to, std::uint64_t seed) {
  Rng rng(seed);
  Grid<Disp> vectors(w, h);
  for (auto& v : vectors.data()) {
    v = {static_cast<std::int16_t>(rng.uniform_int(-radius, radius)),
         static_cast<std::int16_t>(rng.uniform_int(-radius, radius))};
  }
  return {std::move(vectors), Mask(w, h, 1), from, to};
}

Flow2D constant_flow(int w, int h, Disp s, int from, int to) {
  return {Grid<Disp>(w, h, s), Mask(w, h, 1), from, to};
}

// Literal per-component evaluation of the projective motion formula, as an
// independent route against the cloud-difference implementation.
Vec3 motion_formula(double x, double y, double d_t, double d_T, Disp s, const CameraIntrinsics& k) {
  return {(x - k.u0) / k.fx * (d_T - d_t) + d_T * s.x / k.fx,
          (y - k.v0) / k.fy * (d_T - d_t) + d_T * s.y / k.fy, d_T - d_t};
}

}  // namespace

TEST_SUITE("lift") {

TEST_CASE("zero flow on identical depth gives zero motion everywhere") {
  const SequenceFrame a = constant_frame(0, 16, 16, 800.0);
  const SequenceFrame b = constant_frame(1, 16, 16, 800.0);
  const auto field = lift::lift_flow(a, b, constant_flow(16, 16, {0, 0}, 0, 1), kCam);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      REQUIRE(field.valid(x, y));
      CHECK(field.vector(x, y).norm() == 0.0);
    }
  }
}

TEST_CASE("zero flow with +1 mm depth at the principal ray gives (0,0,1)") {
  const SequenceFrame a = constant_frame(0, 32, 34, 800.0);
  Grid<double> depth(32, 34, 800.0);
  // Principal point of kCam is (15.5, 16.5); probe the 4 adjacent pixels and
  // check the exact principal-ray pixel of a centered camera separately.
  const CameraIntrinsics centered{150.0, 140.0, 16.0, 17.0};
  depth(16, 17) = 801.0;
  const SequenceFrame a2{0, IntensityFrame(Grid<double>(32, 34, 0.5)),
                         DepthFrame(Grid<double>(32, 34, 800.0), Mask(32, 34, 1)), centered};
  const SequenceFrame b2{1, IntensityFrame(Grid<double>(32, 34, 0.5)),
                         DepthFrame(depth, Mask(32, 34, 1)), centered};
  const auto field = lift::lift_flow(a2, b2, constant_flow(32, 34, {0, 0}, 0, 1), centered);
  CHECK(field.vector(16, 17).x() == 0.0);
  CHECK(field.vector(16, 17).y() == 0.0);
  CHECK(field.vector(16, 17).z() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("lifted motion equals the literal projective formula on random pairs") {
  const SequenceFrame a = random_frame(0, 24, 20, 901);
  const SequenceFrame b = random_frame(1, 24, 20, 902);
  const Flow2D f = random_flow(24, 20, 3, 0, 1, 903);
  const auto field = lift::lift_flow(a, b, f, kCam);
  double max_err = 0.0;
  int checked = 0;
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 24; ++x) {
      if (!field.valid(x, y)) continue;
      const Disp s = f.at(x, y);
      const Vec3 expected = motion_formula(x, y, a.depth().at(x, y),
                                           b.depth().at(x + s.x, y + s.y), s, kCam);
      max_err = std::max(max_err, (field.vector(x, y) - expected).norm());
      ++checked;
    }
  }
  CHECK(checked > 200);
  CHECK(max_err < 1e-9);
}

TEST_CASE("lift_flow invalidates out-of-bounds targets and masked depth") {
  const SequenceFrame a = random_frame(0, 12, 12, 77, 0.3);
  const SequenceFrame b = random_frame(1, 12, 12, 78, 0.3);
  const Flow2D f = constant_flow(12, 12, {3, 0}, 0, 1);
  const auto field = lift::lift_flow(a, b, f, kCam);
  for (int y = 0; y < 12; ++y) {
    for (int x = 0; x < 12; ++x) {
      const bool expect = x + 3 < 12 && a.depth().valid(x, y) && b.depth().valid(x + 3, y);
      CHECK(field.valid(x, y) == expect);
    }
  }
  // Flow frame indices must match the given frames.
  CHECK_THROWS_AS(lift::lift_flow(b, a, f, kCam), InvalidInput);
}

TEST_CASE("fb_check accepts exact negation everywhere in bounds") {
  const Flow2D fwd = constant_flow(16, 16, {2, 1}, 0, 1);
  const Flow2D bwd = constant_flow(16, 16, {-2, -1}, 1, 0);
  const Mask ok = lift::fb_check(fwd, bwd, 2.0);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      CHECK(ok(x, y) == ((x + 2 < 16 && y + 1 < 16) ? 1 : 0));
    }
  }
}

TEST_CASE("fb_check threshold is strict: norm exactly theta is rejected") {
  const Flow2D fwd = constant_flow(10, 10, {2, 0}, 0, 1);
  const Flow2D bwd = constant_flow(10, 10, {0, 0}, 1, 0);
  const Mask ok = lift::fb_check(fwd, bwd, 2.0);
  for (auto v : ok.data()) CHECK(v == 0);
}

TEST_CASE("fb_check rejects at least 95% of injected gross errors") {
  const int w = 40, h = 40;
  Rng rng(31);
  Grid<Disp> fwd_vec(w, h, Disp{1, 1});
  Mask corrupted(w, h, 0);
  int n_bad = 0;
  for (int i = 0; i < 100; ++i) {
    const int x = rng.uniform_int(0, w - 1);
    const int y = rng.uniform_int(0, h - 1);
    if (corrupted(x, y)) continue;
    // Error of at least 4 px in x.
    fwd_vec(x, y) = {static_cast<std::int16_t>(1 + 4 + rng.uniform_int(0, 2)),
                     static_cast<std::int16_t>(1)};
    corrupted(x, y) = 1;
    ++n_bad;
  }
  const Flow2D fwd(fwd_vec, Mask(w, h, 1), 0, 1);
  const Flow2D bwd = constant_flow(w, h, {-1, -1}, 1, 0);
  const Mask ok = lift::fb_check(fwd, bwd, 2.0);
  int rejected = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (corrupted(x, y) && !ok(x, y)) ++rejected;
    }
  }
  CHECK(rejected >= (n_bad * 95 + 99) / 100);
}

TEST_CASE("fb_check_3d accepts cancelling motion and rejects mismatches") {
  const SequenceFrame a = constant_frame(0, 12, 12, 800.0);
  const SequenceFrame b = constant_frame(1, 12, 12, 800.0);
  const auto fwd = lift::lift_flow(a, b, constant_flow(12, 12, {1, 0}, 0, 1), kCam);
  const auto bwd = lift::lift_flow(b, a, constant_flow(12, 12, {-1, 0}, 1, 0), kCam);
  const Mask ok = lift::fb_check_3d(fwd, bwd, 1.0);
  int accepted = 0;
  for (auto v : ok.data()) accepted += v;
  CHECK(accepted > 100);  // interior pixels cancel exactly

  const auto bwd_wrong = lift::lift_flow(b, a, constant_flow(12, 12, {3, 0}, 1, 0), kCam);
  const Mask bad = lift::fb_check_3d(fwd, bwd_wrong, 1.0);
  for (auto v : bad.data()) CHECK(v == 0);
}

TEST_CASE("integrate_motion composes two zero fields into a zero field") {
  const SequenceFrame f0 = constant_frame(0, 10, 10, 500.0);
  const SequenceFrame f1 = constant_frame(1, 10, 10, 500.0);
  const SequenceFrame f2 = constant_frame(2, 10, 10, 500.0);
  const auto l01 = lift::lift_flow(f0, f1, constant_flow(10, 10, {0, 0}, 0, 1), kCam);
  const auto l12 = lift::lift_flow(f1, f2, constant_flow(10, 10, {0, 0}, 1, 2), kCam);
  const auto total = lift::integrate_motion({&l01, &l12});
  CHECK(total.source_index() == 0);
  CHECK(total.target_index() == 2);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      CHECK(total.valid(x, y));
      CHECK(total.vector(x, y).norm() == 0.0);
    }
  }
}

TEST_CASE("integrate_motion adds constant links: m+m = 2m") {
  // Constant lateral shift of one pixel per step on a constant-depth scene
  // gives a constant per-link 3D vector; the two-link chain doubles it.
  const SequenceFrame f0 = constant_frame(0, 12, 12, 600.0);
  const SequenceFrame f1 = constant_frame(1, 12, 12, 600.0);
  const SequenceFrame f2 = constant_frame(2, 12, 12, 600.0);
  const auto l01 = lift::lift_flow(f0, f1, constant_flow(12, 12, {1, 0}, 0, 1), kCam);
  const auto l12 = lift::lift_flow(f1, f2, constant_flow(12, 12, {1, 0}, 1, 2), kCam);
  const auto total = lift::integrate_motion({&l01, &l12});
  const double step = 600.0 / kCam.fx;  // mm per pixel at this depth
  for (int y = 0; y < 12; ++y) {
    for (int x = 0; x < 9; ++x) {
      REQUIRE(total.valid(x, y));
      CHECK(total.vector(x, y).x() == doctest::Approx(2.0 * step).epsilon(1e-12));
      CHECK(total.offset(x, y) == Disp{2, 0});
    }
  }
}

TEST_CASE("integrate_motion matches an explicit path-following oracle") {
  const int w = 8, h = 8;
  const SequenceFrame f0 = random_frame(0, w, h, 601);
  const SequenceFrame f1 = random_frame(1, w, h, 602);
  const SequenceFrame f2 = random_frame(2, w, h, 603);
  const SequenceFrame f3 = random_frame(3, w, h, 604);
  const Flow2D g01 = random_flow(w, h, 2, 0, 1, 611);
  const Flow2D g12 = random_flow(w, h, 2, 1, 2, 612);
  const Flow2D g23 = random_flow(w, h, 2, 2, 3, 613);
  const auto l01 = lift::lift_flow(f0, f1, g01, kCam);
  const auto l12 = lift::lift_flow(f1, f2, g12, kCam);
  const auto l23 = lift::lift_flow(f2, f3, g23, kCam);
  const auto total = lift::integrate_motion({&l01, &l12, &l23});

  const lift::MotionField3D* links[3] = {&l01, &l12, &l23};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Walk the chain by hand.
      Vec3 sum = Vec3::Zero();
      int px = x, py = y;
      bool ok = true;
      for (const auto* link : links) {
        if (px < 0 || px >= w || py < 0 || py >= h || !link->valid(px, py)) {
          ok = false;
          break;
        }
        sum += link->vector(px, py);
        const Disp s = link->offset(px, py);
        px += s.x;
        py += s.y;
      }
      CHECK(total.valid(x, y) == ok);
      if (ok) CHECK((total.vector(x, y) - sum).norm() < 1e-12);
    }
  }
}

TEST_CASE("invalidity is absorbing along a chain") {
  const SequenceFrame f0 = constant_frame(0, 8, 8, 500.0);
  Grid<double> depth(8, 8, 500.0);
  Mask mask(8, 8, 1);
  mask(4, 4) = 0;  // hole in the middle frame
  const SequenceFrame f1{1, IntensityFrame(Grid<double>(8, 8, 0.5)), DepthFrame(depth, mask),
                         kCam};
  const SequenceFrame f2 = constant_frame(2, 8, 8, 500.0);
  const auto l01 = lift::lift_flow(f0, f1, constant_flow(8, 8, {0, 0}, 0, 1), kCam);
  const auto l12 = lift::lift_flow(f1, f2, constant_flow(8, 8, {0, 0}, 1, 2), kCam);
  const auto total = lift::integrate_motion({&l01, &l12});
  CHECK_FALSE(total.valid(4, 4));
  CHECK(total.valid(3, 4));
}

TEST_CASE("reverse chains cancel on bijective constant motion") {
  const SequenceFrame f0 = constant_frame(0, 12, 12, 700.0);
  const SequenceFrame f1 = constant_frame(1, 12, 12, 700.0);
  const auto fwd = lift::lift_flow(f0, f1, constant_flow(12, 12, {1, 1}, 0, 1), kCam);
  const auto bwd = lift::lift_flow(f1, f0, constant_flow(12, 12, {-1, -1}, 1, 0), kCam);
  for (int y = 1; y < 11; ++y) {
    for (int x = 1; x < 11; ++x) {
      if (!fwd.valid(x, y)) continue;
      const Disp s = fwd.offset(x, y);
      if (!bwd.valid(x + s.x, y + s.y)) continue;
      CHECK((fwd.vector(x, y) + bwd.vector(x + s.x, y + s.y)).norm() < 1e-12);
    }
  }
}

TEST_CASE("fb_check is role-symmetric on bijective flows") {
  // Swapping forward/backward roles and re-indexing through the flow gives
  // the same accepted correspondence set.
  const Flow2D fwd = constant_flow(14, 14, {2, -1}, 0, 1);
  const Flow2D bwd = constant_flow(14, 14, {-2, 1}, 1, 0);
  const Mask a = lift::fb_check(fwd, bwd, 2.0);
  const Mask b = lift::fb_check(bwd, fwd, 2.0);
  for (int y = 0; y < 14; ++y) {
    for (int x = 0; x < 14; ++x) {
      if (!a(x, y)) continue;
      const Disp s = fwd.at(x, y);
      CHECK(b(x + s.x, y + s.y) == 1);
    }
  }
  for (int y = 0; y < 14; ++y) {
    for (int x = 0; x < 14; ++x) {
      if (!b(x, y)) continue;
      const Disp s = bwd.at(x, y);
      CHECK(a(x + s.x, y + s.y) == 1);
    }
  }
}

TEST_CASE("integrate_motion rejects broken chains") {
  const SequenceFrame f0 = constant_frame(0, 8, 8, 500.0);
  const SequenceFrame f1 = constant_frame(1, 8, 8, 500.0);
  const SequenceFrame f3 = constant_frame(3, 8, 8, 500.0);
  const SequenceFrame f4 = constant_frame(4, 8, 8, 500.0);
  const auto l01 = lift::lift_flow(f0, f1, constant_flow(8, 8, {0, 0}, 0, 1), kCam);
  const auto l34 = lift::lift_flow(f3, f4, constant_flow(8, 8, {0, 0}, 3, 4), kCam);
  CHECK_THROWS_AS(lift::integrate_motion({&l01, &l34}), InvalidInput);
  CHECK_THROWS_AS(lift::integrate_motion({}), InvalidInput);
}

TEST_CASE("smooth_motion preserves constants, masks and offsets") {
  const int w = 16, h = 16;
  Rng rng(55);
  Grid<Vec3> vectors(w, h, Vec3(1.0, -2.0, 3.0));
  Grid<Disp> offsets(w, h, Disp{1, 0});
  Mask valid(w, h, 1);
  valid(5, 5) = 0;
  const MotionField3D field(vectors, offsets, valid, 0, 1);
  const MotionField3D smoothed = lift::smooth_motion(field, 3, 1.5);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      CHECK(smoothed.valid(x, y) == field.valid(x, y));
      if (!field.valid(x, y)) continue;
      // Constant fields are fixed points; offsets pass through untouched.
      CHECK((smoothed.vector(x, y) - Vec3(1.0, -2.0, 3.0)).norm() < 1e-12);
      CHECK(smoothed.offset(x, y) == Disp{1, 0});
    }
  }
}

TEST_CASE("smooth_motion attenuates per-pixel noise") {
  const int w = 24, h = 24;
  Rng rng(56);
  Grid<Vec3> vectors(w, h, Vec3::Zero());
  for (auto& v : vectors.data()) v = Vec3(rng.normal(), rng.normal(), rng.normal());
  const MotionField3D field(vectors, Grid<Disp>(w, h, Disp{0, 0}), Mask(w, h, 1), 0, 1);
  const MotionField3D smoothed = lift::smooth_motion(field, 4, 2.0);
  double raw2 = 0.0, smooth2 = 0.0;
  for (int y = 4; y < h - 4; ++y) {
    for (int x = 4; x < w - 4; ++x) {
      raw2 += field.vector(x, y).squaredNorm();
      smooth2 += smoothed.vector(x, y).squaredNorm();
    }
  }
  CHECK(smooth2 < raw2 / 4.0);
}

TEST_CASE("fb_check rejects mismatched sizes") {
  const Flow2D a = constant_flow(8, 8, {0, 0}, 0, 1);
  const Flow2D b = constant_flow(9, 8, {0, 0}, 1, 0);
  CHECK_THROWS_AS(lift::fb_check(a, b, 2.0), InvalidInput);
}

}  // TEST_SUITE
