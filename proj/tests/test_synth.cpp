#include "fuse4d/synth.hpp"

#include "fuse4d/geometry.hpp"
#include "fuse4d/lift.hpp"
#include "fuse4d/metrics.hpp"
#include "fuse4d/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace fuse4d;
using synth::NoiseSpec;
using synth::SphereSceneSpec;

TEST_SUITE("synth") {

TEST_CASE("sphere center pixel depth is center_depth - radius on the principal ray") {
  SphereSceneSpec spec;
  spec.image_size = 97;  // odd size: principal point (48, 48) is a pixel
  spec.frame_count = 1;
  const CameraIntrinsics k = synth::default_intrinsics(spec.image_size);
  spec.start_row_px = k.v0;  // sphere center on the principal ray
  const Sequence seq = synth::gen_falling_sphere(spec, k);
  const int cx = static_cast<int>(k.u0), cy = static_cast<int>(k.v0);
  REQUIRE(seq.frames[0].depth().valid(cx, cy));
  CHECK(seq.frames[0].depth().at(cx, cy) ==
        doctest::Approx(spec.center_depth_mm - spec.radius_mm).epsilon(1e-12));
}

TEST_CASE("ground-truth flow on the sphere is (0, fall) and co-visibility masked") {
  SphereSceneSpec spec;
  spec.image_size = 96;
  spec.frame_count = 4;
  const CameraIntrinsics k = synth::default_intrinsics(spec.image_size);
  const Sequence seq = synth::gen_falling_sphere(spec, k);
  const flow::Flow2D gt = synth::sphere_gt_flow(seq, 1);
  CHECK(gt.source_index() == 1);
  CHECK(gt.target_index() == 2);
  int valid = 0;
  for (int y = 0; y < 96; ++y) {
    for (int x = 0; x < 96; ++x) {
      if (!gt.valid(x, y)) continue;
      ++valid;
      CHECK(gt.at(x, y) == flow::Disp{0, 2});
      CHECK(seq.frames[1].depth().valid(x, y));
      CHECK(seq.frames[2].depth().valid(x, y + 2));
    }
  }
  CHECK(valid > 500);
}

TEST_CASE("sphere sequence ground truth matches the analytic surface") {
  SphereSceneSpec spec;
  spec.image_size = 64;
  spec.frame_count = 3;
  spec.radius_mm = 140.0;
  const CameraIntrinsics k = synth::default_intrinsics(spec.image_size);
  const Sequence seq = synth::gen_falling_sphere(spec, k);
  for (std::size_t t = 0; t < 3; ++t) {
    const auto& cloud = seq.frames[t].cloud();
    const Vec3 c = seq.ground_truth->centers[t];
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        if (cloud.valid(x, y)) {
          CHECK(std::abs((cloud.at(x, y) - c).norm() - 140.0) < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("sphere leaving the frame raises an invalid-spec error") {
  SphereSceneSpec spec;
  spec.image_size = 64;
  spec.frame_count = 40;
  spec.fall_px = 4.0;  // travels 156 px inside a 64 px frame
  const CameraIntrinsics k = synth::default_intrinsics(spec.image_size);
  CHECK_THROWS_AS(synth::gen_falling_sphere(spec, k), InvalidInput);
}

TEST_CASE("textured plane is exactly planar with zero roughness") {
  const CameraIntrinsics k = synth::default_intrinsics(64);
  const Sequence seq = synth::gen_textured_plane(64, 800.0, 0.7, k, 2);
  for (const auto& frame : seq.frames) {
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        CHECK(frame.cloud().at(x, y).z() == 800.0);
      }
    }
  }
  metrics::RoughnessParams rp;
  CHECK(std::abs(metrics::mean_roughness(seq.frames[0].cloud(), rp)) < 1e-9);
}

TEST_CASE("noiseless sphere roughness is strictly positive (curvature term)") {
  SphereSceneSpec spec;
  spec.image_size = 96;
  spec.frame_count = 1;
  const CameraIntrinsics k = synth::default_intrinsics(spec.image_size);
  const Sequence seq = synth::gen_falling_sphere(spec, k);
  metrics::RoughnessParams rp;
  const double rough = metrics::mean_roughness(seq.frames[0].cloud(), rp);
  CHECK(rough > 0.0);
}

TEST_CASE("zero noise leaves the sequence bit-exactly unchanged") {
  const CameraIntrinsics k = synth::default_intrinsics(48);
  const Sequence seq = synth::gen_textured_plane(48, 700.0, 0.5, k, 2);
  NoiseSpec noise;
  noise.seed = 99;
  const Sequence out = synth::add_noise(seq, noise);
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    for (int y = 0; y < 48; ++y) {
      for (int x = 0; x < 48; ++x) {
        CHECK(out.frames[t].depth().at(x, y) == seq.frames[t].depth().at(x, y));
        CHECK(out.frames[t].intensity().at(x, y) == seq.frames[t].intensity().at(x, y));
      }
    }
  }
}

TEST_CASE("depth noise sample std over 1e5+ pixels lands in [0.195, 0.205] for sigma 0.2") {
  const CameraIntrinsics k = synth::default_intrinsics(128);
  const Sequence seq = synth::gen_textured_plane(128, 800.0, 0.5, k, 8);  // 131072 samples
  NoiseSpec noise;
  noise.depth_sigma = 0.2;
  noise.seed = 12345;
  const Sequence out = synth::add_noise(seq, noise, 2);
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < out.frames.size(); ++t) {
    for (int y = 0; y < 128; ++y) {
      for (int x = 0; x < 128; ++x) {
        const double d = out.frames[t].depth().at(x, y) - seq.frames[t].depth().at(x, y);
        sum += d;
        sum2 += d * d;
        ++n;
      }
    }
  }
  REQUIRE(n >= 100000);
  const double mean = sum / n;
  const double std = std::sqrt(sum2 / n - mean * mean);
  CHECK(std >= 0.195);
  CHECK(std <= 0.205);
}

TEST_CASE("intensity noise is clipped to [0,1]") {
  const CameraIntrinsics k = synth::default_intrinsics(48);
  const Sequence seq = synth::gen_textured_plane(48, 700.0, 1.0, k, 1);
  NoiseSpec noise;
  noise.intensity_sigma = 0.5;
  noise.seed = 3;
  const Sequence out = synth::add_noise(seq, noise);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 48; ++x) {
      CHECK(out.frames[0].intensity().at(x, y) >= 0.0);
      CHECK(out.frames[0].intensity().at(x, y) <= 1.0);
    }
  }
}

TEST_CASE("same seed reproduces identical output, independent of threads") {
  const CameraIntrinsics k = synth::default_intrinsics(64);
  const Sequence seq = synth::gen_textured_plane(64, 700.0, 0.6, k, 4);
  NoiseSpec noise;
  noise.depth_sigma = 0.3;
  noise.intensity_sigma = 0.05;
  noise.seed = 777;
  const Sequence a = synth::add_noise(seq, noise, 1);
  const Sequence b = synth::add_noise(seq, noise, 4);
  for (std::size_t t = 0; t < 4; ++t) {
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        CHECK(a.frames[t].depth().at(x, y) == b.frames[t].depth().at(x, y));
        CHECK(a.frames[t].intensity().at(x, y) == b.frames[t].intensity().at(x, y));
      }
    }
  }
}

TEST_CASE("texture-correlated depth noise tracks the intensity gradient") {
  const CameraIntrinsics k = synth::default_intrinsics(96);
  const int frames = 48;
  const Sequence seq = synth::gen_textured_plane(96, 800.0, 1.0, k, frames);
  NoiseSpec noise;
  noise.depth_sigma = 0.3;
  noise.texture_correlated = true;
  noise.seed = 31;
  const Sequence out = synth::add_noise(seq, noise, 2);

  // Per-pixel noise std across frames vs. clean-intensity gradient magnitude.
  const auto& clean = seq.frames[0].intensity();
  std::vector<double> sigma_hat, grad;
  for (int y = 1; y < 95; ++y) {
    for (int x = 1; x < 95; ++x) {
      double s2 = 0.0;
      for (int t = 0; t < frames; ++t) {
        const double d = out.frames[t].depth().at(x, y) - 800.0;
        s2 += d * d;
      }
      sigma_hat.push_back(std::sqrt(s2 / frames));
      const double gx = (clean.at(x + 1, y) - clean.at(x - 1, y)) * 0.5;
      const double gy = (clean.at(x, y + 1) - clean.at(x, y - 1)) * 0.5;
      grad.push_back(std::sqrt(gx * gx + gy * gy));
    }
  }
  const auto n = static_cast<double>(grad.size());
  double ms = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    ms += sigma_hat[i];
    mg += grad[i];
  }
  ms /= n;
  mg /= n;
  double cov = 0.0, vs = 0.0, vg = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    cov += (sigma_hat[i] - ms) * (grad[i] - mg);
    vs += (sigma_hat[i] - ms) * (sigma_hat[i] - ms);
    vg += (grad[i] - mg) * (grad[i] - mg);
  }
  const double pearson = cov / std::sqrt(vs * vg);
  CHECK(pearson > 0.5);
}

TEST_CASE("inject_outliers alters exactly the requested fraction") {
  const flow::Flow2D f(Grid<flow::Disp>(40, 30, flow::Disp{1, 1}), Mask(40, 30, 1), 0, 1);

  const auto unchanged = synth::inject_outliers(f, 0.0, 3.0, 5);
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 40; ++x) {
      CHECK(unchanged.flow.at(x, y) == flow::Disp{1, 1});
      CHECK(unchanged.corrupted(x, y) == 0);
    }
  }

  const auto out = synth::inject_outliers(f, 0.05, 3.0, 5);
  std::size_t altered = 0, flagged = 0;
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 40; ++x) {
      flagged += out.corrupted(x, y) ? 1 : 0;
      if (out.corrupted(x, y)) {
        ++altered;
        const double dx = out.flow.at(x, y).x - 1.0;
        const double dy = out.flow.at(x, y).y - 1.0;
        CHECK(std::sqrt(dx * dx + dy * dy) >= 3.0);
      } else {
        CHECK(out.flow.at(x, y) == flow::Disp{1, 1});
      }
    }
  }
  CHECK(altered == static_cast<std::size_t>(0.05 * 40 * 30));
  CHECK(flagged == altered);
}

TEST_CASE("corrupted vectors are rejected by the forward-backward check") {
  const int w = 48, h = 48;
  const flow::Flow2D fwd(Grid<flow::Disp>(w, h, flow::Disp{0, 2}), Mask(w, h, 1), 0, 1);
  const flow::Flow2D bwd(Grid<flow::Disp>(w, h, flow::Disp{0, -2}), Mask(w, h, 1), 1, 0);
  const auto corrupt = synth::inject_outliers(fwd, 0.05, 3.0, 11);
  const Mask ok = lift::fb_check(corrupt.flow, bwd, 2.0);
  std::size_t rejected = 0, total = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!corrupt.corrupted(x, y)) continue;
      ++total;
      rejected += ok(x, y) ? 0 : 1;
    }
  }
  REQUIRE(total > 0);
  CHECK(static_cast<double>(rejected) / static_cast<double>(total) >= 0.95);
}

}  // TEST_SUITE
