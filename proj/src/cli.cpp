#include "fuse4d/cli.hpp"

#include "fuse4d/experiments.hpp"
#include "fuse4d/geometry.hpp"
#include "fuse4d/io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fuse4d::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Maps exceptions to the exit-code contract: InvalidInput raised before any
// computation is usage (1); everything thrown while loading or computing is
// a data/compute failure (2).
template <typename Fn>
int run_guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const LoadError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const FitFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

metrics::Roi parse_roi(const std::string& spec) {
  metrics::Roi roi;
  char sep1, sep2, sep3;
  std::istringstream ss(spec);
  if (!(ss >> roi.x0 >> sep1 >> roi.y0 >> sep2 >> roi.x1 >> sep3 >> roi.y1) || sep1 != ':' ||
      sep2 != ':' || sep3 != ':' || !(ss >> std::ws).eof()) {
    throw InvalidInput("--roi must be x0:y0:x1:y1");
  }
  return roi;
}

std::string provenance_lookup(const std::vector<std::pair<std::string, std::string>>& kv,
                              const std::string& key) {
  for (const auto& [k, v] : kv) {
    if (k == key) return v;
  }
  return {};
}

}  // namespace

fusion::FusionParams fusion_params_from(const FuseOptions& opt) {
  fusion::FusionParams p;
  p.temporal_window = opt.frames_fused;
  p.spatial_radius = opt.spatial_radius;
  p.delta_d = opt.delta_d;
  p.delta_g = opt.delta_g;
  p.delta_f = opt.delta_f;
  p.delta_h = opt.delta_h;
  p.theta_px = opt.theta;
  p.motion_smoothing_radius = opt.motion_smooth_radius;
  if (opt.fb_3d_mm > 0.0) {
    p.fb_use_3d = true;
    p.theta_mm = opt.fb_3d_mm;
  }
  return p;
}

flow::FlowParams flow_params_from(const FuseOptions& opt) {
  flow::FlowParams p;
  p.patch_radius = opt.patch_radius;
  p.search_radius = opt.search_radius;
  p.smoothness_weight = opt.lambda;
  p.unary_truncation = opt.tau1;
  p.pairwise_truncation = opt.tau2;
  p.iterations = opt.flow_iterations;
  return p;
}

void write_provenance(const std::string& dir, const std::string& command,
                      const std::vector<std::pair<std::string, std::string>>& params) {
  std::vector<std::pair<std::string, std::string>> kv = params;
  kv.emplace_back("command", command);
  kv.emplace_back("version", kVersion);
  std::sort(kv.begin(), kv.end());
  std::string text;
  for (const auto& [k, v] : kv) text += k + " = " + v + "\n";
  std::ofstream out(fs::path(dir) / "provenance.txt", std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write provenance in " + dir);
  out << text;
}

std::vector<std::pair<std::string, std::string>> read_provenance(const std::string& dir) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::ifstream in(fs::path(dir) / "provenance.txt", std::ios::binary);
  if (!in) return kv;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t sep = line.find(" = ");
    if (sep != std::string::npos) kv.emplace_back(line.substr(0, sep), line.substr(sep + 3));
  }
  return kv;
}

int run_synth(const SynthOptions& opt) {
  if (opt.out.empty()) {
    std::cerr << "error: --out is required\n";
    return kExitUsage;
  }
  if (opt.scene != "sphere" && opt.scene != "plane") {
    std::cerr << "error: --scene must be sphere or plane\n";
    return kExitUsage;
  }
  synth::NoiseSpec noise;
  noise.depth_sigma = opt.depth_noise_mm;
  noise.intensity_sigma = opt.intensity_noise;
  noise.texture_correlated = opt.texture_noise;
  noise.seed = opt.seed;
  try {
    noise.validate();
    if (opt.scene == "sphere") {
      synth::SphereSceneSpec spec;
      spec.radius_mm = opt.radius_mm;
      spec.center_depth_mm = opt.center_depth_mm;
      spec.image_size = opt.size;
      spec.fall_px = opt.fall_px;
      spec.frame_count = opt.frames;
      spec.background_depth_mm = opt.background_depth_mm;
      spec.texture_contrast = opt.texture_contrast;
      spec.validate();
    } else if (opt.size < 8 || opt.plane_depth_mm <= 0.0 || opt.frames < 1) {
      throw InvalidInput("invalid plane parameters");
    }
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  return run_guarded([&] {
    const CameraIntrinsics k = synth::default_intrinsics(opt.size);
    Sequence seq;
    if (opt.scene == "sphere") {
      synth::SphereSceneSpec spec;
      spec.radius_mm = opt.radius_mm;
      spec.center_depth_mm = opt.center_depth_mm;
      spec.image_size = opt.size;
      spec.fall_px = opt.fall_px;
      spec.frame_count = opt.frames;
      spec.background_depth_mm = opt.background_depth_mm;
      spec.texture_contrast = opt.texture_contrast;
      seq = synth::gen_falling_sphere(spec, k);
    } else {
      seq = synth::gen_textured_plane(opt.size, opt.plane_depth_mm, opt.texture_contrast, k,
                                      opt.frames);
    }
    seq = synth::add_noise(seq, noise, opt.threads);
    io::write_sequence(seq, opt.out);
    write_provenance(opt.out, "synth",
                     {{"label", "raw"},
                      {"scene", opt.scene},
                      {"frames", std::to_string(opt.frames)},
                      {"size", std::to_string(opt.size)},
                      {"radius_mm", fmt(opt.radius_mm)},
                      {"center_depth_mm", fmt(opt.center_depth_mm)},
                      {"plane_depth_mm", fmt(opt.plane_depth_mm)},
                      {"background_depth_mm", fmt(opt.background_depth_mm)},
                      {"fall_px", fmt(opt.fall_px)},
                      {"texture_contrast", fmt(opt.texture_contrast)},
                      {"depth_noise_mm", fmt(opt.depth_noise_mm)},
                      {"intensity_noise", fmt(opt.intensity_noise)},
                      {"texture_noise", opt.texture_noise ? "1" : "0"},
                      {"seed", std::to_string(opt.seed)}});
    return kExitOk;
  });
}

int run_fuse(const FuseOptions& opt) {
  if (opt.in.empty() || opt.out.empty()) {
    std::cerr << "error: --in and --out are required\n";
    return kExitUsage;
  }
  if (opt.frames_fused < 1 || opt.frames_fused % 2 == 0) {
    std::cerr << "error: frames-fused must be odd\n";
    return kExitUsage;
  }
  fusion::FusionParams params;
  flow::FlowParams flow_params;
  try {
    params = fusion_params_from(opt);
    params.validate();
    flow_params = flow_params_from(opt);
    flow_params.validate();
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  return run_guarded([&] {
    const Sequence seq = io::read_sequence(opt.in);
    fusion::SequenceFuser fuser(seq, flow_params, params, opt.threads);
    std::vector<OrganizedCloud> clouds;
    clouds.reserve(seq.frames.size());
    for (int t = 0; t < static_cast<int>(seq.frames.size()); ++t) {
      if (opt.verbose) std::cerr << "fusing frame " << t << "/" << seq.frames.size() << "\n";
      clouds.push_back(fuser.fused_frame(t));
    }
    const Sequence fused = fusion::clouds_to_sequence(seq, clouds);
    io::write_sequence(fused, opt.out);
    write_provenance(opt.out, "fuse",
                     {{"label", opt.label},
                      {"in", opt.in},
                      {"n_fused", std::to_string(opt.frames_fused)},
                      {"spatial_radius", std::to_string(opt.spatial_radius)},
                      {"theta_px", fmt(opt.theta)},
                      {"fb_3d_mm", fmt(opt.fb_3d_mm)},
                      {"delta_d", fmt(opt.delta_d)},
                      {"delta_g", fmt(opt.delta_g)},
                      {"delta_f", fmt(opt.delta_f)},
                      {"delta_h", fmt(opt.delta_h)},
                      {"motion_smooth_radius", std::to_string(opt.motion_smooth_radius)},
                      {"patch_radius", std::to_string(opt.patch_radius)},
                      {"search_radius", std::to_string(opt.search_radius)},
                      {"lambda", fmt(opt.lambda)},
                      {"tau1", fmt(opt.tau1)},
                      {"tau2", fmt(opt.tau2)},
                      {"flow_iterations", std::to_string(opt.flow_iterations)}});
    return kExitOk;
  });
}

int run_baseline(const BaselineOptions& opt) {
  if (opt.in.empty() || opt.out.empty()) {
    std::cerr << "error: --in and --out are required\n";
    return kExitUsage;
  }
  baselines::BaselineMethod method;
  try {
    method.kind = baselines::kind_from_string(opt.method);
    method.window_radius = opt.window_radius;
    method.sigma_spatial = opt.sigma_spatial;
    method.sigma_range = opt.sigma_range;
    method.sigma_intensity = opt.sigma_intensity;
    method.eps_guided = opt.eps_guided;
    method.temporal_radius = opt.temporal_radius;
    method.validate();
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  return run_guarded([&] {
    const Sequence seq = io::read_sequence(opt.in);
    Sequence out;
    out.intrinsics = seq.intrinsics;
    out.ground_truth = seq.ground_truth;
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
      DepthFrame depth = baselines::apply_baseline(method, seq, static_cast<int>(t), opt.threads);
      out.frames.emplace_back(seq.frames[t].index(), seq.frames[t].intensity(), std::move(depth),
                              seq.intrinsics);
    }
    io::write_sequence(out, opt.out);
    write_provenance(opt.out, "baseline",
                     {{"label", opt.method},
                      {"in", opt.in},
                      {"method", opt.method},
                      {"window_radius", std::to_string(opt.window_radius)},
                      {"sigma_spatial", fmt(opt.sigma_spatial)},
                      {"sigma_range", fmt(opt.sigma_range)},
                      {"sigma_intensity", fmt(opt.sigma_intensity)},
                      {"eps_guided", fmt(opt.eps_guided)},
                      {"temporal_radius", std::to_string(opt.temporal_radius)}});
    return kExitOk;
  });
}

int run_eval(const EvalOptions& opt) {
  if (opt.inputs.empty() || opt.csv.empty()) {
    std::cerr << "error: at least one --in and --csv are required\n";
    return kExitUsage;
  }
  metrics::RoughnessParams rp;
  try {
    rp.window = opt.window;
    rp.validate();
    if (!opt.roi.empty()) rp.roi = parse_roi(opt.roi);
    rp.absolute = !opt.signed_roughness;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  return run_guarded([&] {
    metrics::MetricsReport report;
    report.method = "eval";
    {
      std::ostringstream echo;
      echo << "window=" << opt.window << ";roi=" << (opt.roi.empty() ? "central" : opt.roi)
           << ";roi_fraction=" << opt.roi_fraction << ";absolute=" << (rp.absolute ? 1 : 0)
           << ";gt_radius=" << opt.gt_radius << ";noise_sigma_mm=" << opt.noise_sigma_mm
           << ";seed=" << opt.seed;
      report.params_echo = echo.str();
    }

    std::vector<std::pair<double, double>> roughness_by_n;
    for (const std::string& input : opt.inputs) {
      const Sequence seq = io::read_sequence(input);
      const auto prov = read_provenance(input);
      std::string label = provenance_lookup(prov, "label");
      if (label.empty()) label = fs::path(input).filename().string();
      const std::string n_str = provenance_lookup(prov, "n_fused");
      const int n_fused = n_str.empty() ? 1 : std::stoi(n_str);

      metrics::RoughnessParams frame_rp = rp;
      if (frame_rp.roi.unset()) {
        frame_rp.roi = metrics::Roi::central_fraction(seq.width(), seq.height(),
                                                      opt.roi_fraction);
      }

      double gt_radius = opt.gt_radius;
      if (gt_radius <= 0.0 && seq.ground_truth && seq.ground_truth->shape == "sphere") {
        gt_radius = seq.ground_truth->radius_mm;
      }
      metrics::MlesacParams mp;
      mp.inlier_sigma = opt.noise_sigma_mm > 0.0 ? opt.noise_sigma_mm : 1.0;
      mp.seed = opt.seed;

      std::vector<OrganizedCloud> clouds;
      clouds.reserve(seq.frames.size());
      for (const SequenceFrame& f : seq.frames) clouds.push_back(f.cloud());

      std::vector<double> correctness;
      for (std::size_t t = 0; t < clouds.size(); ++t) {
        metrics::ReportRow row;
        row.kind = "frame";
        row.method = label;
        row.frame = static_cast<double>(seq.frames[t].index());
        row.n_fused = n_fused;
        row.mean_roughness_mm = mean_roughness(clouds[t], frame_rp);
        if (gt_radius > 0.0) {
          row.shape_correctness =
              metrics::shape_correctness(clouds[t], frame_rp.roi, gt_radius, mp, opt.threads);
          correctness.push_back(*row.shape_correctness);
        }
        report.rows.push_back(std::move(row));
      }

      const auto [mean, stddev] = metrics::sequence_roughness(clouds, frame_rp);
      metrics::ReportRow summary;
      summary.kind = "summary";
      summary.method = label;
      summary.n_fused = n_fused;
      summary.mean_roughness_mm = mean;
      summary.roughness_std_mm = stddev;
      if (!correctness.empty()) {
        double c = 0.0;
        for (double v : correctness) c += v;
        summary.shape_correctness = c / static_cast<double>(correctness.size());
      }
      report.rows.push_back(std::move(summary));
      if (std::isfinite(mean)) roughness_by_n.emplace_back(n_fused, mean);
    }

    std::vector<double> distinct;
    for (const auto& [n, r] : roughness_by_n) distinct.push_back(n);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() >= 3) {
      const metrics::DecayFit fit = metrics::fit_noise_decay(roughness_by_n);
      metrics::ReportRow row;
      row.kind = "decay_fit";
      row.method = "eval";
      row.delta_s_mm = fit.delta_s;
      row.delta_t_mm = fit.delta_t;
      row.r_squared = fit.r_squared;
      report.rows.push_back(std::move(row));
    }

    io::write_report(report, opt.csv);
    return kExitOk;
  });
}

}  // namespace fuse4d::cli
