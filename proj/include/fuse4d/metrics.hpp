#pragma once

#include "fuse4d/flow.hpp"
#include "fuse4d/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fuse4d::metrics {

/// Half-open pixel rectangle [x0, x1) x [y0, y1). A default-constructed
/// (all-zero) Roi means "unset" and resolves to the central band.
struct Roi {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool empty() const { return x1 <= x0 || y1 <= y0; }
  bool unset() const { return x0 == 0 && y0 == 0 && x1 == 0 && y1 == 0; }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }

  /// Central band covering `fraction` of each axis (fraction 0.47 on a
  /// 600 px frame is the pixel range 159..440).
  static Roi central_fraction(int width, int height, double fraction = 0.47) {
    const int mx = static_cast<int>(width * (1.0 - fraction) / 2.0);
    const int my = static_cast<int>(height * (1.0 - fraction) / 2.0);
    return {mx, my, width - mx, height - my};
  }
};

struct RoughnessParams {
  int window = 7;        // n x n neighborhood, odd
  Roi roi;               // empty = central 47% of the frame
  bool absolute = true;  // average |Pi| rather than signed Pi

  void validate() const {
    if (window < 3 || window % 2 == 0) {
      throw InvalidInput("RoughnessParams: window must be odd and >= 3");
    }
  }
};

/// Local roughness of pixel (x, y): signed distances of the point to the
/// total-least-squares plane of its valid window neighbors, summed along the
/// camera-facing unit normal. Returns nullopt when the pixel is invalid,
/// fewer than 4 valid neighbors exist, or the fit is degenerate.
std::optional<double> local_roughness(const OrganizedCloud& cloud, int x, int y,
                                      const RoughnessParams& params);

/// Mean |Pi| (or signed Pi) over the ROI; ill-posed pixels are skipped.
/// Returns NaN when no ROI pixel yields a value. Throws on an empty ROI.
double mean_roughness(const OrganizedCloud& cloud, const RoughnessParams& params);

/// Per-frame means plus their (population) standard deviation across frames.
std::pair<double, double> sequence_roughness(const std::vector<OrganizedCloud>& clouds,
                                             const RoughnessParams& params);

struct MlesacParams {
  int iterations = 500;
  double inlier_sigma = 1.0;      // mm
  double outlier_extent = 20.0;   // uniform outlier residual window, mm
  std::uint64_t seed = 1;
  int refine_iterations = 3;

  void validate() const {
    if (iterations < 1 || inlier_sigma <= 0.0 || outlier_extent <= 0.0 || refine_iterations < 0) {
      throw InvalidInput("MlesacParams: out-of-range parameter");
    }
  }
};

struct SphereFit {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  double score = 0.0;        // negative log-likelihood of the winning model
  std::size_t inlier_count = 0;
};

/// MLESAC sphere fit: random minimal 4-point hypotheses scored by the
/// Gaussian-inlier / uniform-outlier mixture NLL (mixing weight estimated by
/// EM per hypothesis), followed by least-squares refinement on the inlier
/// set. Deterministic for a fixed seed, independent of `threads`.
SphereFit mlesac_sphere(const std::vector<Vec3>& points, const MlesacParams& params,
                        int threads = 1);

/// Shape correctness C = 1 - |r - gt_radius| / gt_radius with r from the
/// MLESAC fit over the valid ROI points (at least 100 required).
double shape_correctness(const OrganizedCloud& cloud, const Roi& roi, double gt_radius,
                         const MlesacParams& params, int threads = 1);

struct DecayFit {
  double delta_s = 0.0;    // structural noise std, mm
  double delta_t = 0.0;    // time-varying noise std, mm
  double r_squared = 0.0;  // of the linear fit of R(n)^2 against 1/n
  bool clamped = false;    // a negative variance estimate was clamped to 0
};

/// Fits mean roughness R(n) to sqrt(delta_s^2 + delta_t^2 / n) by linear
/// least squares of R^2 on 1/n. Needs at least 3 distinct n values.
DecayFit fit_noise_decay(const std::vector<std::pair<double, double>>& roughness_by_n);

struct EpeStats {
  double mean = 0.0;
  double median = 0.0;
};

/// Euclidean endpoint error against a ground-truth flow, over pixels valid
/// in both fields (and in `mask`, when given).
EpeStats flow_epe(const flow::Flow2D& estimated, const flow::Flow2D& ground_truth,
                  const Mask* mask = nullptr);

/// One output row of an evaluation or sweep. Unset fields stay nullopt and
/// serialize as empty cells; a present NaN marks a metric that failed to
/// evaluate and serializes as the literal "nan".
struct ReportRow {
  std::string kind;  // "frame" | "summary" | "decay_fit" | "sweep"
  std::string method;
  std::optional<double> frame;
  std::optional<double> n_fused;
  std::optional<double> noise_depth_mm;
  std::optional<double> noise_intensity;
  std::optional<double> sweep;
  std::optional<double> mean_roughness_mm;
  std::optional<double> roughness_std_mm;
  std::optional<double> shape_correctness;
  std::optional<double> delta_s_mm;
  std::optional<double> delta_t_mm;
  std::optional<double> r_squared;
};

/// Evaluation results: per-frame and per-sequence roughness and shape
/// correctness plus optional decay-fit rows, with the producing method label
/// and a parameter echo for reproducibility.
struct MetricsReport {
  std::string method;
  std::string params_echo;  // "key=value;..." of every effective parameter
  std::vector<ReportRow> rows;
};

}  // namespace fuse4d::metrics
