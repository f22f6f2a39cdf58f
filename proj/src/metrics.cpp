#include "fuse4d/metrics.hpp"

#include "fuse4d/geometry.hpp"
#include "fuse4d/parallel.hpp"
#include "fuse4d/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace fuse4d::metrics {

std::optional<double> local_roughness(const OrganizedCloud& cloud, int x, int y,
                                      const RoughnessParams& params) {
  params.validate();
  if (!cloud.points().in_bounds(x, y)) throw InvalidInput("local_roughness: pixel out of bounds");
  if (!cloud.valid(x, y)) return std::nullopt;

  const int r = params.window / 2;
  std::vector<Vec3> neighbors;
  neighbors.reserve(static_cast<std::size_t>(params.window) * params.window);
  for (int oy = -r; oy <= r; ++oy) {
    for (int ox = -r; ox <= r; ++ox) {
      if (ox == 0 && oy == 0) continue;
      const int nx = x + ox, ny = y + oy;
      if (cloud.points().in_bounds(nx, ny) && cloud.valid(nx, ny)) {
        neighbors.push_back(cloud.at(nx, ny));
      }
    }
  }
  if (neighbors.size() < 4) return std::nullopt;

  const auto fit = fit_plane(neighbors);
  if (!fit) return std::nullopt;
  // Orient the normal toward the camera (origin, looking down +z).
  Vec3 n = fit->normal;
  if (n.z() > 0.0) n = -n;

  const Vec3& p = cloud.at(x, y);
  double pi = 0.0;
  for (const Vec3& q : neighbors) pi += (p - q).dot(n);
  return pi;
}

double mean_roughness(const OrganizedCloud& cloud, const RoughnessParams& params) {
  params.validate();
  Roi roi = params.roi;
  if (roi.unset()) roi = Roi::central_fraction(cloud.width(), cloud.height());
  if (roi.x0 < 0 || roi.y0 < 0 || roi.x1 > cloud.width() || roi.y1 > cloud.height() ||
      roi.empty()) {
    throw InvalidInput("mean_roughness: ROI empty or outside the frame");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = roi.y0; y < roi.y1; ++y) {
    for (int x = roi.x0; x < roi.x1; ++x) {
      const auto pi = local_roughness(cloud, x, y, params);
      if (!pi) continue;
      sum += params.absolute ? std::abs(*pi) : *pi;
      ++count;
    }
  }
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  return sum / static_cast<double>(count);
}

std::pair<double, double> sequence_roughness(const std::vector<OrganizedCloud>& clouds,
                                             const RoughnessParams& params) {
  if (clouds.empty()) throw InvalidInput("sequence_roughness: empty sequence");
  std::vector<double> means;
  means.reserve(clouds.size());
  for (const OrganizedCloud& c : clouds) {
    const double m = mean_roughness(c, params);
    if (std::isfinite(m)) means.push_back(m);
  }
  if (means.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan};
  }
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= static_cast<double>(means.size());
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  var /= static_cast<double>(means.size());
  return {mean, std::sqrt(var)};
}

namespace {

struct Hypothesis {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  double score = std::numeric_limits<double>::infinity();
  bool valid = false;
};

// Sphere through 4 points: |p|^2 = 2 p.c + (r^2 - |c|^2) is linear in
// (c, r^2 - |c|^2).
bool solve_minimal_sphere(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d,
                          Vec3& center, double& radius) {
  Eigen::Matrix4d m;
  Eigen::Vector4d rhs;
  const Vec3* pts[4] = {&a, &b, &c, &d};
  for (int i = 0; i < 4; ++i) {
    m.row(i) << 2.0 * pts[i]->x(), 2.0 * pts[i]->y(), 2.0 * pts[i]->z(), 1.0;
    rhs[i] = pts[i]->squaredNorm();
  }
  Eigen::FullPivLU<Eigen::Matrix4d> lu(m);
  if (!lu.isInvertible()) return false;
  const Eigen::Vector4d sol = lu.solve(rhs);
  center = sol.head<3>();
  const double r2 = sol[3] + center.squaredNorm();
  if (!(r2 > 0.0) || !std::isfinite(r2)) return false;
  radius = std::sqrt(r2);
  return std::isfinite(radius);
}

// Mixture NLL with the mixing weight gamma estimated by a short EM.
double mlesac_score(const std::vector<Vec3>& points, const Vec3& center, double radius,
                    double sigma, double extent) {
  const double inv_sqrt2pi = 0.3989422804014326779399460599344;
  const double gauss_norm = inv_sqrt2pi / sigma;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double uniform_density = 1.0 / extent;

  std::vector<double> gauss(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double e = (points[i] - center).norm() - radius;
    gauss[i] = gauss_norm * std::exp(-e * e * inv2s2);
  }
  double gamma = 0.5;
  for (int it = 0; it < 5; ++it) {
    double wsum = 0.0;
    for (double g : gauss) {
      const double num = gamma * g;
      wsum += num / (num + (1.0 - gamma) * uniform_density);
    }
    gamma = wsum / static_cast<double>(points.size());
    gamma = std::clamp(gamma, 1e-6, 1.0 - 1e-6);
  }
  double nll = 0.0;
  for (double g : gauss) {
    nll -= std::log(gamma * g + (1.0 - gamma) * uniform_density + 1e-300);
  }
  return nll;
}

// Algebraic least squares followed by Gauss-Newton on geometric residuals.
bool refine_sphere(const std::vector<Vec3>& points, const std::vector<std::uint32_t>& inliers,
                   int gn_iterations, Vec3& center, double& radius) {
  if (inliers.size() < 4) return false;
  Eigen::MatrixXd m(inliers.size(), 4);
  Eigen::VectorXd rhs(inliers.size());
  for (std::size_t i = 0; i < inliers.size(); ++i) {
    const Vec3& p = points[inliers[i]];
    m.row(static_cast<Eigen::Index>(i)) << 2.0 * p.x(), 2.0 * p.y(), 2.0 * p.z(), 1.0;
    rhs[static_cast<Eigen::Index>(i)] = p.squaredNorm();
  }
  const Eigen::Vector4d sol = (m.transpose() * m).ldlt().solve(m.transpose() * rhs);
  Vec3 c = sol.head<3>();
  const double r2 = sol[3] + c.squaredNorm();
  if (!(r2 > 0.0) || !std::isfinite(r2)) return false;
  double r = std::sqrt(r2);

  for (int it = 0; it < gn_iterations; ++it) {
    Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
    Eigen::Vector4d jtr = Eigen::Vector4d::Zero();
    for (const std::uint32_t idx : inliers) {
      const Vec3 d = points[idx] - c;
      const double len = d.norm();
      if (len < 1e-12) continue;
      Eigen::Vector4d j;
      j << -d.x() / len, -d.y() / len, -d.z() / len, -1.0;
      const double res = len - r;
      jtj += j * j.transpose();
      jtr += j * res;
    }
    const Eigen::Vector4d step = jtj.ldlt().solve(-jtr);
    if (!step.allFinite()) break;
    c += step.head<3>();
    r += step[3];
    if (!(r > 0.0)) return false;
  }
  center = c;
  radius = r;
  return std::isfinite(radius);
}

}  // namespace

SphereFit mlesac_sphere(const std::vector<Vec3>& points, const MlesacParams& params,
                        int threads) {
  params.validate();
  if (points.size() < 4) throw InvalidInput("mlesac_sphere: needs at least 4 points");
  const auto n = static_cast<int>(points.size());

  std::vector<Hypothesis> hyps(params.iterations);
  parallel_for(0, params.iterations, threads, [&](int i) {
    Rng rng(substream_seed(params.seed, static_cast<std::uint64_t>(i), 0xF17));
    int idx[4];
    for (int attempt = 0; attempt < 16; ++attempt) {
      for (int s = 0; s < 4; ++s) {
        for (;;) {
          const int cand = rng.uniform_int(0, n - 1);
          bool dup = false;
          for (int q = 0; q < s; ++q) dup |= idx[q] == cand;
          if (!dup) {
            idx[s] = cand;
            break;
          }
        }
      }
      Vec3 center;
      double radius;
      if (!solve_minimal_sphere(points[idx[0]], points[idx[1]], points[idx[2]], points[idx[3]],
                                center, radius)) {
        continue;
      }
      Hypothesis h;
      h.center = center;
      h.radius = radius;
      h.score = mlesac_score(points, center, radius, params.inlier_sigma, params.outlier_extent);
      h.valid = std::isfinite(h.score);
      if (h.valid) {
        hyps[i] = h;
        return;
      }
    }
  });

  int best = -1;
  for (int i = 0; i < params.iterations; ++i) {
    if (!hyps[i].valid) continue;
    if (best < 0 || hyps[i].score < hyps[best].score) best = i;
  }
  if (best < 0) throw FitFailure("mlesac_sphere: no valid hypothesis");

  // Posterior-0.5 inlier selection under the winning model.
  const Hypothesis& win = hyps[best];
  const double inv_sqrt2pi = 0.3989422804014326779399460599344;
  const double gauss_norm = inv_sqrt2pi / params.inlier_sigma;
  const double inv2s2 = 1.0 / (2.0 * params.inlier_sigma * params.inlier_sigma);
  const double uniform_density = 1.0 / params.outlier_extent;
  std::vector<std::uint32_t> inliers;
  inliers.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double e = (points[i] - win.center).norm() - win.radius;
    const double g = gauss_norm * std::exp(-e * e * inv2s2);
    if (g >= uniform_density) inliers.push_back(static_cast<std::uint32_t>(i));
  }

  SphereFit fit;
  fit.center = win.center;
  fit.radius = win.radius;
  fit.score = win.score;
  fit.inlier_count = inliers.size();
  if (inliers.size() >= 10) {
    Vec3 c = win.center;
    double r = win.radius;
    if (refine_sphere(points, inliers, params.refine_iterations, c, r)) {
      fit.center = c;
      fit.radius = r;
    }
  }
  return fit;
}

double shape_correctness(const OrganizedCloud& cloud, const Roi& roi, double gt_radius,
                         const MlesacParams& params, int threads) {
  if (gt_radius <= 0.0) throw InvalidInput("shape_correctness: gt_radius must be > 0");
  Roi region = roi;
  if (region.unset()) region = Roi::central_fraction(cloud.width(), cloud.height());
  std::vector<Vec3> points;
  for (int y = std::max(0, region.y0); y < std::min(cloud.height(), region.y1); ++y) {
    for (int x = std::max(0, region.x0); x < std::min(cloud.width(), region.x1); ++x) {
      if (cloud.valid(x, y)) points.push_back(cloud.at(x, y));
    }
  }
  if (points.size() < 100) {
    throw InvalidInput("shape_correctness: fewer than 100 valid ROI points");
  }
  const SphereFit fit = mlesac_sphere(points, params, threads);
  return 1.0 - std::abs(fit.radius - gt_radius) / gt_radius;
}

DecayFit fit_noise_decay(const std::vector<std::pair<double, double>>& roughness_by_n) {
  std::vector<double> xs, ys;
  for (const auto& [n, rough] : roughness_by_n) {
    if (n <= 0.0) throw InvalidInput("fit_noise_decay: n must be positive");
    xs.push_back(1.0 / n);
    ys.push_back(rough * rough);
  }
  std::vector<double> distinct = xs;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) throw InvalidInput("fit_noise_decay: needs >= 3 distinct n values");

  const auto m = static_cast<double>(xs.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double denom = m * sxx - sx * sx;
  const double slope = (m * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / m;

  double ss_res = 0.0, ss_tot = 0.0;
  const double ymean = sy / m;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double pred = intercept + slope * xs[i];
    ss_res += (ys[i] - pred) * (ys[i] - pred);
    ss_tot += (ys[i] - ymean) * (ys[i] - ymean);
  }

  DecayFit fit;
  fit.clamped = slope < 0.0 || intercept < 0.0;
  fit.delta_s = std::sqrt(std::max(0.0, intercept));
  fit.delta_t = std::sqrt(std::max(0.0, slope));
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

EpeStats flow_epe(const flow::Flow2D& estimated, const flow::Flow2D& ground_truth,
                  const Mask* mask) {
  if (estimated.width() != ground_truth.width() || estimated.height() != ground_truth.height()) {
    throw InvalidInput("flow_epe: size mismatch");
  }
  if (mask && !ground_truth.mask().same_shape(*mask)) {
    throw InvalidInput("flow_epe: mask size mismatch");
  }
  std::vector<double> errors;
  for (int y = 0; y < estimated.height(); ++y) {
    for (int x = 0; x < estimated.width(); ++x) {
      if (mask && !(*mask)(x, y)) continue;
      if (!estimated.valid(x, y) || !ground_truth.valid(x, y)) continue;
      const flow::Disp a = estimated.at(x, y);
      const flow::Disp b = ground_truth.at(x, y);
      const double dx = a.x - b.x, dy = a.y - b.y;
      errors.push_back(std::sqrt(dx * dx + dy * dy));
    }
  }
  if (errors.empty()) throw InvalidInput("flow_epe: no jointly valid pixels");

  EpeStats stats;
  for (double e : errors) stats.mean += e;
  stats.mean /= static_cast<double>(errors.size());
  std::sort(errors.begin(), errors.end());
  const std::size_t n = errors.size();
  stats.median = n % 2 == 1 ? errors[n / 2] : 0.5 * (errors[n / 2 - 1] + errors[n / 2]);
  return stats;
}

}  // namespace fuse4d::metrics
