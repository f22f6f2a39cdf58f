#include "fuse4d/baselines.hpp"

#include "fuse4d/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace fuse4d::baselines {

Kind kind_from_string(const std::string& name) {
  if (name == "gaussian") return Kind::kGaussian;
  if (name == "bilateral") return Kind::kBilateral;
  if (name == "joint_bilateral") return Kind::kJointBilateral;
  if (name == "guided") return Kind::kGuided;
  if (name == "temporal_average") return Kind::kTemporalAverage;
  if (name == "st_median") return Kind::kSTMedian;
  throw InvalidInput("unknown baseline method: " + name);
}

std::string to_string(Kind kind) {
  switch (kind) {
    case Kind::kGaussian: return "gaussian";
    case Kind::kBilateral: return "bilateral";
    case Kind::kJointBilateral: return "joint_bilateral";
    case Kind::kGuided: return "guided";
    case Kind::kTemporalAverage: return "temporal_average";
    case Kind::kSTMedian: return "st_median";
  }
  throw InvalidInput("unknown baseline kind");
}

void BaselineMethod::validate() const {
  if (window_radius < 1) throw InvalidInput("BaselineMethod: window_radius must be >= 1");
  switch (kind) {
    case Kind::kGaussian:
      if (sigma_spatial <= 0.0) throw InvalidInput("BaselineMethod: sigma_spatial must be > 0");
      break;
    case Kind::kBilateral:
      if (sigma_spatial <= 0.0 || sigma_range <= 0.0) {
        throw InvalidInput("BaselineMethod: sigma_spatial and sigma_range must be > 0");
      }
      break;
    case Kind::kJointBilateral:
      if (sigma_spatial <= 0.0 || sigma_intensity <= 0.0) {
        throw InvalidInput("BaselineMethod: sigma_spatial and sigma_intensity must be > 0");
      }
      break;
    case Kind::kGuided:
      if (eps_guided <= 0.0) throw InvalidInput("BaselineMethod: eps_guided must be > 0");
      break;
    case Kind::kTemporalAverage:
    case Kind::kSTMedian:
      if (temporal_radius < 1) throw InvalidInput("BaselineMethod: temporal_radius must be >= 1");
      break;
  }
}

namespace {

// Spatially weighted window mean with an optional per-sample range weight.
template <typename RangeWeight>
DepthFrame windowed_filter(const SequenceFrame& frame, int radius, double sigma_spatial,
                           RangeWeight range_weight, int threads) {
  const DepthFrame& depth = frame.depth();
  const int w = depth.width();
  const int h = depth.height();
  const double inv2ss2 = 1.0 / (2.0 * sigma_spatial * sigma_spatial);

  Grid<double> out(w, h, 0.0);
  Mask valid = depth.mask();
  parallel_for(0, h, threads, [&](int y) {
    for (int x = 0; x < w; ++x) {
      if (!depth.valid(x, y)) continue;
      double wsum = 0.0, vsum = 0.0;
      const int y0 = std::max(0, y - radius), y1 = std::min(h - 1, y + radius);
      const int x0 = std::max(0, x - radius), x1 = std::min(w - 1, x + radius);
      for (int ny = y0; ny <= y1; ++ny) {
        for (int nx = x0; nx <= x1; ++nx) {
          if (!depth.valid(nx, ny)) continue;
          const double dx = nx - x, dy = ny - y;
          const double wgt =
              std::exp(-(dx * dx + dy * dy) * inv2ss2) * range_weight(x, y, nx, ny);
          wsum += wgt;
          vsum += wgt * depth.at(nx, ny);
        }
      }
      out(x, y) = wsum > 0.0 ? vsum / wsum : depth.at(x, y);
    }
  });
  return {std::move(out), std::move(valid)};
}

DepthFrame guided_filter(const SequenceFrame& frame, const BaselineMethod& m, int threads) {
  const DepthFrame& depth = frame.depth();
  const IntensityFrame& guide = frame.intensity();
  const int w = depth.width();
  const int h = depth.height();
  const int r = m.window_radius;

  // Pass 1: per-window linear model q = a*I + b from masked box statistics.
  Grid<double> a(w, h, 0.0), b(w, h, 0.0);
  Mask ab_ok(w, h, 0);
  parallel_for(0, h, threads, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
      const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
      double si = 0.0, sp = 0.0, sip = 0.0, sii = 0.0;
      int n = 0;
      for (int ny = y0; ny <= y1; ++ny) {
        for (int nx = x0; nx <= x1; ++nx) {
          if (!depth.valid(nx, ny)) continue;
          const double iv = guide.at(nx, ny);
          const double pv = depth.at(nx, ny);
          si += iv;
          sp += pv;
          sip += iv * pv;
          sii += iv * iv;
          ++n;
        }
      }
      if (n == 0) continue;
      const double mi = si / n, mp = sp / n;
      const double cov = sip / n - mi * mp;
      const double var = sii / n - mi * mi;
      a(x, y) = cov / (var + m.eps_guided);
      b(x, y) = mp - a(x, y) * mi;
      ab_ok(x, y) = 1;
    }
  });

  // Pass 2: average the models over each pixel's windows.
  Grid<double> out(w, h, 0.0);
  Mask valid = depth.mask();
  parallel_for(0, h, threads, [&](int y) {
    for (int x = 0; x < w; ++x) {
      if (!depth.valid(x, y)) continue;
      const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
      const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
      double sa = 0.0, sb = 0.0;
      int n = 0;
      for (int ny = y0; ny <= y1; ++ny) {
        for (int nx = x0; nx <= x1; ++nx) {
          if (!ab_ok(nx, ny)) continue;
          sa += a(nx, ny);
          sb += b(nx, ny);
          ++n;
        }
      }
      out(x, y) = n > 0 ? (sa / n) * guide.at(x, y) + sb / n : depth.at(x, y);
    }
  });
  return {std::move(out), std::move(valid)};
}

DepthFrame temporal_average(const Sequence& seq, int t, const BaselineMethod& m, int threads) {
  const DepthFrame& center = seq.frames[t].depth();
  const int w = center.width();
  const int h = center.height();
  const int lo = std::max(0, t - m.temporal_radius);
  const int hi = std::min(static_cast<int>(seq.frames.size()) - 1, t + m.temporal_radius);

  Grid<double> out(w, h, 0.0);
  Mask valid = center.mask();
  parallel_for(0, h, threads, [&](int y) {
    for (int x = 0; x < w; ++x) {
      if (!center.valid(x, y)) continue;
      double sum = 0.0;
      int n = 0;
      for (int T = lo; T <= hi; ++T) {
        const DepthFrame& d = seq.frames[T].depth();
        if (!d.valid(x, y)) continue;
        sum += d.at(x, y);
        ++n;
      }
      out(x, y) = sum / n;
    }
  });
  return {std::move(out), std::move(valid)};
}

DepthFrame st_median(const Sequence& seq, int t, const BaselineMethod& m, int threads) {
  const DepthFrame& center = seq.frames[t].depth();
  const int w = center.width();
  const int h = center.height();
  const int r = m.window_radius;
  const int lo = std::max(0, t - m.temporal_radius);
  const int hi = std::min(static_cast<int>(seq.frames.size()) - 1, t + m.temporal_radius);

  Grid<double> out(w, h, 0.0);
  Mask valid = center.mask();
  parallel_for(0, h, threads, [&](int y) {
    std::vector<double> samples;
    for (int x = 0; x < w; ++x) {
      if (!center.valid(x, y)) continue;
      samples.clear();
      const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
      const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
      for (int T = lo; T <= hi; ++T) {
        const DepthFrame& d = seq.frames[T].depth();
        for (int ny = y0; ny <= y1; ++ny) {
          for (int nx = x0; nx <= x1; ++nx) {
            if (d.valid(nx, ny)) samples.push_back(d.at(nx, ny));
          }
        }
      }
      // Lower median keeps the output a window sample.
      const std::size_t mid = (samples.size() - 1) / 2;
      std::nth_element(samples.begin(), samples.begin() + mid, samples.end());
      out(x, y) = samples[mid];
    }
  });
  return {std::move(out), std::move(valid)};
}

}  // namespace

DepthFrame apply_baseline(const BaselineMethod& method, const Sequence& seq, int t, int threads) {
  method.validate();
  if (t < 0 || t >= static_cast<int>(seq.frames.size())) {
    throw InvalidInput("apply_baseline: frame index out of range");
  }
  const SequenceFrame& frame = seq.frames[t];
  const DepthFrame& depth = frame.depth();

  switch (method.kind) {
    case Kind::kGaussian:
      return windowed_filter(frame, method.window_radius, method.sigma_spatial,
                             [](int, int, int, int) { return 1.0; }, threads);
    case Kind::kBilateral: {
      const double inv2sr2 = 1.0 / (2.0 * method.sigma_range * method.sigma_range);
      return windowed_filter(frame, method.window_radius, method.sigma_spatial,
                             [&depth, inv2sr2](int x, int y, int nx, int ny) {
                               const double dd = depth.at(nx, ny) - depth.at(x, y);
                               return std::exp(-dd * dd * inv2sr2);
                             },
                             threads);
    }
    case Kind::kJointBilateral: {
      const IntensityFrame& guide = frame.intensity();
      const double inv2si2 = 1.0 / (2.0 * method.sigma_intensity * method.sigma_intensity);
      return windowed_filter(frame, method.window_radius, method.sigma_spatial,
                             [&guide, inv2si2](int x, int y, int nx, int ny) {
                               const double di = guide.at(nx, ny) - guide.at(x, y);
                               return std::exp(-di * di * inv2si2);
                             },
                             threads);
    }
    case Kind::kGuided:
      return guided_filter(frame, method, threads);
    case Kind::kTemporalAverage:
    case Kind::kSTMedian: {
      const int lo = std::max(0, t - method.temporal_radius);
      const int hi = std::min(static_cast<int>(seq.frames.size()) - 1, t + method.temporal_radius);
      if (lo == t && hi == t) {
        throw InvalidInput("apply_baseline: temporal method needs neighbors within the radius");
      }
      return method.kind == Kind::kTemporalAverage ? temporal_average(seq, t, method, threads)
                                                   : st_median(seq, t, method, threads);
    }
  }
  throw InvalidInput("apply_baseline: unknown kind");
}

}  // namespace fuse4d::baselines
