#include "fuse4d/flow.hpp"

#include "fuse4d/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fuse4d::flow {

namespace {

constexpr float kBigCost = 1e30f;

// Label bookkeeping: index l = (sy + r) * side + (sx + r).
struct LabelSpace {
  int radius;
  int side;
  int count;

  explicit LabelSpace(int r) : radius(r), side(2 * r + 1), count(side * side) {}

  Disp disp(int l) const {
    return {static_cast<std::int16_t>(l % side - radius),
            static_cast<std::int16_t>(l / side - radius)};
  }
  int index(Disp s) const { return (s.y + radius) * side + (s.x + radius); }
};

// Unary cost table for all pixels and labels, computed per label with
// summed-area tables over the shifted squared-difference image. Sums are
// accumulated in double; stored cost is float (the exact double path is
// flow_energy, used for all accept/reject decisions).
std::vector<float> build_unary_table(const IntensityFrame& src, const IntensityFrame& dst,
                                     const FlowParams& params, const LabelSpace& labels,
                                     int threads) {
  const int w = src.width();
  const int h = src.height();
  const int pr = params.patch_radius;
  std::vector<float> table(static_cast<std::size_t>(w) * h * labels.count);

  parallel_for(0, labels.count, threads, [&](int l) {
    const Disp s = labels.disp(l);
    const std::size_t satw = w + 1;
    std::vector<double> sat(satw * (h + 1), 0.0);
    std::vector<std::int32_t> cnt(satw * (h + 1), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double d2 = 0.0;
        int c = 0;
        const int xt = x + s.x;
        const int yt = y + s.y;
        if (xt >= 0 && xt < w && yt >= 0 && yt < h) {
          const double e = src.at(x, y) - dst.at(xt, yt);
          d2 = e * e;
          c = 1;
        }
        sat[(y + 1) * satw + (x + 1)] =
            d2 + sat[y * satw + (x + 1)] + sat[(y + 1) * satw + x] - sat[y * satw + x];
        cnt[(y + 1) * satw + (x + 1)] =
            c + cnt[y * satw + (x + 1)] + cnt[(y + 1) * satw + x] - cnt[y * satw + x];
      }
    }
    auto window_sum = [&](const auto& t, int x0, int y0, int x1, int y1) {
      return t[(y1 + 1) * satw + (x1 + 1)] - t[y0 * satw + (x1 + 1)] - t[(y1 + 1) * satw + x0] +
             t[y0 * satw + x0];
    };
    for (int y = 0; y < h; ++y) {
      const int y0 = std::max(0, y - pr), y1 = std::min(h - 1, y + pr);
      for (int x = 0; x < w; ++x) {
        const int x0 = std::max(0, x - pr), x1 = std::min(w - 1, x + pr);
        const std::int32_t c = static_cast<std::int32_t>(window_sum(cnt, x0, y0, x1, y1));
        float cost = kBigCost;
        if (c > 0) {
          const double mean = window_sum(sat, x0, y0, x1, y1) / c;
          cost = static_cast<float>(std::min(params.unary_truncation, mean));
        }
        table[(static_cast<std::size_t>(y) * w + x) * labels.count + l] = cost;
      }
    }
  });
  return table;
}

// 1D lower envelope of f(p) = min_q g[q] + w (p - q)^2 over integer grid
// positions (Felzenszwalb-Huttenlocher). w > 0.
void dt1d(const double* g, double* out, int n, double w, int* v, double* z) {
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s;
    for (;;) {
      const int p = v[k];
      s = ((g[q] + w * q * q) - (g[p] + w * p * p)) / (2.0 * w * (q - p));
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int p = 0; p < n; ++p) {
    while (z[k + 1] < p) ++k;
    const double d = p - v[k];
    out[p] = w * d * d + g[v[k]];
  }
}

// Min-sum message for the truncated quadratic pairwise term:
// m(s) = min_u h(u) + lambda * min(tau2, |s - u|^2), normalized to min 0.
// The quadratic branch separates over the two label axes.
struct MessageScratch {
  std::vector<double> h, rowpass, colin, colout;
  std::vector<int> v;
  std::vector<double> z;

  explicit MessageScratch(const LabelSpace& labels)
      : h(labels.count),
        rowpass(labels.count),
        colin(labels.side),
        colout(labels.side),
        v(labels.side),
        z(labels.side + 1) {}
};

void compute_message(const double* h, float* out, const LabelSpace& labels, double lambda,
                     double tau2, MessageScratch& ms) {
  const int side = labels.side;
  double hmin = h[0];
  for (int l = 1; l < labels.count; ++l) hmin = std::min(hmin, h[l]);

  if (lambda == 0.0) {
    std::fill(out, out + labels.count, 0.0f);
    return;
  }
  for (int r = 0; r < side; ++r) {
    dt1d(h + r * side, ms.rowpass.data() + r * side, side, lambda, ms.v.data(), ms.z.data());
  }
  const double cap = hmin + lambda * tau2;
  for (int c = 0; c < side; ++c) {
    for (int r = 0; r < side; ++r) ms.colin[r] = ms.rowpass[r * side + c];
    dt1d(ms.colin.data(), ms.colout.data(), side, lambda, ms.v.data(), ms.z.data());
    for (int r = 0; r < side; ++r) ms.h[r * side + c] = std::min(ms.colout[r], cap);
  }
  double mmin = ms.h[0];
  for (int l = 1; l < labels.count; ++l) mmin = std::min(mmin, ms.h[l]);
  for (int l = 0; l < labels.count; ++l) out[l] = static_cast<float>(ms.h[l] - mmin);
}

enum Dir { kFromLeft = 0, kFromRight = 1, kFromAbove = 2, kFromBelow = 3 };

struct BpState {
  int w, h;
  LabelSpace labels;
  std::vector<float> unary;
  std::vector<float> msg[4];

  BpState(int w_, int h_, const LabelSpace& ls) : w(w_), h(h_), labels(ls) {
    for (auto& m : msg) m.assign(static_cast<std::size_t>(w) * h * ls.count, 0.0f);
  }

  std::size_t base(int x, int y) const {
    return (static_cast<std::size_t>(y) * w + x) * labels.count;
  }

  // h = unary + all incoming messages except the one from `exclude`.
  void gather(int x, int y, Dir exclude, double* out) const {
    const std::size_t b = base(x, y);
    for (int l = 0; l < labels.count; ++l) out[l] = unary[b + l];
    for (int d = 0; d < 4; ++d) {
      if (d == exclude) continue;
      const float* m = msg[d].data() + b;
      for (int l = 0; l < labels.count; ++l) out[l] += m[l];
    }
  }
};

Grid<Disp> decode(const BpState& bp) {
  Grid<Disp> labeling(bp.w, bp.h);
  for (int y = 0; y < bp.h; ++y) {
    for (int x = 0; x < bp.w; ++x) {
      const std::size_t b = bp.base(x, y);
      double best = std::numeric_limits<double>::infinity();
      Disp best_s{0, 0};
      int best_norm = std::numeric_limits<int>::max();
      for (int l = 0; l < bp.labels.count; ++l) {
        double v = bp.unary[b + l];
        for (int d = 0; d < 4; ++d) v += bp.msg[d][b + l];
        const Disp s = bp.labels.disp(l);
        const int n2 = s.x * s.x + s.y * s.y;
        // Ties broken by smaller |s|^2, then lexicographic (sx, sy).
        const bool better =
            v < best || (v == best && (n2 < best_norm ||
                                       (n2 == best_norm && (s.x < best_s.x ||
                                                            (s.x == best_s.x && s.y < best_s.y)))));
        if (better) {
          best = v;
          best_s = s;
          best_norm = n2;
        }
      }
      labeling(x, y) = best_s;
    }
  }
  return labeling;
}

}  // namespace

double unary_cost(const IntensityFrame& src, const IntensityFrame& dst, int x, int y, int sx,
                  int sy, const FlowParams& params) {
  params.validate();
  if (!src.values().in_bounds(x, y)) throw InvalidInput("unary_cost: pixel out of bounds");
  const int pr = params.patch_radius;
  double sum = 0.0;
  int count = 0;
  for (int oy = -pr; oy <= pr; ++oy) {
    for (int ox = -pr; ox <= pr; ++ox) {
      const int xs = x + ox, ys = y + oy;
      if (!src.values().in_bounds(xs, ys)) continue;
      const int xt = xs + sx, yt = ys + sy;
      if (!dst.values().in_bounds(xt, yt)) continue;
      const double e = src.at(xs, ys) - dst.at(xt, yt);
      sum += e * e;
      ++count;
    }
  }
  if (count == 0) return std::numeric_limits<double>::infinity();
  return std::min(params.unary_truncation, sum / count);
}

double pairwise_cost(Disp a, Disp b, const FlowParams& params) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return params.smoothness_weight * std::min(params.pairwise_truncation, dx * dx + dy * dy);
}

double flow_energy(const IntensityFrame& src, const IntensityFrame& dst, const Flow2D& labeling,
                   const FlowParams& params) {
  if (labeling.width() != src.width() || labeling.height() != src.height()) {
    throw InvalidInput("flow_energy: labeling/frame shape mismatch");
  }
  double e = 0.0;
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      const Disp s = labeling.at(x, y);
      e += unary_cost(src, dst, x, y, s.x, s.y, params);
      if (x + 1 < src.width()) e += pairwise_cost(s, labeling.at(x + 1, y), params);
      if (y + 1 < src.height()) e += pairwise_cost(s, labeling.at(x, y + 1), params);
    }
  }
  return e;
}

Flow2D estimate_flow(const IntensityFrame& src, const IntensityFrame& dst,
                     const FlowParams& params, int source_index, int target_index, int threads,
                     EstimateTrace* trace) {
  params.validate();
  if (src.width() != dst.width() || src.height() != dst.height()) {
    throw InvalidInput("estimate_flow: frame size mismatch");
  }
  const int w = src.width();
  const int h = src.height();
  const LabelSpace labels(params.search_radius);
  const double lambda = params.smoothness_weight;
  const double tau2 = params.pairwise_truncation;

  BpState bp(w, h, labels);
  bp.unary = build_unary_table(src, dst, params, labels, threads);

  Grid<Disp> current(w, h, Disp{0, 0});
  auto energy_of = [&](const Grid<Disp>& g) {
    return flow_energy(src, dst, Flow2D(g, Mask(w, h, 1), source_index, target_index), params);
  };
  double current_energy = energy_of(current);
  if (trace) trace->sweep_energies.push_back(current_energy);

  auto run_sweep = [&](int sweep) {
    switch (sweep) {
      case 0:  // left-to-right: each row independent
        parallel_for(0, h, threads, [&](int y) {
          MessageScratch ms(labels);
          for (int x = 1; x < w; ++x) {
            bp.gather(x - 1, y, kFromRight, ms.h.data());
            compute_message(ms.h.data(), bp.msg[kFromLeft].data() + bp.base(x, y), labels, lambda,
                            tau2, ms);
          }
        });
        break;
      case 1:  // right-to-left
        parallel_for(0, h, threads, [&](int y) {
          MessageScratch ms(labels);
          for (int x = w - 2; x >= 0; --x) {
            bp.gather(x + 1, y, kFromLeft, ms.h.data());
            compute_message(ms.h.data(), bp.msg[kFromRight].data() + bp.base(x, y), labels, lambda,
                            tau2, ms);
          }
        });
        break;
      case 2:  // top-to-bottom: each column independent
        parallel_for(0, w, threads, [&](int x) {
          MessageScratch ms(labels);
          for (int y = 1; y < h; ++y) {
            bp.gather(x, y - 1, kFromBelow, ms.h.data());
            compute_message(ms.h.data(), bp.msg[kFromAbove].data() + bp.base(x, y), labels, lambda,
                            tau2, ms);
          }
        });
        break;
      default:  // bottom-to-top
        parallel_for(0, w, threads, [&](int x) {
          MessageScratch ms(labels);
          for (int y = h - 2; y >= 0; --y) {
            bp.gather(x, y + 1, kFromAbove, ms.h.data());
            compute_message(ms.h.data(), bp.msg[kFromBelow].data() + bp.base(x, y), labels, lambda,
                            tau2, ms);
          }
        });
        break;
    }
  };

  for (int it = 0; it < params.iterations; ++it) {
    for (int sweep = 0; sweep < 4; ++sweep) {
      run_sweep(sweep);
      Grid<Disp> candidate = decode(bp);
      const double cand_energy = energy_of(candidate);
      if (cand_energy < current_energy) {
        current = std::move(candidate);
        current_energy = cand_energy;
      }
      if (trace) trace->sweep_energies.push_back(current_energy);
    }
  }

  return Flow2D(std::move(current), Mask(w, h, 1), source_index, target_index);
}

}  // namespace fuse4d::flow
