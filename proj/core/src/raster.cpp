// SPDX-License-Identifier: Apache-2.0
#include "styledraw/raster.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace styledraw {

namespace {

constexpr int kSamplesPerSegment = 32;
constexpr double kEdgeBand = 1.0;
constexpr double kSoftminWidth = 0.35;

// C2 quintic coverage ramp. Together with the soft minimum below it keeps
// rendered pixels free of derivative jumps, which FD audits punish.
double coverage_ramp(double t) { return t * t * t * (t * (6.0 * t - 15.0) + 10.0); }
double coverage_ramp_deriv(double t) {
  const double u = t * (1.0 - t);
  return 30.0 * u * u;
}

struct Hit {
  int px, py;
  double cov, dsoft;
  std::array<double, 3> under;
};

struct StrokeTrace {
  std::vector<Vec2> poly;
  std::vector<Hit> hits;
};

// Flattens the Bezier chain into pixel-space samples, endpoints inclusive.
std::vector<Vec2> sample_polyline(const StrokePath& s, int W, int H) {
  const int segs = s.segment_count();
  const int total = segs * kSamplesPerSegment;
  std::vector<Vec2> poly;
  poly.reserve(static_cast<std::size_t>(total) + 1);
  for (int j = 0; j <= total; ++j) {
    const int m = std::min(j / kSamplesPerSegment, segs - 1);
    const double t = static_cast<double>(j - m * kSamplesPerSegment) / kSamplesPerSegment;
    const auto B = bernstein3(t);
    Vec2 p;
    for (int r = 0; r < 4; ++r)
      p += s.control_points[static_cast<std::size_t>(3 * m + r)] * B[r];
    poly.push_back({p.x * W, p.y * H});
  }
  return poly;
}

double segment_distance(const Vec2& a, const Vec2& b, const Vec2& q, double* tstar) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  const double t = len2 > 1e-24 ? clamp(dot(q - a, ab) / len2, 0.0, 1.0) : 0.0;
  const Vec2 diff = q - (a + ab * t);
  *tstar = t;
  return std::sqrt(dot(diff, diff));
}

// Smooth minimum of the per-segment distances. A hard min has derivative
// jumps wherever two branches of the curve tie for nearest; the exp-weighted
// blend removes them at the price of a slight coverage inflation (bounded by
// kSoftminWidth * log(segment count)), absorbed into the visual width.
double softmin_distance(const std::vector<Vec2>& poly, const Vec2& q) {
  double dmin = 1e300;
  for (std::size_t k = 0; k + 1 < poly.size(); ++k) {
    double t;
    dmin = std::min(dmin, segment_distance(poly[k], poly[k + 1], q, &t));
  }
  double wsum = 0.0;
  for (std::size_t k = 0; k + 1 < poly.size(); ++k) {
    double t;
    const double d = segment_distance(poly[k], poly[k + 1], q, &t);
    wsum += std::exp((dmin - d) / kSoftminWidth);
  }
  return dmin - kSoftminWidth * std::log(wsum);
}

void composite_stroke(const StrokePath& s, int W, int H, Tensor& img, StrokeTrace* trace) {
  const std::vector<Vec2> poly = sample_polyline(s, W, H);
  if (trace) trace->poly = poly;

  double minx = 1e300, miny = 1e300, maxx = -1e300, maxy = -1e300;
  for (const auto& p : poly) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  const double slack = kSoftminWidth * std::log(static_cast<double>(poly.size()) + 1.0);
  const double reach = s.width / 2.0 + kEdgeBand / 2.0 + slack + 1.0;
  const int x0 = std::max(0, static_cast<int>(std::floor(minx - reach)));
  const int x1 = std::min(W - 1, static_cast<int>(std::ceil(maxx + reach)));
  const int y0 = std::max(0, static_cast<int>(std::floor(miny - reach)));
  const int y1 = std::min(H - 1, static_cast<int>(std::ceil(maxy + reach)));

  for (int py = y0; py <= y1; ++py)
    for (int px = x0; px <= x1; ++px) {
      const Vec2 q{px + 0.5, py + 0.5};
      const double d = softmin_distance(poly, q);
      const double u = (s.width / 2.0 + kEdgeBand / 2.0 - d) / kEdgeBand;
      if (u <= 0.0) continue;
      const double cov = coverage_ramp(std::min(u, 1.0));
      const double alpha = s.opacity * cov;
      if (trace)
        trace->hits.push_back(
            {px, py, cov, d, {img.at(py, px, 0), img.at(py, px, 1), img.at(py, px, 2)}});
      for (int ch = 0; ch < 3; ++ch)
        img.at(py, px, ch) = alpha * s.color[static_cast<std::size_t>(ch)] +
                             (1.0 - alpha) * img.at(py, px, ch);
    }
}

Tensor rasterize(const Drawing& d, std::vector<StrokeTrace>* traces) {
  const int W = d.canvas_width, H = d.canvas_height;
  Tensor img({H, W, 3});
  for (int py = 0; py < H; ++py)
    for (int px = 0; px < W; ++px)
      for (int ch = 0; ch < 3; ++ch)
        img.at(py, px, ch) = d.background_color[static_cast<std::size_t>(ch)];
  for (std::size_t i = 0; i < d.strokes.size(); ++i)
    composite_stroke(d.strokes[i], W, H, img, traces ? &(*traces)[i] : nullptr);
  return img;
}

// Routes dL/d(softmin distance) to the polyline vertices: softmax weights
// over segments, and inside each segment the clamped foot point is held
// fixed (the segment distance is C1 in its endpoints, so this is exact).
void backprop_distance(const std::vector<Vec2>& poly, const Vec2& q, double dd,
                       std::vector<Vec2>& dpoly) {
  double dmin = 1e300;
  for (std::size_t k = 0; k + 1 < poly.size(); ++k) {
    double t;
    dmin = std::min(dmin, segment_distance(poly[k], poly[k + 1], q, &t));
  }
  double wsum = 0.0;
  for (std::size_t k = 0; k + 1 < poly.size(); ++k) {
    double t;
    const double d = segment_distance(poly[k], poly[k + 1], q, &t);
    wsum += std::exp((dmin - d) / kSoftminWidth);
  }
  for (std::size_t k = 0; k + 1 < poly.size(); ++k) {
    double t;
    const double d = segment_distance(poly[k], poly[k + 1], q, &t);
    const double p = std::exp((dmin - d) / kSoftminWidth) / wsum;
    if (p < 1e-12 || d < 1e-12) continue;
    const Vec2 cl = poly[k] * (1.0 - t) + poly[k + 1] * t;
    const Vec2 uvec = (q - cl) * (1.0 / d);
    dpoly[k] += -uvec * (dd * p * (1.0 - t));
    dpoly[k + 1] += -uvec * (dd * p * t);
  }
}

}  // namespace

RasterImage render(const Drawing& d) {
  validate_drawing(d);
  return RasterImage{rasterize(d, nullptr), d.canvas_height, d.canvas_width};
}

DrawingVars make_drawing_vars(const Drawing& d) {
  DrawingVars v;
  v.canvas_width = d.canvas_width;
  v.canvas_height = d.canvas_height;
  v.background_color = d.background_color;
  for (const auto& s : d.strokes) {
    const int n = static_cast<int>(s.control_points.size());
    Tensor pts({n, 2});
    for (int j = 0; j < n; ++j) {
      pts.at(j, 0) = s.control_points[static_cast<std::size_t>(j)].x;
      pts.at(j, 1) = s.control_points[static_cast<std::size_t>(j)].y;
    }
    v.points.push_back(ad::Var::leaf(std::move(pts)));
    v.color.push_back(ad::Var::leaf(Tensor({3}, {s.color[0], s.color[1], s.color[2]})));
    v.opacity.push_back(ad::Var::leaf(Tensor({1}, {s.opacity})));
    v.width.push_back(ad::Var::leaf(Tensor({1}, {s.width})));
  }
  return v;
}

Drawing drawing_from_vars(const DrawingVars& v) {
  Drawing d;
  d.canvas_width = v.canvas_width;
  d.canvas_height = v.canvas_height;
  d.background_color = v.background_color;
  for (std::size_t i = 0; i < v.stroke_count(); ++i) {
    StrokePath s;
    const Tensor& pts = v.points[i].value();
    for (int j = 0; j < pts.dim(0); ++j)
      s.control_points.push_back({pts.at(j, 0), pts.at(j, 1)});
    const Tensor& c = v.color[i].value();
    s.color = {c[0], c[1], c[2]};
    s.opacity = v.opacity[i].value()[0];
    s.width = v.width[i].value()[0];
    d.strokes.push_back(std::move(s));
  }
  return d;
}

ad::Var render_var(const DrawingVars& v) {
  const Drawing d = drawing_from_vars(v);
  validate_drawing(d);
  const std::size_t n = d.strokes.size();
  auto traces = std::make_shared<std::vector<StrokeTrace>>(n);
  Tensor img = rasterize(d, traces.get());

  std::vector<ad::Var> parents;
  parents.reserve(4 * n);
  for (const auto& p : v.points) parents.push_back(p);
  for (const auto& p : v.color) parents.push_back(p);
  for (const auto& p : v.opacity) parents.push_back(p);
  for (const auto& p : v.width) parents.push_back(p);

  const int W = v.canvas_width, H = v.canvas_height;
  DrawingVars leaves = v;
  return ad::make_op(std::move(img), std::move(parents),
                     [leaves, traces, W, H, n](const Tensor& out_grad) {
    // Reverse compositing sweep: G holds dL/d(image after stroke i); the
    // stored per-hit under values undo each blend without any division.
    Tensor G = out_grad;
    for (std::size_t ii = n; ii-- > 0;) {
      const StrokeTrace& tr = (*traces)[ii];
      const Tensor& cv = leaves.color[ii].value();
      const double op = leaves.opacity[ii].value()[0];
      const double w = leaves.width[ii].value()[0];
      const int segs = (leaves.points[ii].value().dim(0) - 1) / 3;
      const bool want_points = ad::var_needs_grad(leaves.points[ii]);

      std::vector<Vec2> dpoly(tr.poly.size());
      double dc[3] = {0.0, 0.0, 0.0};
      double dop = 0.0, dw = 0.0;

      for (const Hit& hit : tr.hits) {
        double gout[3];
        double dalpha = 0.0;
        const double alpha = op * hit.cov;
        for (int ch = 0; ch < 3; ++ch) {
          gout[ch] = G.at(hit.py, hit.px, ch);
          dc[ch] += gout[ch] * alpha;
          dalpha += gout[ch] * (cv[ch] - hit.under[static_cast<std::size_t>(ch)]);
          G.at(hit.py, hit.px, ch) = gout[ch] * (1.0 - alpha);
        }
        dop += dalpha * hit.cov;
        const double dcov = dalpha * op;
        const double u = (w / 2.0 + kEdgeBand / 2.0 - hit.dsoft) / kEdgeBand;
        if (u >= 1.0) continue;  // saturated coverage, flat profile
        const double pd = coverage_ramp_deriv(u);
        dw += dcov * pd / (2.0 * kEdgeBand);
        const double dd = -dcov * pd / kEdgeBand;
        if (dd != 0.0 && want_points)
          backprop_distance(tr.poly, {hit.px + 0.5, hit.py + 0.5}, dd, dpoly);
      }

      if (want_points) {
        Tensor& gp = ad::var_grad_buffer(leaves.points[ii]);
        for (std::size_t j = 0; j < dpoly.size(); ++j) {
          if (dpoly[j].x == 0.0 && dpoly[j].y == 0.0) continue;
          const int m = std::min(static_cast<int>(j) / kSamplesPerSegment, segs - 1);
          const double t =
              static_cast<double>(static_cast<int>(j) - m * kSamplesPerSegment) /
              kSamplesPerSegment;
          const auto B = bernstein3(t);
          for (int r = 0; r < 4; ++r) {
            gp.at(3 * m + r, 0) += B[r] * dpoly[j].x * W;
            gp.at(3 * m + r, 1) += B[r] * dpoly[j].y * H;
          }
        }
      }
      if (ad::var_needs_grad(leaves.color[ii])) {
        Tensor& gc = ad::var_grad_buffer(leaves.color[ii]);
        for (int ch = 0; ch < 3; ++ch) gc[ch] += dc[ch];
      }
      if (ad::var_needs_grad(leaves.opacity[ii]))
        ad::var_grad_buffer(leaves.opacity[ii])[0] += dop;
      if (ad::var_needs_grad(leaves.width[ii]))
        ad::var_grad_buffer(leaves.width[ii])[0] += dw;
    }
  });
}

double gradient_check(const Drawing& d, const PixelLossBuilder& loss, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("gradient_check: step must be positive");
  validate_drawing(d);

  DrawingVars v = make_drawing_vars(d);
  ad::Var L = loss(render_var(v));
  L.backward();

  // One flat view over every scalar parameter: the analytic gradient plus a
  // mutator used for the two-sided probes.
  struct Param {
    double analytic;
    double* slot;
  };
  Drawing probe = d;
  std::vector<Param> params;
  for (std::size_t i = 0; i < probe.strokes.size(); ++i) {
    auto& s = probe.strokes[i];
    const Tensor gp = v.points[i].grad_or_zero();
    for (std::size_t j = 0; j < s.control_points.size(); ++j) {
      params.push_back({gp.at(static_cast<int>(j), 0), &s.control_points[j].x});
      params.push_back({gp.at(static_cast<int>(j), 1), &s.control_points[j].y});
    }
    const Tensor gc = v.color[i].grad_or_zero();
    for (int ch = 0; ch < 3; ++ch)
      params.push_back({gc[ch], &s.color[static_cast<std::size_t>(ch)]});
    params.push_back({v.opacity[i].grad_or_zero()[0], &s.opacity});
    params.push_back({v.width[i].grad_or_zero()[0], &s.width});
  }

  // Errors are measured against the gradient's overall scale. A per-coordinate
  // ratio is dominated by finite-difference truncation wherever a coordinate
  // happens to sit near a stationary point, which says nothing about the
  // correctness of the backward pass.
  double scale = 0.0;
  for (const auto& p : params) scale = std::max(scale, std::fabs(p.analytic));
  if (scale == 0.0) return 0.0;

  // The probe evaluation skips drawing validation: a probe may push opacity a
  // hair past 1, and the compositing math extends smoothly across the bound.
  auto eval = [&]() {
    Tensor img = rasterize(probe, nullptr);
    return loss(ad::Var::constant(std::move(img))).value().scalar_value();
  };

  double worst = 0.0;
  for (const auto& p : params) {
    if (std::fabs(p.analytic) <= 1e-6) continue;
    const double saved = *p.slot;
    *p.slot = saved + step;
    const double hi = eval();
    *p.slot = saved - step;
    const double lo = eval();
    *p.slot = saved;
    const double fd = (hi - lo) / (2.0 * step);
    worst = std::max(worst, std::fabs(p.analytic - fd) / scale);
  }
  return worst;
}

}  // namespace styledraw
