#include "dctstab/warp_crop.hpp"

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <string>

#include "dctstab/error.hpp"

namespace dctstab {

namespace {

// Similarity maps are anchored at the same point in edge and center
// coordinates up to the constant half-pixel shift, so the edge-coordinate map
// has the same parameters with center (w/2, h/2).
Eigen::Vector2d edge_center(int h, int w) { return {w / 2.0, h / 2.0}; }

double signed_area(const std::vector<Eigen::Vector2d>& poly) {
  double a = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

}  // namespace

ValidQuad valid_quad(const SimilarityParams& warp, int frame_h, int frame_w) {
  // Output p is valid when T(p) lies in the frame, i.e. p in T^-1(frame).
  const SimilarityParams inv = invert(warp);
  const Eigen::Vector2d ce = edge_center(frame_h, frame_w);
  const std::array<Eigen::Vector2d, 4> rect = {Eigen::Vector2d(0, 0), Eigen::Vector2d(frame_w, 0),
                                               Eigen::Vector2d(frame_w, frame_h),
                                               Eigen::Vector2d(0, frame_h)};
  ValidQuad q;
  for (int i = 0; i < 4; ++i) q.corners[i] = inv.apply(rect[i], ce) - Eigen::Vector2d(0.5, 0.5);
  std::vector<Eigen::Vector2d> poly(q.corners.begin(), q.corners.end());
  q.convex = signed_area(poly) > 0.0;
  return q;
}

std::vector<Eigen::Vector2d> clip_to_box(const std::vector<Eigen::Vector2d>& polygon, double x0,
                                         double y0, double x1, double y1) {
  std::vector<Eigen::Vector2d> out = polygon;
  // Each clip plane as (axis, bound, keep-greater).
  const std::array<std::tuple<int, double, bool>, 4> planes = {
      std::tuple{0, x0, true}, std::tuple{0, x1, false}, std::tuple{1, y0, true},
      std::tuple{1, y1, false}};
  for (const auto& [axis, bound, greater] : planes) {
    if (out.empty()) break;
    std::vector<Eigen::Vector2d> next;
    auto inside = [&](const Eigen::Vector2d& p) { return greater ? p[axis] >= bound : p[axis] <= bound; };
    for (size_t i = 0; i < out.size(); ++i) {
      const Eigen::Vector2d& a = out[i];
      const Eigen::Vector2d& b = out[(i + 1) % out.size()];
      const bool ia = inside(a);
      const bool ib = inside(b);
      if (ia) next.push_back(a);
      if (ia != ib) {
        const double t = (bound - a[axis]) / (b[axis] - a[axis]);
        next.push_back(a + t * (b - a));
      }
    }
    out = std::move(next);
  }
  return out;
}

CropRect inscribed_rect(const std::vector<Eigen::Vector2d>& poly) {
  if (poly.size() < 3) return {};
  const double area = signed_area(poly);
  if (std::abs(area) < 1e-12) return {};

  // Halfplanes n.q <= d of the polygon, counter-clockwise or not.
  struct Halfplane {
    Eigen::Vector2d n;
    double d;
  };
  const double orientation = area > 0 ? 1.0 : -1.0;
  std::vector<Halfplane> planes;
  double x_lo = poly[0].x(), x_hi = poly[0].x(), y_lo = poly[0].y(), y_hi = poly[0].y();
  for (size_t i = 0; i < poly.size(); ++i) {
    const Eigen::Vector2d& p = poly[i];
    const Eigen::Vector2d e = poly[(i + 1) % poly.size()] - p;
    if (e.norm() < 1e-12) continue;
    const Eigen::Vector2d n = orientation * Eigen::Vector2d(e.y(), -e.x()) / e.norm();
    planes.push_back({n, n.dot(p)});
    x_lo = std::min(x_lo, p.x());
    x_hi = std::max(x_hi, p.x());
    y_lo = std::min(y_lo, p.y());
    y_hi = std::max(y_hi, p.y());
  }

  // Centers admitting a (2hw x 2hh) rectangle: every halfplane shrunk by the
  // support of the rectangle, |n.x| hw + |n.y| hh.
  auto centers = [&](double hw, double hh) {
    std::vector<Eigen::Vector2d> region = {{x_lo, y_lo}, {x_hi, y_lo}, {x_hi, y_hi}, {x_lo, y_hi}};
    for (const Halfplane& h : planes) {
      const double d = h.d - std::abs(h.n.x()) * hw - std::abs(h.n.y()) * hh;
      std::vector<Eigen::Vector2d> next;
      for (size_t i = 0; i < region.size(); ++i) {
        const Eigen::Vector2d& a = region[i];
        const Eigen::Vector2d& b = region[(i + 1) % region.size()];
        const double fa = h.n.dot(a) - d;
        const double fb = h.n.dot(b) - d;
        if (fa <= 0.0) next.push_back(a);
        if ((fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0)) next.push_back(a + fa / (fa - fb) * (b - a));
      }
      region = std::move(next);
      if (region.empty()) break;
    }
    return region;
  };
  constexpr int kBisection = 40;
  auto max_hh = [&](double hw) {
    double lo = 0.0, hi = 0.5 * (y_hi - y_lo);
    if (centers(hw, 0.0).empty()) return 0.0;
    for (int i = 0; i < kBisection; ++i) {
      const double mid = 0.5 * (lo + hi);
      (centers(hw, mid).empty() ? hi : lo) = mid;
    }
    return lo;
  };

  // hh(hw) is concave, so hw * hh(hw) is unimodal.
  constexpr int kGolden = 60;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 0.0, hi = 0.5 * (x_hi - x_lo);
  double m1 = hi - phi * (hi - lo), m2 = lo + phi * (hi - lo);
  double f1 = m1 * max_hh(m1), f2 = m2 * max_hh(m2);
  for (int i = 0; i < kGolden; ++i) {
    if (f1 < f2) {
      lo = m1;
      m1 = m2;
      f1 = f2;
      m2 = lo + phi * (hi - lo);
      f2 = m2 * max_hh(m2);
    } else {
      hi = m2;
      m2 = m1;
      f2 = f1;
      m1 = hi - phi * (hi - lo);
      f1 = m1 * max_hh(m1);
    }
  }
  const double hw = f1 >= f2 ? m1 : m2;
  const double hh = max_hh(hw);
  if (hw <= 0.0 || hh <= 0.0) return {};
  const std::vector<Eigen::Vector2d> region = centers(hw, hh);
  if (region.empty()) return {};
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : region) c += p;
  c /= static_cast<double>(region.size());
  return {c.x() - hw, c.y() - hh, 2.0 * hw, 2.0 * hh};
}

double crop_ratio(const SimilarityParams& warp, int frame_h, int frame_w) {
  const SimilarityParams inv = invert(warp);
  const Eigen::Vector2d ce = edge_center(frame_h, frame_w);
  std::vector<Eigen::Vector2d> poly = {inv.apply({0, 0}, ce), inv.apply({double(frame_w), 0}, ce),
                                       inv.apply({double(frame_w), double(frame_h)}, ce),
                                       inv.apply({0, double(frame_h)}, ce)};
  poly = clip_to_box(poly, 0.0, 0.0, frame_w, frame_h);
  const CropRect rect = inscribed_rect(poly);
  return std::clamp(rect.area() / (static_cast<double>(frame_w) * frame_h), 0.0, 1.0);
}

CropRect valid_rect(const Mask& valid) {
  // Largest all-valid rectangle: histogram of run heights per row + monotone stack.
  const int h = valid.height();
  const int w = valid.width();
  std::vector<int> heights(w, 0);
  long best = 0;
  CropRect rect;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) heights[x] = valid(y, x) ? heights[x] + 1 : 0;
    std::vector<int> stack;
    for (int x = 0; x <= w; ++x) {
      const int cur = x < w ? heights[x] : 0;
      while (!stack.empty() && heights[stack.back()] >= cur) {
        const int top = heights[stack.back()];
        stack.pop_back();
        const int left = stack.empty() ? 0 : stack.back() + 1;
        const long a = static_cast<long>(top) * (x - left);
        if (a > best) {
          best = a;
          rect = {static_cast<double>(left), static_cast<double>(y + 1 - top),
                  static_cast<double>(x - left), static_cast<double>(top)};
        }
      }
      stack.push_back(x);
    }
  }
  return rect;
}

Mask flow_validity(const FlowField& flow) {
  Mask m(flow.height(), flow.width(), 0);
  for (int y = 0; y < flow.height(); ++y)
    for (int x = 0; x < flow.width(); ++x)
      m(y, x) = flow.valid(y, x) &&
                in_bounds(x + flow.u(y, x), y + flow.v(y, x), flow.height(), flow.width());
  return m;
}

double crop_ratio_flow(const FlowField& flow) {
  const CropRect r = valid_rect(flow_validity(flow));
  return r.area() / (static_cast<double>(flow.width()) * flow.height());
}

Image warp_by_flow(const Image& src, const FlowField& flow, Mask* valid) {
  if (src.height() != flow.height() || src.width() != flow.width())
    throw InputError("flow and frame dimensions differ");
  Image out(src.height(), src.width(), 0.0f);
  if (valid) *valid = Mask(src.height(), src.width(), 0);
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      if (!flow.valid(y, x)) continue;
      const double sx = x + flow.u(y, x);
      const double sy = y + flow.v(y, x);
      if (!in_bounds(sx, sy, src.height(), src.width())) continue;
      out(y, x) = static_cast<float>(sample_bilinear(src, sx, sy));
      if (valid) (*valid)(y, x) = 1;
    }
  }
  return out;
}

Frame warp_by_flow(const Frame& src, const FlowField& flow) {
  if (src.height() != flow.height() || src.width() != flow.width())
    throw InputError("flow and frame dimensions differ");
  Frame out(src.height(), src.width(), src.channel_count(), 0.0f);
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      const double sx = x + flow.u(y, x);
      const double sy = y + flow.v(y, x);
      const bool ok = flow.valid(y, x) && mask_covers(src.valid, sx, sy);
      out.valid(y, x) = ok ? 1 : 0;
      if (!ok) continue;
      for (int c = 0; c < src.channel_count(); ++c)
        out.channels[c](y, x) = static_cast<float>(sample_bilinear(src.channels[c], sx, sy));
    }
  }
  return out;
}

Frame warp_by_similarity(const Frame& src, const SimilarityParams& warp) {
  return warp_by_flow(src, flow_from_similarity(warp, src.height(), src.width()));
}

namespace {

/// Largest rectangle with aspect w/h whose covering pixel block lies inside
/// `valid`, placed as close to the frame center as possible.
CropRect largest_aspect_rect(const Mask& valid) {
  const int h = valid.height();
  const int w = valid.width();
  Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> sum =
      Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>::Zero(h + 1, w + 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) sum(y + 1, x + 1) = sum(y, x + 1) + sum(y + 1, x) - sum(y, x) + (valid(y, x) ? 1 : 0);
  auto place = [&](double rh, CropRect* out) {
    double rw = rh * w / h;
    if (std::abs(rw - std::round(rw)) < 1e-9) rw = std::round(rw);
    const int bw = static_cast<int>(std::ceil(rw - 1e-9));
    const int bh = static_cast<int>(std::ceil(rh - 1e-9));
    if (bw < 1 || bh < 1 || bw > w || bh > h) return false;
    const long need = static_cast<long>(bw) * bh;
    double best = std::numeric_limits<double>::infinity();
    for (int y = 0; y + bh <= h; ++y)
      for (int x = 0; x + bw <= w; ++x) {
        if (sum(y + bh, x + bw) - sum(y, x + bw) - sum(y + bh, x) + sum(y, x) != need) continue;
        const double dx = x + 0.5 * bw - 0.5 * w, dy = y + 0.5 * bh - 0.5 * h;
        const double d = dx * dx + dy * dy;
        if (d < best) {
          best = d;
          if (out) *out = {x + 0.5 * (bw - rw), y + 0.5 * (bh - rh), rw, rh};
        }
      }
    return std::isfinite(best);
  };

  CropRect rect;
  if (!place(1.0, &rect)) return {0.0, 0.0, 0.0, 0.0};
  double lo = 1.0, hi = h;
  if (place(hi, nullptr)) {
    lo = hi;
  } else {
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      (place(mid, nullptr) ? lo : hi) = mid;
    }
  }
  // The optimum has an integer height or an integer width; snap to it.
  const double snapped[] = {std::round(lo), std::round(lo * w / h) * h / w};
  for (double c : snapped)
    if (c >= lo && c - lo < 1e-6 && place(c, nullptr)) lo = c;
  place(lo, &rect);
  return rect;
}

}  // namespace

UniformCropResult uniform_crop(const FrameSequence& frames) {
  if (frames.empty()) throw InputError("no frames to crop");
  const int h = frames.front().height();
  const int w = frames.front().width();
  Mask common(h, w, 1);
  for (size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].height() != h || frames[i].width() != w)
      throw InputError("frame " + std::to_string(i) + " has different dimensions");
    bool any = false;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        common(y, x) = common(y, x) && frames[i].valid(y, x);
        any = any || common(y, x);
      }
    if (!any) throw ProcessingError("empty crop intersection at frame " + std::to_string(i));
  }
  const CropRect rect = largest_aspect_rect(common);
  if (rect.width < 1.0) throw ProcessingError("empty crop intersection");
  const double x0 = rect.left, y0 = rect.top, cw = rect.width, ch = rect.height;

  UniformCropResult result;
  result.rect = {x0, y0, cw, ch};
  result.ratio = cw * ch / (static_cast<double>(w) * h);
  result.frames.reserve(frames.size());
  const bool full = x0 == 0.0 && y0 == 0.0 && cw == w && ch == h;
  for (const Frame& f : frames) {
    if (full) {
      result.frames.push_back(f);
      continue;
    }
    Frame out;
    for (const Image& c : f.channels) out.channels.push_back(resample_rect(c, x0, y0, cw, ch, h, w));
    out.valid = Mask(h, w, 1);
    result.frames.push_back(std::move(out));
  }
  return result;
}

}  // namespace dctstab
