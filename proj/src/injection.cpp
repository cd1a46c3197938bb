#include "catv/injection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "catv/error.hpp"

namespace catv {

std::string_view to_string(StyleKind kind) {
  switch (kind) {
    case StyleKind::kBoundingBox: return "bounding_box";
    case StyleKind::kBlur: return "blur";
    case StyleKind::kCircle: return "circle";
    case StyleKind::kColorBlock: return "color_block";
    case StyleKind::kHalo: return "halo";
    case StyleKind::kMask: return "mask";
    case StyleKind::kPolygon: return "polygon";
    case StyleKind::kBboxPlusMask: return "bbox_plus_mask";
  }
  return "unknown";
}

StyleKind style_kind_from_string(std::string_view name) {
  for (const auto k : kAllStyles) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown injection style '{}'", name));
}

void StyleParams::validate() const {
  if (!(overlay_alpha >= 0.0 && overlay_alpha <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "overlay_alpha must lie in [0,1]");
  }
  if (stroke_width < 1 || blur_radius < 1 || halo_radius < 1) {
    throw Error(ErrorCode::kInvalidArgument, "stroke width, blur radius and halo radius must be >= 1");
  }
  if (!(simplify_tolerance >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "simplify_tolerance must be >= 0");
}

namespace {

nlohmann::json rgb_json(Rgb c) { return nlohmann::json::array({c.r, c.g, c.b}); }
Rgb rgb_from(const nlohmann::json& j) {
  return {j.at(0).get<std::uint8_t>(), j.at(1).get<std::uint8_t>(), j.at(2).get<std::uint8_t>()};
}

}  // namespace

void to_json(nlohmann::json& j, const InjectionStyle& s) {
  const auto& p = s.params;
  j = nlohmann::json{{"kind", to_string(s.kind)},
                     {"params",
                      {{"stroke_color", rgb_json(p.stroke_color)},
                       {"stroke_width", p.stroke_width},
                       {"overlay_color", rgb_json(p.overlay_color)},
                       {"overlay_alpha", p.overlay_alpha},
                       {"blur_radius", p.blur_radius},
                       {"halo_radius", p.halo_radius},
                       {"simplify_tolerance", p.simplify_tolerance}}}};
}

void from_json(const nlohmann::json& j, InjectionStyle& s) {
  s = InjectionStyle{};
  s.kind = style_kind_from_string(j.value("kind", std::string(to_string(StyleKind::kBboxPlusMask))));
  if (!j.contains("params")) return;
  const auto& p = j.at("params");
  auto& o = s.params;
  if (p.contains("stroke_color")) o.stroke_color = rgb_from(p["stroke_color"]);
  if (p.contains("overlay_color")) o.overlay_color = rgb_from(p["overlay_color"]);
  o.stroke_width = p.value("stroke_width", o.stroke_width);
  o.overlay_alpha = p.value("overlay_alpha", o.overlay_alpha);
  o.blur_radius = p.value("blur_radius", o.blur_radius);
  o.halo_radius = p.value("halo_radius", o.halo_radius);
  o.simplify_tolerance = p.value("simplify_tolerance", o.simplify_tolerance);
  o.validate();
}

namespace {

// Rounds half-up to 8 bits; blends stay in real arithmetic until here.
std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5 + 1e-9), 0.0, 255.0));
}

class Canvas {
 public:
  explicit Canvas(const Frame& f) : h_(f.height()), w_(f.width()), px_(f.pixels().begin(), f.pixels().end()) {}

  int height() const { return h_; }
  int width() const { return w_; }

  void paint(int y, int x, Rgb c) {
    auto* p = at(y, x);
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }
  void blend(int y, int x, Rgb c, double alpha) {
    auto* p = at(y, x);
    p[0] = quantize((1.0 - alpha) * p[0] + alpha * c.r);
    p[1] = quantize((1.0 - alpha) * p[1] + alpha * c.g);
    p[2] = quantize((1.0 - alpha) * p[2] + alpha * c.b);
  }
  std::uint8_t* at(int y, int x) { return &px_[(static_cast<std::size_t>(y) * w_ + x) * 3]; }
  std::vector<std::uint8_t> release() && { return std::move(px_); }

 private:
  int h_, w_;
  std::vector<std::uint8_t> px_;
};

void blend_mask(Canvas& c, const BinaryMask& m, Rgb color, double alpha) {
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.get(y, x)) c.blend(y, x, color, alpha);
}

void paint_mask(Canvas& c, const BinaryMask& m, Rgb color) {
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.get(y, x)) c.paint(y, x, color);
}

// Ring of `width` pixels just inside the box edges.
void stroke_box(Canvas& c, const Box& b, int width, Rgb color) {
  for (int y = b.y_min; y <= b.y_max; ++y) {
    for (int x = b.x_min; x <= b.x_max; ++x) {
      const int edge = std::min({x - b.x_min, b.x_max - x, y - b.y_min, b.y_max - y});
      if (edge < width) c.paint(y, x, color);
    }
  }
}

void box_blur_outside(Canvas& c, const Frame& src, const BinaryMask& m, int r) {
  const int h = src.height(), w = src.width();
  // Integral image per channel, (h+1)x(w+1).
  std::vector<std::int64_t> integral(static_cast<std::size_t>(h + 1) * (w + 1) * 3, 0);
  auto I = [&](int y, int x, int ch) -> std::int64_t& {
    return integral[(static_cast<std::size_t>(y) * (w + 1) + x) * 3 + ch];
  };
  const auto px = src.pixels();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        I(y + 1, x + 1, ch) = px[(static_cast<std::size_t>(y) * w + x) * 3 + ch] + I(y, x + 1, ch) +
                              I(y + 1, x, ch) - I(y, x, ch);
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (m.get(y, x)) continue;
      const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
      const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
      const double area = static_cast<double>(y1 - y0 + 1) * (x1 - x0 + 1);
      auto* p = c.at(y, x);
      for (int ch = 0; ch < 3; ++ch) {
        const auto sum = I(y1 + 1, x1 + 1, ch) - I(y0, x1 + 1, ch) - I(y1 + 1, x0, ch) + I(y0, x0, ch);
        p[ch] = quantize(static_cast<double>(sum) / area);
      }
    }
  }
}

void stroke_circle(Canvas& c, const Circle& circle, int width, Rgb color) {
  const double outer = circle.radius + width;
  const int y0 = std::max(0, static_cast<int>(std::floor(circle.cy - outer)));
  const int y1 = std::min(c.height() - 1, static_cast<int>(std::ceil(circle.cy + outer)));
  const int x0 = std::max(0, static_cast<int>(std::floor(circle.cx - outer)));
  const int x1 = std::min(c.width() - 1, static_cast<int>(std::ceil(circle.cx + outer)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double d = std::hypot(x - circle.cx, y - circle.cy);
      // Strictly outside the enclosing circle, so object pixels are never hit.
      if (d > circle.radius + 1e-7 && d <= outer) c.paint(y, x, color);
    }
  }
}

double point_segment_distance(double px, double py, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0) t = std::clamp(((px - a.x) * dx + (py - a.y) * dy) / len2, 0.0, 1.0);
  return std::hypot(a.x + t * dx - px, a.y + t * dy - py);
}

void stroke_segment(Canvas& c, Point a, Point b, int width, Rgb color) {
  const double half = width / 2.0;
  const int pad = static_cast<int>(std::ceil(half));
  const int y0 = std::max(0, std::min(a.y, b.y) - pad), y1 = std::min(c.height() - 1, std::max(a.y, b.y) + pad);
  const int x0 = std::max(0, std::min(a.x, b.x) - pad), x1 = std::min(c.width() - 1, std::max(a.x, b.x) + pad);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (point_segment_distance(x, y, a, b) <= half) c.paint(y, x, color);
}

void stroke_polygons(Canvas& c, const BinaryMask& m, const StyleParams& p) {
  for (const auto& poly : contour_polygon(m, p.simplify_tolerance)) {
    const auto& v = poly.vertices;
    if (v.size() == 1) {
      stroke_segment(c, v[0], v[0], p.stroke_width, p.stroke_color);
      continue;
    }
    const std::size_t edges = v.size() == 2 ? 1 : v.size();
    for (std::size_t i = 0; i < edges; ++i) stroke_segment(c, v[i], v[(i + 1) % v.size()], p.stroke_width, p.stroke_color);
  }
}

struct Pt2 {
  double x, y;
};

Circle circle_from(const Pt2& a, const Pt2& b) {
  return {(a.x + b.x) / 2, (a.y + b.y) / 2, std::hypot(a.x - b.x, a.y - b.y) / 2};
}

Circle circle_from(const Pt2& a, const Pt2& b, const Pt2& c) {
  const double bx = b.x - a.x, by = b.y - a.y, cx = c.x - a.x, cy = c.y - a.y;
  const double d = 2 * (bx * cy - by * cx);
  if (std::abs(d) < 1e-12) {
    // Collinear: widest pair.
    Circle best = circle_from(a, b);
    for (const auto& cand : {circle_from(a, c), circle_from(b, c)})
      if (cand.radius > best.radius) best = cand;
    return best;
  }
  const double ux = (cy * (bx * bx + by * by) - by * (cx * cx + cy * cy)) / d;
  const double uy = (bx * (cx * cx + cy * cy) - cx * (bx * bx + by * by)) / d;
  return {a.x + ux, a.y + uy, std::hypot(ux, uy)};
}

bool contains(const Circle& c, const Pt2& p) { return std::hypot(p.x - c.cx, p.y - c.cy) <= c.radius + 1e-9; }

}  // namespace

Circle minimal_enclosing_circle(const BinaryMask& mask) {
  std::vector<Pt2> pts;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.get(y, x)) continue;
      const bool boundary = !mask.get_or_zero(y - 1, x) || !mask.get_or_zero(y + 1, x) ||
                            !mask.get_or_zero(y, x - 1) || !mask.get_or_zero(y, x + 1);
      if (boundary) pts.push_back({static_cast<double>(x), static_cast<double>(y)});
    }
  }
  if (pts.empty()) throw Error(ErrorCode::kEmptyMask, "cannot enclose an empty mask");
  // Deterministic shuffle (fixed seed, explicit Fisher-Yates) for expected-linear Welzl.
  std::mt19937 rng(0x5eed);
  for (std::size_t i = pts.size() - 1; i > 0; --i) std::swap(pts[i], pts[rng() % (i + 1)]);
  Circle c{pts[0].x, pts[0].y, 0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (contains(c, pts[i])) continue;
    c = {pts[i].x, pts[i].y, 0.0};
    for (std::size_t j = 0; j < i; ++j) {
      if (contains(c, pts[j])) continue;
      c = circle_from(pts[i], pts[j]);
      for (std::size_t k = 0; k < j; ++k) {
        if (!contains(c, pts[k])) c = circle_from(pts[i], pts[j], pts[k]);
      }
    }
  }
  return c;
}

Frame inject(const Frame& frame, const BinaryMask& mask, const InjectionStyle& style) {
  if (mask.height() != frame.height() || mask.width() != frame.width()) {
    throw Error(ErrorCode::kShape,
                fmt::format("mask {}x{} does not match frame {}x{}", mask.height(), mask.width(), frame.height(),
                            frame.width()),
                "inject");
  }
  style.params.validate();
  const auto box = bbox_of(mask);
  if (!box) return frame;
  const auto& p = style.params;
  Canvas canvas(frame);
  switch (style.kind) {
    case StyleKind::kBoundingBox:
      stroke_box(canvas, *box, p.stroke_width, p.stroke_color);
      break;
    case StyleKind::kBlur:
      box_blur_outside(canvas, frame, mask, p.blur_radius);
      break;
    case StyleKind::kCircle:
      stroke_circle(canvas, minimal_enclosing_circle(mask), p.stroke_width, p.stroke_color);
      break;
    case StyleKind::kColorBlock:
      blend_mask(canvas, mask, p.overlay_color, p.overlay_alpha);
      break;
    case StyleKind::kHalo:
      blend_mask(canvas, mask_minus(dilate(mask, p.halo_radius), mask), p.overlay_color, p.overlay_alpha);
      break;
    case StyleKind::kMask:
      blend_mask(canvas, mask, p.overlay_color, p.overlay_alpha);
      paint_mask(canvas, mask_minus(mask, erode(mask, p.stroke_width)), p.stroke_color);
      break;
    case StyleKind::kPolygon:
      stroke_polygons(canvas, mask, p);
      break;
    case StyleKind::kBboxPlusMask:
      stroke_box(canvas, *box, p.stroke_width, p.stroke_color);
      blend_mask(canvas, mask, p.overlay_color, p.overlay_alpha);
      break;
  }
  return frame.with_pixels(std::move(canvas).release());
}

VideoClip inject_video(const VideoClip& clip, const Masklet& masklet, const InjectionStyle& style) {
  if (static_cast<int>(masklet.masks.size()) != clip.frame_count()) {
    throw Error(ErrorCode::kShape,
                fmt::format("masklet has {} masks for {} frames", masklet.masks.size(), clip.frame_count()), "inject");
  }
  const int n = clip.frame_count();
  std::vector<Frame> out(static_cast<std::size_t>(n));
  const int workers = std::clamp(static_cast<int>(std::thread::hardware_concurrency()), 1, 16);
  std::vector<std::future<void>> jobs;
  for (int w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (int t = w; t < n; t += workers) {
        out[static_cast<std::size_t>(t)] = inject(clip.frame(t), masklet.masks[static_cast<std::size_t>(t)], style);
      }
    }));
  }
  for (auto& j : jobs) j.get();
  return VideoClip(std::move(out), clip.fps());
}

double interior_color_shift(const Frame& original, const Frame& rendered, const BinaryMask& mask, int margin) {
  if (original.height() != rendered.height() || original.width() != rendered.width() ||
      mask.height() != original.height() || mask.width() != original.width()) {
    throw Error(ErrorCode::kShape, "frames and mask must share dimensions");
  }
  const auto interior = erode(mask, margin);
  const auto n = interior.count();
  if (n == 0) throw Error(ErrorCode::kDegenerateInterior, fmt::format("erode(mask, {}) is empty", margin));
  const auto a = original.pixels(), b = rendered.pixels();
  double total = 0.0;
  for (std::size_t i = 0; i < interior.bits().size(); ++i) {
    if (!interior.bits()[i]) continue;
    for (int ch = 0; ch < 3; ++ch) total += std::abs(static_cast<int>(a[i * 3 + ch]) - static_cast<int>(b[i * 3 + ch]));
  }
  return total / (3.0 * static_cast<double>(n));
}

Frame render_style_sheet(const Frame& frame, const BinaryMask& mask, const StyleParams& params, int gap) {
  std::vector<Frame> panels;
  for (const auto k : kSheetStyles) panels.push_back(inject(frame, mask, InjectionStyle{k, params}));
  return hconcat(panels, gap);
}

}  // namespace catv
