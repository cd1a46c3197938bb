#include "catv/mask.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "catv/error.hpp"

namespace catv {

BinaryMask::BinaryMask(int height, int width)
    : BinaryMask(height, width,
                 std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0))) {}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
  if (height < 0 || width < 0) throw Error(ErrorCode::kInvalidArgument, "mask dimensions must be non-negative");
  if (bits_.size() != static_cast<std::size_t>(height) * width) {
    throw Error(ErrorCode::kShape, fmt::format("mask has {} values, expected {}x{}", bits_.size(), height, width));
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

void BinaryMask::fill_box(const Box& box) {
  const int y0 = std::max(box.y_min, 0), y1 = std::min(box.y_max, height_ - 1);
  const int x0 = std::max(box.x_min, 0), x1 = std::min(box.x_max, width_ - 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) set(y, x);
}

RleMask rle_encode(const BinaryMask& mask) {
  RleMask rle{mask.height(), mask.width(), {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (const auto bit : mask.bits()) {
    if (bit != current) {
      rle.counts.push_back(run);
      run = 0;
      current = bit;
    }
    ++run;
  }
  rle.counts.push_back(run);
  return rle;
}

BinaryMask rle_decode(const RleMask& rle) {
  if (rle.height < 0 || rle.width < 0) throw Error(ErrorCode::kMalformedRle, "negative RLE dimensions");
  const std::uint64_t expected = static_cast<std::uint64_t>(rle.height) * static_cast<std::uint64_t>(rle.width);
  const std::uint64_t total = std::accumulate(rle.counts.begin(), rle.counts.end(), std::uint64_t{0});
  if (total != expected) {
    throw Error(ErrorCode::kMalformedRle,
                fmt::format("RLE counts sum to {}, expected {}x{}={}", total, rle.height, rle.width, expected));
  }
  for (std::size_t i = 1; i < rle.counts.size(); ++i) {
    if (rle.counts[i] == 0) throw Error(ErrorCode::kMalformedRle, fmt::format("zero-length run at {}", i));
  }
  std::vector<std::uint8_t> bits;
  bits.reserve(expected);
  std::uint8_t value = 0;
  for (const auto c : rle.counts) {
    bits.insert(bits.end(), c, value);
    value ^= 1;
  }
  return BinaryMask(rle.height, rle.width, std::move(bits));
}

std::optional<Box> bbox_of(const BinaryMask& mask) {
  std::optional<Box> box;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.get(y, x)) continue;
      if (!box) {
        box = Box{x, y, x, y};
      } else {
        box->x_min = std::min(box->x_min, x);
        box->x_max = std::max(box->x_max, x);
        box->y_max = y;
      }
    }
  }
  return box;
}

namespace {

void require_same_shape(const BinaryMask& a, const BinaryMask& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw Error(ErrorCode::kShape, fmt::format("mask shapes differ: {}x{} vs {}x{}", a.height(), a.width(),
                                               b.height(), b.width()));
  }
}

template <typename Op>
BinaryMask combine(const BinaryMask& a, const BinaryMask& b, Op op) {
  require_same_shape(a, b);
  std::vector<std::uint8_t> bits(a.bits().size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = op(a.bits()[i], b.bits()[i]) ? 1 : 0;
  return BinaryMask(a.height(), a.width(), std::move(bits));
}

// One separable pass of a (2r+1) window along rows (horizontal) or columns.
// Dilate: any set pixel in window. Erode: every window pixel set, where
// out-of-bounds pixels are background.
std::vector<std::uint8_t> window_pass(const std::vector<std::uint8_t>& in, int h, int w, int r, bool horizontal,
                                      bool dilate_op) {
  std::vector<std::uint8_t> out(in.size());
  const int lines = horizontal ? h : w;
  const int len = horizontal ? w : h;
  std::vector<int> prefix(static_cast<std::size_t>(len) + 1);
  for (int line = 0; line < lines; ++line) {
    auto at = [&](int i) -> std::size_t {
      return horizontal ? static_cast<std::size_t>(line) * w + i : static_cast<std::size_t>(i) * w + line;
    };
    for (int i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + in[at(i)];
    for (int i = 0; i < len; ++i) {
      const int lo = i - r, hi = i + r;
      const int clo = std::max(lo, 0), chi = std::min(hi, len - 1);
      const int sum = prefix[chi + 1] - prefix[clo];
      if (dilate_op) {
        out[at(i)] = sum > 0;
      } else {
        out[at(i)] = (lo >= 0 && hi < len && sum == 2 * r + 1);
      }
    }
  }
  return out;
}

}  // namespace

double iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits().size(); ++i) {
    inter += a.bits()[i] & b.bits()[i];
    uni += a.bits()[i] | b.bits()[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

BinaryMask morphology(const BinaryMask& mask, MorphOp op, int radius) {
  if (radius < 0) throw Error(ErrorCode::kInvalidArgument, "morphology radius must be non-negative");
  if (radius == 0 || mask.height() == 0 || mask.width() == 0) return mask;
  const bool d = op == MorphOp::kDilate;
  auto rows = window_pass(mask.bits(), mask.height(), mask.width(), radius, true, d);
  auto both = window_pass(rows, mask.height(), mask.width(), radius, false, d);
  return BinaryMask(mask.height(), mask.width(), std::move(both));
}

BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](auto x, auto y) { return x && y; });
}
BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](auto x, auto y) { return x || y; });
}
BinaryMask mask_minus(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](auto x, auto y) { return x && !y; });
}

namespace {

// Clockwise in image coordinates (y down), starting east.
constexpr std::array<Point, 8> kDirs{{{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};

int direction_of(Point from, Point to) {
  for (int d = 0; d < 8; ++d) {
    if (from.x + kDirs[d].x == to.x && from.y + kDirs[d].y == to.y) return d;
  }
  return -1;
}

// Moore-neighbour trace of the component labelled `label`, starting at its
// first pixel in raster order.
std::vector<Point> trace_boundary(const std::vector<int>& labels, int h, int w, int label, Point start) {
  auto inside = [&](Point p) {
    return 0 <= p.x && p.x < w && 0 <= p.y && p.y < h && labels[static_cast<std::size_t>(p.y) * w + p.x] == label;
  };
  std::vector<Point> contour{start};
  Point current = start;
  int backtrack = 4;  // west neighbour is background for the raster-first pixel
  std::optional<Point> second;
  const std::size_t limit = static_cast<std::size_t>(h) * w * 8 + 8;
  for (std::size_t step = 0; step < limit; ++step) {
    int found = -1;
    for (int k = 1; k <= 8; ++k) {
      const int d = (backtrack + k) % 8;
      const Point n{current.x + kDirs[d].x, current.y + kDirs[d].y};
      if (inside(n)) {
        found = d;
        break;
      }
    }
    if (found < 0) break;  // isolated pixel
    const Point next{current.x + kDirs[found].x, current.y + kDirs[found].y};
    const int prev_dir = (found + 7) % 8;
    const Point background{current.x + kDirs[prev_dir].x, current.y + kDirs[prev_dir].y};
    if (current == start && second && next == *second) break;
    if (!second) second = next;
    backtrack = direction_of(next, background);
    current = next;
    contour.push_back(current);
  }
  if (contour.size() > 1 && contour.back() == start) contour.pop_back();
  return contour;
}

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0) t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

// Douglas-Peucker over pts[lo..hi] inclusive; appends kept points except pts[hi].
void simplify_open(const std::vector<Point>& pts, std::size_t lo, std::size_t hi, double tol, std::vector<Point>& out) {
  double best = -1.0;
  std::size_t best_i = lo;
  for (std::size_t i = lo + 1; i < hi; ++i) {
    const double d = segment_distance(pts[i], pts[lo], pts[hi]);
    if (d > best) {
      best = d;
      best_i = i;
    }
  }
  if (best > tol) {
    simplify_open(pts, lo, best_i, tol, out);
    simplify_open(pts, best_i, hi, tol, out);
  } else {
    out.push_back(pts[lo]);
  }
}

std::vector<Point> simplify_closed(const std::vector<Point>& ring, double tol) {
  if (ring.size() <= 3) return ring;
  std::size_t far = 0;
  long best = -1;
  for (std::size_t i = 1; i < ring.size(); ++i) {
    const long dx = ring[i].x - ring[0].x, dy = ring[i].y - ring[0].y;
    if (dx * dx + dy * dy > best) {
      best = dx * dx + dy * dy;
      far = i;
    }
  }
  std::vector<Point> closed(ring);
  closed.push_back(ring.front());
  std::vector<Point> out;
  simplify_open(closed, 0, far, tol, out);
  simplify_open(closed, far, closed.size() - 1, tol, out);
  std::vector<Point> dedup;
  for (const auto& p : out) {
    if (dedup.empty() || !(dedup.back() == p)) dedup.push_back(p);
  }
  while (dedup.size() > 1 && dedup.front() == dedup.back()) dedup.pop_back();
  return dedup;
}

}  // namespace

std::vector<Polygon> contour_polygon(const BinaryMask& mask, double simplify_tolerance) {
  if (mask.empty()) throw Error(ErrorCode::kEmptyMask, "cannot trace contours of an empty mask");
  const int h = mask.height(), w = mask.width();
  std::vector<int> labels(static_cast<std::size_t>(h) * w, 0);
  std::vector<Polygon> polygons;
  int next_label = 0;
  std::vector<Point> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.get(y, x) || labels[static_cast<std::size_t>(y) * w + x] != 0) continue;
      const int label = ++next_label;
      stack.assign(1, Point{x, y});
      labels[static_cast<std::size_t>(y) * w + x] = label;
      while (!stack.empty()) {
        const Point p = stack.back();
        stack.pop_back();
        for (const auto& d : kDirs) {
          const Point n{p.x + d.x, p.y + d.y};
          if (!mask.in_bounds(n.y, n.x) || !mask.get(n.y, n.x)) continue;
          auto& l = labels[static_cast<std::size_t>(n.y) * w + n.x];
          if (l == 0) {
            l = label;
            stack.push_back(n);
          }
        }
      }
      auto ring = trace_boundary(labels, h, w, label, Point{x, y});
      polygons.push_back(Polygon{simplify_closed(ring, simplify_tolerance)});
    }
  }
  return polygons;
}

BinaryMask rasterize_polyline(const std::vector<Point>& vertices, int height, int width) {
  BinaryMask out(height, width);
  auto plot = [&](int x, int y) {
    if (out.in_bounds(y, x)) out.set(y, x);
  };
  if (vertices.size() == 1) plot(vertices[0].x, vertices[0].y);
  for (std::size_t i = 0; i + 1 < vertices.size(); ++i) {
    int x0 = vertices[i].x, y0 = vertices[i].y;
    const int x1 = vertices[i + 1].x, y1 = vertices[i + 1].y;
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      plot(x0, y0);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
  return out;
}

BinaryMask rasterize_polygon(const std::vector<Point>& vertices, int height, int width) {
  BinaryMask out(height, width);
  if (vertices.empty()) return out;
  std::vector<double> xs;
  const std::size_t n = vertices.size();
  for (int y = 0; y < height; ++y) {
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Point a = vertices[i], b = vertices[(i + 1) % n];
      if ((a.y <= y && y < b.y) || (b.y <= y && y < a.y)) {
        xs.push_back(a.x + static_cast<double>(y - a.y) * (b.x - a.x) / static_cast<double>(b.y - a.y));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
      const int x0 = std::max(0, static_cast<int>(std::ceil(xs[i])));
      const int x1 = std::min(width - 1, static_cast<int>(std::floor(xs[i + 1])));
      for (int x = x0; x <= x1; ++x) out.set(y, x);
    }
  }
  auto closed = vertices;
  closed.push_back(vertices.front());
  return mask_or(out, rasterize_polyline(closed, height, width));
}

void to_json(nlohmann::json& j, const RleMask& rle) {
  j = nlohmann::json{{"height", rle.height}, {"width", rle.width}, {"counts", rle.counts}};
}

void from_json(const nlohmann::json& j, RleMask& rle) {
  try {
    j.at("height").get_to(rle.height);
    j.at("width").get_to(rle.width);
    j.at("counts").get_to(rle.counts);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedRle, fmt::format("bad RLE JSON: {}", e.what()));
  }
}

void to_json(nlohmann::json& j, const Box& box) {
  j = nlohmann::json{{"x_min", box.x_min}, {"y_min", box.y_min}, {"x_max", box.x_max}, {"y_max", box.y_max}};
}

void from_json(const nlohmann::json& j, Box& box) {
  j.at("x_min").get_to(box.x_min);
  j.at("y_min").get_to(box.y_min);
  j.at("x_max").get_to(box.x_max);
  j.at("y_max").get_to(box.y_max);
}

}  // namespace catv
