#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

namespace catv {

// Coordinates everywhere: x = column, y = row, origin top-left.
struct Point {
  int x = 0;
  int y = 0;

  friend bool operator==(const Point&, const Point&) = default;
};

// Inclusive pixel box.
struct Box {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  int width() const noexcept { return x_max - x_min + 1; }
  int height() const noexcept { return y_max - y_min + 1; }
  bool within(int frame_height, int frame_width) const noexcept {
    return 0 <= x_min && x_min <= x_max && x_max < frame_width && 0 <= y_min && y_min <= y_max &&
           y_max < frame_height;
  }

  friend bool operator==(const Box&, const Box&) = default;
};

struct Polygon {
  std::vector<Point> vertices;

  friend bool operator==(const Polygon&, const Polygon&) = default;
};

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width);
  BinaryMask(int height, int width, std::vector<std::uint8_t> bits);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  bool get(int y, int x) const noexcept { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int y, int x, bool v = true) noexcept {
    bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
  }
  bool in_bounds(int y, int x) const noexcept { return 0 <= y && y < height_ && 0 <= x && x < width_; }
  // Out-of-bounds reads as 0.
  bool get_or_zero(int y, int x) const noexcept { return in_bounds(y, x) && get(y, x); }

  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }
  std::size_t count() const noexcept;
  bool empty() const noexcept { return count() == 0; }

  // Sets every pixel inside the inclusive box (clipped to bounds).
  void fill_box(const Box& box);

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Row-major run lengths, zeros first. The first count may be 0.
struct RleMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

RleMask rle_encode(const BinaryMask& mask);
BinaryMask rle_decode(const RleMask& rle);

std::optional<Box> bbox_of(const BinaryMask& mask);
double iou(const BinaryMask& a, const BinaryMask& b);

enum class MorphOp { kDilate, kErode };

// Square structuring element of side 2*radius+1. Pixels outside the mask's
// bounds count as background.
BinaryMask morphology(const BinaryMask& mask, MorphOp op, int radius);
inline BinaryMask dilate(const BinaryMask& mask, int radius) { return morphology(mask, MorphOp::kDilate, radius); }
inline BinaryMask erode(const BinaryMask& mask, int radius) { return morphology(mask, MorphOp::kErode, radius); }

// Pixel-wise set operations on equally sized masks.
BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_minus(const BinaryMask& a, const BinaryMask& b);

// 8-connected components, each traced along its outer boundary (pixel
// centres) and simplified with Douglas-Peucker at `simplify_tolerance`.
// Components thinner than two pixels yield fewer than three vertices.
std::vector<Polygon> contour_polygon(const BinaryMask& mask, double simplify_tolerance);

// Even-odd scanline fill sampled at pixel centres.
BinaryMask rasterize_polygon(const std::vector<Point>& vertices, int height, int width);
// 1-px Bresenham polyline.
BinaryMask rasterize_polyline(const std::vector<Point>& vertices, int height, int width);

// JSON interchange: {"height", "width", "counts"}.
void to_json(nlohmann::json& j, const RleMask& rle);
void from_json(const nlohmann::json& j, RleMask& rle);
void to_json(nlohmann::json& j, const Box& box);
void from_json(const nlohmann::json& j, Box& box);

}  // namespace catv
