#pragma once

#include <array>
#include <string_view>

#include <json.hpp>

#include "catv/mask.hpp"
#include "catv/media.hpp"
#include "catv/segmenter.hpp"

namespace catv {

enum class StyleKind { kBoundingBox, kBlur, kCircle, kColorBlock, kHalo, kMask, kPolygon, kBboxPlusMask };

inline constexpr std::array<StyleKind, 8> kAllStyles{StyleKind::kBoundingBox, StyleKind::kBlur,    StyleKind::kCircle,
                                                     StyleKind::kColorBlock,  StyleKind::kHalo,    StyleKind::kMask,
                                                     StyleKind::kPolygon,     StyleKind::kBboxPlusMask};
// The seven single styles, in side-by-side sheet order.
inline constexpr std::array<StyleKind, 7> kSheetStyles{StyleKind::kBoundingBox, StyleKind::kBlur, StyleKind::kCircle,
                                                       StyleKind::kColorBlock,  StyleKind::kHalo, StyleKind::kMask,
                                                       StyleKind::kPolygon};

std::string_view to_string(StyleKind kind);
StyleKind style_kind_from_string(std::string_view name);

struct StyleParams {
  Rgb stroke_color{255, 0, 0};
  int stroke_width = 3;
  Rgb overlay_color{0, 0, 255};
  double overlay_alpha = 0.4;
  int blur_radius = 7;
  int halo_radius = 8;
  double simplify_tolerance = 1.0;

  void validate() const;
  friend bool operator==(const StyleParams&, const StyleParams&) = default;
};

struct InjectionStyle {
  StyleKind kind = StyleKind::kBboxPlusMask;
  StyleParams params;

  friend bool operator==(const InjectionStyle&, const InjectionStyle&) = default;
};

void to_json(nlohmann::json& j, const InjectionStyle& s);
void from_json(const nlohmann::json& j, InjectionStyle& s);

// Renders the highlight for `mask` into a copy of `frame`. Empty masks leave
// the frame untouched.
Frame inject(const Frame& frame, const BinaryMask& mask, const InjectionStyle& style);

// Per-frame inject over a clip; frames are rendered in parallel.
VideoClip inject_video(const VideoClip& clip, const Masklet& masklet, const InjectionStyle& style);

// Mean |original - rendered| over the three channels inside erode(mask, margin).
double interior_color_shift(const Frame& original, const Frame& rendered, const BinaryMask& mask, int margin);

// Seven single styles side by side on one frame.
Frame render_style_sheet(const Frame& frame, const BinaryMask& mask, const StyleParams& params = {}, int gap = 4);

// Smallest circle enclosing every set pixel centre (Welzl).
struct Circle {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;
};
Circle minimal_enclosing_circle(const BinaryMask& mask);

}  // namespace catv
