#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "catv/kalman.hpp"
#include "catv/mask.hpp"
#include "catv/media.hpp"

namespace catv {

enum class PromptKind { kPointSet, kBox, kRegion };

std::string_view to_string(PromptKind kind);
PromptKind prompt_kind_from_string(std::string_view name);

struct PromptPoint {
  int x = 0;
  int y = 0;
  bool positive = true;

  friend bool operator==(const PromptPoint&, const PromptPoint&) = default;
};

// Pixel-space visual prompt on one anchor frame.
struct VisualPrompt {
  PromptKind kind = PromptKind::kPointSet;
  std::vector<PromptPoint> points;
  std::optional<Box> box;
  std::optional<BinaryMask> region;
  int anchor_frame = 0;

  // Throws kInvalidPrompt when the kind/field combination or bounds are wrong.
  void validate(int frame_height, int frame_width) const;

  friend bool operator==(const VisualPrompt&, const VisualPrompt&) = default;
};

void to_json(nlohmann::json& j, const VisualPrompt& p);
void from_json(const nlohmann::json& j, VisualPrompt& p);

// Raw UI gesture. Coordinates are in [0,1]^2 unless `normalized` is false.
// Region gestures carry either a closed lasso path, an open scribble path,
// or a pre-rasterized mask.
struct GestureRecord {
  enum class Kind { kPointSet, kBox, kLasso, kScribble, kMask };
  struct GesturePoint {
    double x = 0.0;
    double y = 0.0;
    bool positive = true;
  };

  Kind kind = Kind::kPointSet;
  bool normalized = true;
  std::vector<GesturePoint> points;  // point-set points, or lasso/scribble path
  std::optional<std::array<double, 4>> box;  // x0, y0, x1, y1
  std::optional<RleMask> mask;
  int anchor_frame = 0;
};

// Returns a list of violations; empty means the payload is acceptable.
std::vector<std::string> validate_gesture_json(const nlohmann::json& j);
GestureRecord gesture_from_json(const nlohmann::json& j);
nlohmann::json gesture_to_json(const GestureRecord& g);

VisualPrompt normalize_prompt(const GestureRecord& gesture, int frame_height, int frame_width);

struct SegmenterCapabilities {
  bool points = true;
  bool box = true;
  bool region = true;
  // Stateless backends re-prompt every frame and may be called concurrently;
  // others propagate from the anchor through the context token, in order.
  bool stateless = false;

  bool accepts(PromptKind kind) const noexcept;
};

struct SegmentRequest {
  const Frame* frame = nullptr;
  const VisualPrompt* prompt = nullptr;
  std::string context_token;
};

struct SegmentResponse {
  BinaryMask mask;
  double confidence = 1.0;
  std::string context_token;
};

class SegmenterBackend {
 public:
  virtual ~SegmenterBackend() = default;
  virtual SegmenterCapabilities capabilities() const = 0;
  virtual std::string identity() const = 0;
  // Throws on failure.
  virtual SegmentResponse segment(const SegmentRequest& request) = 0;
};

struct Masklet {
  std::string object_id;
  std::vector<BinaryMask> masks;  // one per clip frame; empty = absent
  int anchor_frame = 0;

  friend bool operator==(const Masklet&, const Masklet&) = default;
};

void to_json(nlohmann::json& j, const Masklet& m);
void from_json(const nlohmann::json& j, Masklet& m);

struct SegmentOptions {
  bool stabilize = false;
  KalmanParams kalman;
  double gate_iou = kDefaultGateIou;
  std::string object_id = "object-0";
};

struct SegmentResult {
  Masklet masklet;
  std::vector<std::optional<Box>> boxes;  // per-frame accepted box (stabilized when requested)
  std::vector<bool> outliers;
  std::vector<std::string> warnings;
};

// Segments the prompted object in every frame. Frames are visited anchor
// first, then forward to the end, then backward to frame 0; each direction
// threads its own context token starting from the anchor's.
SegmentResult segment_video(const VideoClip& clip, const VisualPrompt& prompt, SegmenterBackend& backend,
                            const SegmentOptions& options = {});

}  // namespace catv
