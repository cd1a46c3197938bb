#include "catv/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include <fmt/format.h>

#include "catv/error.hpp"

namespace catv {

std::string_view to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::kPointSet: return "point-set";
    case PromptKind::kBox: return "box";
    case PromptKind::kRegion: return "region";
  }
  return "unknown";
}

PromptKind prompt_kind_from_string(std::string_view name) {
  if (name == "point-set") return PromptKind::kPointSet;
  if (name == "box") return PromptKind::kBox;
  if (name == "region") return PromptKind::kRegion;
  throw Error(ErrorCode::kInvalidPrompt, fmt::format("unknown prompt kind '{}'", name));
}

bool SegmenterCapabilities::accepts(PromptKind kind) const noexcept {
  switch (kind) {
    case PromptKind::kPointSet: return points;
    case PromptKind::kBox: return box;
    case PromptKind::kRegion: return region;
  }
  return false;
}

void VisualPrompt::validate(int frame_height, int frame_width) const {
  auto fail = [](std::string msg) { throw Error(ErrorCode::kInvalidPrompt, std::move(msg)); };
  if (anchor_frame < 0) fail("anchor frame must be non-negative");
  switch (kind) {
    case PromptKind::kPointSet:
      if (points.empty()) fail("point prompt has no points");
      if (box || region) fail("point prompt carries box or region");
      if (std::none_of(points.begin(), points.end(), [](const auto& p) { return p.positive; })) {
        fail("point prompt needs at least one positive point");
      }
      for (const auto& p : points) {
        if (p.x < 0 || p.x >= frame_width || p.y < 0 || p.y >= frame_height) fail("point outside frame");
      }
      break;
    case PromptKind::kBox:
      if (!box || !points.empty() || region) fail("box prompt must carry exactly a box");
      if (!box->within(frame_height, frame_width)) fail("box outside frame");
      break;
    case PromptKind::kRegion:
      if (!region || !points.empty() || box) fail("region prompt must carry exactly a region");
      if (region->height() != frame_height || region->width() != frame_width) fail("region size differs from frame");
      if (region->empty()) fail("region is empty");
      break;
  }
}

void to_json(nlohmann::json& j, const VisualPrompt& p) {
  j = nlohmann::json{{"kind", to_string(p.kind)}, {"anchor_frame", p.anchor_frame}};
  if (p.kind == PromptKind::kPointSet) {
    auto pts = nlohmann::json::array();
    for (const auto& pt : p.points) pts.push_back({{"x", pt.x}, {"y", pt.y}, {"positive", pt.positive}});
    j["points"] = std::move(pts);
  }
  if (p.box) j["box"] = *p.box;
  if (p.region) j["region"] = rle_encode(*p.region);
}

void from_json(const nlohmann::json& j, VisualPrompt& p) {
  p = VisualPrompt{};
  p.kind = prompt_kind_from_string(j.at("kind").get<std::string>());
  p.anchor_frame = j.value("anchor_frame", 0);
  if (j.contains("points")) {
    for (const auto& pt : j.at("points")) {
      p.points.push_back({pt.at("x").get<int>(), pt.at("y").get<int>(), pt.value("positive", true)});
    }
  }
  if (j.contains("box")) p.box = j.at("box").get<Box>();
  if (j.contains("region")) p.region = rle_decode(j.at("region").get<RleMask>());
}

namespace {

int to_pixel(double v, int extent, bool normalized) {
  const double px = normalized ? std::floor(v * extent) : std::round(v);
  if (!std::isfinite(px)) throw Error(ErrorCode::kInvalidPrompt, "non-finite gesture coordinate");
  return static_cast<int>(std::clamp(px, 0.0, static_cast<double>(extent - 1)));
}

std::string_view gesture_kind_name(GestureRecord::Kind k) {
  switch (k) {
    case GestureRecord::Kind::kPointSet: return "point-set";
    case GestureRecord::Kind::kBox: return "box";
    default: return "region";
  }
}

}  // namespace

VisualPrompt normalize_prompt(const GestureRecord& g, int frame_height, int frame_width) {
  if (frame_height < 1 || frame_width < 1) throw Error(ErrorCode::kInvalidArgument, "frame dimensions must be positive");
  auto px = [&](double x, double y) {
    return Point{to_pixel(x, frame_width, g.normalized), to_pixel(y, frame_height, g.normalized)};
  };
  VisualPrompt p;
  p.anchor_frame = g.anchor_frame;
  switch (g.kind) {
    case GestureRecord::Kind::kPointSet: {
      if (g.points.empty()) throw Error(ErrorCode::kInvalidPrompt, "gesture has no points");
      p.kind = PromptKind::kPointSet;
      for (const auto& gp : g.points) {
        const auto q = px(gp.x, gp.y);
        p.points.push_back({q.x, q.y, gp.positive});
      }
      break;
    }
    case GestureRecord::Kind::kBox: {
      if (!g.box) throw Error(ErrorCode::kInvalidPrompt, "box gesture has no box");
      const auto a = px((*g.box)[0], (*g.box)[1]);
      const auto b = px((*g.box)[2], (*g.box)[3]);
      p.kind = PromptKind::kBox;
      p.box = Box{std::min(a.x, b.x), std::min(a.y, b.y), std::max(a.x, b.x), std::max(a.y, b.y)};
      break;
    }
    case GestureRecord::Kind::kLasso:
    case GestureRecord::Kind::kScribble: {
      if (g.points.empty()) throw Error(ErrorCode::kInvalidPrompt, "gesture has no points");
      std::vector<Point> path;
      for (const auto& gp : g.points) path.push_back(px(gp.x, gp.y));
      p.kind = PromptKind::kRegion;
      p.region = g.kind == GestureRecord::Kind::kLasso ? rasterize_polygon(path, frame_height, frame_width)
                                                       : rasterize_polyline(path, frame_height, frame_width);
      break;
    }
    case GestureRecord::Kind::kMask: {
      if (!g.mask) throw Error(ErrorCode::kInvalidPrompt, "mask gesture has no mask");
      auto m = rle_decode(*g.mask);
      if (m.height() != frame_height || m.width() != frame_width) {
        throw Error(ErrorCode::kInvalidPrompt, "region mask size differs from frame");
      }
      p.kind = PromptKind::kRegion;
      p.region = std::move(m);
      break;
    }
  }
  p.validate(frame_height, frame_width);
  return p;
}

std::vector<std::string> validate_gesture_json(const nlohmann::json& j) {
  std::vector<std::string> errors;
  if (!j.is_object()) return {"gesture must be a JSON object"};
  const bool normalized = !j.contains("normalized") || (j["normalized"].is_boolean() && j["normalized"].get<bool>());
  if (j.contains("normalized") && !j["normalized"].is_boolean()) errors.emplace_back("'normalized' must be boolean");
  auto check_coord = [&](const nlohmann::json& v, const std::string& where) {
    if (!v.is_number()) {
      errors.push_back(where + " must be a number");
    } else if (normalized && (v.get<double>() < 0.0 || v.get<double>() > 1.0)) {
      errors.push_back(where + " must lie in [0,1]");
    }
  };
  if (j.contains("anchor_frame") &&
      (!j["anchor_frame"].is_number_integer() || j["anchor_frame"].get<long>() < 0)) {
    errors.emplace_back("'anchor_frame' must be a non-negative integer");
  }
  if (!j.contains("kind") || !j["kind"].is_string()) {
    errors.emplace_back("'kind' must be one of point-set, box, region");
    return errors;
  }
  const auto kind = j["kind"].get<std::string>();
  if (kind == "point-set") {
    if (!j.contains("points") || !j["points"].is_array() || j["points"].empty()) {
      errors.emplace_back("point-set gesture needs a nonempty 'points' array");
    } else {
      bool any_positive = false;
      for (std::size_t i = 0; i < j["points"].size(); ++i) {
        const auto& pt = j["points"][i];
        const auto where = fmt::format("points[{}]", i);
        if (!pt.is_object()) {
          errors.push_back(where + " must be an object");
          continue;
        }
        check_coord(pt.value("x", nlohmann::json()), where + ".x");
        check_coord(pt.value("y", nlohmann::json()), where + ".y");
        if (pt.contains("positive") && !pt["positive"].is_boolean()) errors.push_back(where + ".positive must be boolean");
        any_positive |= pt.value("positive", true) == true;
      }
      if (!any_positive) errors.emplace_back("point-set gesture needs at least one positive point");
    }
  } else if (kind == "box") {
    if (!j.contains("box") || !j["box"].is_object()) {
      errors.emplace_back("box gesture needs a 'box' object");
    } else {
      for (const char* k : {"x0", "y0", "x1", "y1"}) check_coord(j["box"].value(k, nlohmann::json()), fmt::format("box.{}", k));
    }
  } else if (kind == "region") {
    const bool has_path = j.contains("path");
    const bool has_mask = j.contains("mask");
    if (has_path == has_mask) {
      errors.emplace_back("region gesture needs exactly one of 'path' or 'mask'");
    } else if (has_path) {
      const auto& path = j["path"];
      const bool closed = j.value("closed", true);
      if (!path.is_array() || path.size() < (closed ? 3u : 1u)) {
        errors.emplace_back(closed ? "lasso 'path' needs at least 3 points" : "scribble 'path' needs at least 1 point");
      } else {
        for (std::size_t i = 0; i < path.size(); ++i) {
          if (!path[i].is_array() || path[i].size() != 2) {
            errors.push_back(fmt::format("path[{}] must be [x, y]", i));
            continue;
          }
          check_coord(path[i][0], fmt::format("path[{}][0]", i));
          check_coord(path[i][1], fmt::format("path[{}][1]", i));
        }
      }
    } else {
      const auto& m = j["mask"];
      if (!m.is_object() || !m.contains("height") || !m.contains("width") || !m.contains("counts") ||
          !m["counts"].is_array()) {
        errors.emplace_back("'mask' must be {height, width, counts}");
      }
    }
  } else {
    errors.push_back(fmt::format("unknown gesture kind '{}'", kind));
  }
  return errors;
}

GestureRecord gesture_from_json(const nlohmann::json& j) {
  if (auto errors = validate_gesture_json(j); !errors.empty()) {
    std::string msg = "invalid gesture:";
    for (const auto& e : errors) msg += " " + e + ";";
    throw Error(ErrorCode::kInvalidPrompt, msg);
  }
  GestureRecord g;
  g.normalized = j.value("normalized", true);
  g.anchor_frame = j.value("anchor_frame", 0);
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "point-set") {
    g.kind = GestureRecord::Kind::kPointSet;
    for (const auto& pt : j.at("points")) {
      g.points.push_back({pt.at("x").get<double>(), pt.at("y").get<double>(), pt.value("positive", true)});
    }
  } else if (kind == "box") {
    g.kind = GestureRecord::Kind::kBox;
    const auto& b = j.at("box");
    g.box = {b.at("x0").get<double>(), b.at("y0").get<double>(), b.at("x1").get<double>(), b.at("y1").get<double>()};
  } else if (j.contains("path")) {
    g.kind = j.value("closed", true) ? GestureRecord::Kind::kLasso : GestureRecord::Kind::kScribble;
    for (const auto& p : j.at("path")) g.points.push_back({p[0].get<double>(), p[1].get<double>(), true});
  } else {
    g.kind = GestureRecord::Kind::kMask;
    g.mask = j.at("mask").get<RleMask>();
  }
  return g;
}

nlohmann::json gesture_to_json(const GestureRecord& g) {
  nlohmann::json j{{"kind", gesture_kind_name(g.kind)}, {"normalized", g.normalized}, {"anchor_frame", g.anchor_frame}};
  switch (g.kind) {
    case GestureRecord::Kind::kPointSet: {
      auto pts = nlohmann::json::array();
      for (const auto& p : g.points) pts.push_back({{"x", p.x}, {"y", p.y}, {"positive", p.positive}});
      j["points"] = std::move(pts);
      break;
    }
    case GestureRecord::Kind::kBox:
      if (g.box) j["box"] = {{"x0", (*g.box)[0]}, {"y0", (*g.box)[1]}, {"x1", (*g.box)[2]}, {"y1", (*g.box)[3]}};
      break;
    case GestureRecord::Kind::kLasso:
    case GestureRecord::Kind::kScribble: {
      auto path = nlohmann::json::array();
      for (const auto& p : g.points) path.push_back({p.x, p.y});
      j["path"] = std::move(path);
      j["closed"] = g.kind == GestureRecord::Kind::kLasso;
      break;
    }
    case GestureRecord::Kind::kMask:
      if (g.mask) j["mask"] = *g.mask;
      break;
  }
  return j;
}

void to_json(nlohmann::json& j, const Masklet& m) {
  auto masks = nlohmann::json::array();
  for (const auto& mask : m.masks) masks.push_back(rle_encode(mask));
  j = nlohmann::json{{"object_id", m.object_id}, {"anchor_frame", m.anchor_frame}, {"masks", std::move(masks)}};
}

void from_json(const nlohmann::json& j, Masklet& m) {
  m.object_id = j.at("object_id").get<std::string>();
  m.anchor_frame = j.at("anchor_frame").get<int>();
  m.masks.clear();
  for (const auto& r : j.at("masks")) m.masks.push_back(rle_decode(r.get<RleMask>()));
}

namespace {

struct FrameOutcome {
  std::optional<BinaryMask> mask;
  std::string token;
  std::string error;
};

FrameOutcome call_backend(SegmenterBackend& backend, const Frame& frame, const VisualPrompt& prompt,
                          const std::string& token) {
  FrameOutcome out;
  try {
    auto resp = backend.segment(SegmentRequest{&frame, &prompt, token});
    if (resp.mask.height() != frame.height() || resp.mask.width() != frame.width()) {
      out.error = fmt::format("mask {}x{} does not match frame {}x{}", resp.mask.height(), resp.mask.width(),
                              frame.height(), frame.width());
      return out;
    }
    out.mask = std::move(resp.mask);
    out.token = std::move(resp.context_token);
  } catch (const std::exception& e) {
    rethrow_if_replay_miss(e);
    out.error = e.what();
  }
  return out;
}

}  // namespace

SegmentResult segment_video(const VideoClip& clip, const VisualPrompt& prompt, SegmenterBackend& backend,
                            const SegmentOptions& options) {
  if (clip.empty()) throw Error(ErrorCode::kEmptyVideo, "clip has no frames", "segment");
  if (prompt.anchor_frame < 0 || prompt.anchor_frame >= clip.frame_count()) {
    throw Error(ErrorCode::kRange,
                fmt::format("anchor frame {} outside clip of {} frames", prompt.anchor_frame, clip.frame_count()),
                "segment");
  }
  prompt.validate(clip.height(), clip.width());
  const auto caps = backend.capabilities();
  if (!caps.accepts(prompt.kind)) {
    throw Error(ErrorCode::kSegmentationFailed,
                fmt::format("backend '{}' does not accept {} prompts", backend.identity(), to_string(prompt.kind)),
                "segment");
  }

  const int n = clip.frame_count();
  const int anchor = prompt.anchor_frame;
  std::vector<FrameOutcome> outcomes(static_cast<std::size_t>(n));

  if (caps.stateless) {
    std::vector<std::future<FrameOutcome>> pending;
    pending.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
      pending.push_back(std::async(std::launch::async, [&, t] {
        return call_backend(backend, clip.frame(t), prompt, std::string{});
      }));
    }
    for (int t = 0; t < n; ++t) outcomes[static_cast<std::size_t>(t)] = pending[static_cast<std::size_t>(t)].get();
    if (!outcomes[static_cast<std::size_t>(anchor)].mask) {
      throw Error(ErrorCode::kSegmentationFailed,
                  fmt::format("backend failed on anchor frame {}: {}", anchor, outcomes[static_cast<std::size_t>(anchor)].error),
                  "segment");
    }
  } else {
    auto& first = outcomes[static_cast<std::size_t>(anchor)];
    first = call_backend(backend, clip.frame(anchor), prompt, std::string{});
    if (!first.mask) {
      throw Error(ErrorCode::kSegmentationFailed,
                  fmt::format("backend failed on anchor frame {}: {}", anchor, first.error), "segment");
    }
    for (const int step : {1, -1}) {
      std::string token = first.token;
      for (int t = anchor + step; t >= 0 && t < n; t += step) {
        auto& o = outcomes[static_cast<std::size_t>(t)];
        o = call_backend(backend, clip.frame(t), prompt, token);
        if (o.mask) token = o.token;
      }
    }
  }

  SegmentResult result;
  result.masklet.object_id = options.object_id;
  result.masklet.anchor_frame = anchor;
  result.masklet.masks.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    auto& o = outcomes[static_cast<std::size_t>(t)];
    if (!o.mask) {
      result.warnings.push_back(fmt::format("frame {}: segmenter failed ({}); using empty mask", t, o.error));
      result.masklet.masks.emplace_back(clip.height(), clip.width());
    } else {
      result.masklet.masks.push_back(std::move(*o.mask));
    }
  }

  result.outliers.assign(static_cast<std::size_t>(n), false);
  result.boxes.resize(static_cast<std::size_t>(n));
  std::vector<std::optional<Box>> raw(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) raw[static_cast<std::size_t>(t)] = bbox_of(result.masklet.masks[static_cast<std::size_t>(t)]);

  if (options.stabilize && std::any_of(raw.begin(), raw.end(), [](const auto& b) { return b.has_value(); })) {
    const auto track = stabilize_track(std::span<const std::optional<Box>>(raw), options.kalman, options.gate_iou);
    for (int t = 0; t < n; ++t) {
      const auto i = static_cast<std::size_t>(t);
      if (!raw[i]) continue;
      if (track.outlier[i] && t != anchor) {
        result.outliers[i] = true;
        result.warnings.push_back(fmt::format("frame {}: mask rejected by motion gate", t));
        result.masklet.masks[i] = BinaryMask(clip.height(), clip.width());
        continue;
      }
      result.boxes[i] = track.boxes[i] ? track.boxes[i]->to_box(clip.height(), clip.width()) : raw[i];
    }
  } else {
    result.boxes = std::move(raw);
  }
  return result;
}

}  // namespace catv
