#include "catv/gateway/wire.hpp"

#include <fmt/format.h>

#include "catv/digest.hpp"
#include "catv/error.hpp"

namespace catv::gateway {

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::kSegmenter: return "segmenter";
    case BackendKind::kTemporal: return "temporal";
    case BackendKind::kCaptioner: return "captioner";
  }
  return "unknown";
}

BackendKind backend_kind_from_string(std::string_view name) {
  if (name == "segmenter") return BackendKind::kSegmenter;
  if (name == "temporal") return BackendKind::kTemporal;
  if (name == "captioner") return BackendKind::kCaptioner;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown backend kind '{}'", name));
}

std::string request_digest(const nlohmann::json& canonical_request) {
  return sha256_hex(canonical_request.dump());
}

std::string frame_to_png_base64(const Frame& frame) { return base64_encode(encode_png(frame)); }

Frame frame_from_png_base64(const std::string& b64, int index, double timestamp) {
  return decode_png(base64_decode(b64), index, timestamp);
}

namespace {

nlohmann::json prompt_or_null(const VisualPrompt* p) { return p ? nlohmann::json(*p) : nlohmann::json(nullptr); }

nlohmann::json history_json(std::span<const ChatTurn> history) {
  auto h = nlohmann::json::array();
  for (const auto& t : history) h.push_back(t);
  return h;
}

}  // namespace

nlohmann::json segment_wire_request(const SegmentRequest& request) {
  return nlohmann::json{{"frame_png_base64", frame_to_png_base64(*request.frame)},
                        {"frame_index", request.frame->index()},
                        {"prompt", prompt_or_null(request.prompt)},
                        {"context_token", request.context_token}};
}

nlohmann::json segment_canonical_request(const SegmentRequest& request) {
  return nlohmann::json{{"frame", frame_digest(*request.frame)},
                        {"frame_index", request.frame->index()},
                        {"prompt", prompt_or_null(request.prompt)},
                        {"context_token", request.context_token}};
}

nlohmann::json segment_response_json(const SegmentResponse& response) {
  return nlohmann::json{{"rle_mask", rle_encode(response.mask)},
                        {"confidence", response.confidence},
                        {"context_token", response.context_token}};
}

SegmentResponse segment_response_from_json(const nlohmann::json& j) {
  SegmentResponse r;
  r.mask = rle_decode(j.at("rle_mask").get<RleMask>());
  r.confidence = j.value("confidence", 1.0);
  r.context_token = j.value("context_token", std::string{});
  return r;
}

nlohmann::json temporal_wire_request(const VideoClip& clip, int frame_budget) {
  auto frames = nlohmann::json::array();
  for (const int i : sample_frame_indices(clip.frame_count(), frame_budget, -1)) {
    frames.push_back(frame_to_png_base64(clip.frame(i)));
  }
  return nlohmann::json{{"frames_png_base64", std::move(frames)}, {"fps", clip.fps()}, {"duration", clip.duration()}};
}

nlohmann::json temporal_canonical_request(const VideoClip& clip) {
  auto frames = nlohmann::json::array();
  for (const auto& f : clip.frames()) frames.push_back(frame_digest(f));
  return nlohmann::json{{"frames", std::move(frames)}, {"fps", clip.fps()}, {"duration", clip.duration()}};
}

nlohmann::json events_json(const std::vector<RawEvent>& events) {
  auto arr = nlohmann::json::array();
  for (const auto& e : events) arr.push_back({{"start", e.start}, {"end", e.end}, {"caption", e.caption}});
  return nlohmann::json{{"events", std::move(arr)}};
}

std::vector<RawEvent> events_from_json(const nlohmann::json& j) {
  std::vector<RawEvent> out;
  for (const auto& e : j.at("events")) {
    out.push_back({e.at("start").get<double>(), e.at("end").get<double>(), e.value("caption", std::string{})});
  }
  return out;
}

nlohmann::json caption_wire_request(const CaptionRequest& request) {
  auto frames = nlohmann::json::array();
  for (const auto& f : request.frames) frames.push_back(frame_to_png_base64(f));
  return nlohmann::json{{"frames_png_base64", std::move(frames)},
                        {"prompt", std::string(request.prompt)},
                        {"history", history_json(request.history)}};
}

nlohmann::json caption_canonical_request(const CaptionRequest& request) {
  auto frames = nlohmann::json::array();
  for (const auto& f : request.frames) frames.push_back(frame_digest(f));
  return nlohmann::json{{"frames", std::move(frames)},
                        {"prompt", std::string(request.prompt)},
                        {"history", history_json(request.history)}};
}

nlohmann::json clip_json(const VideoClip& clip) {
  auto frames = nlohmann::json::array();
  for (const auto& f : clip.frames()) frames.push_back(frame_to_png_base64(f));
  return nlohmann::json{{"fps", clip.fps()}, {"frames", std::move(frames)}};
}

VideoClip clip_from_json(const nlohmann::json& j) {
  const double fps = j.at("fps").get<double>();
  std::vector<Frame> frames;
  for (const auto& b64 : j.at("frames")) {
    const int index = static_cast<int>(frames.size());
    frames.push_back(frame_from_png_base64(b64.get<std::string>(), index, index / fps));
  }
  return VideoClip(std::move(frames), fps);
}

}  // namespace catv::gateway
