#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "catv/captioner.hpp"
#include "catv/media.hpp"
#include "catv/segmenter.hpp"
#include "catv/temporal.hpp"

// JSON shapes exchanged with backend adapters. "Wire" forms carry PNG
// frames; "canonical" forms replace each frame by its content digest and
// are what trace digests are computed over.
namespace catv::gateway {

enum class BackendKind { kSegmenter, kTemporal, kCaptioner };

std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view name);

// Request digest: SHA-256 of the key-sorted canonical JSON.
std::string request_digest(const nlohmann::json& canonical_request);

nlohmann::json segment_wire_request(const SegmentRequest& request);
nlohmann::json segment_canonical_request(const SegmentRequest& request);
nlohmann::json segment_response_json(const SegmentResponse& response);
SegmentResponse segment_response_from_json(const nlohmann::json& j);

// Temporal requests carry a uniform sample of at most `frame_budget` frames.
nlohmann::json temporal_wire_request(const VideoClip& clip, int frame_budget);
nlohmann::json temporal_canonical_request(const VideoClip& clip);
nlohmann::json events_json(const std::vector<RawEvent>& events);
std::vector<RawEvent> events_from_json(const nlohmann::json& j);

nlohmann::json caption_wire_request(const CaptionRequest& request);
nlohmann::json caption_canonical_request(const CaptionRequest& request);

// Clip <-> {"fps", "frames": [png base64...]}, lossless.
nlohmann::json clip_json(const VideoClip& clip);
VideoClip clip_from_json(const nlohmann::json& j);

Frame frame_from_png_base64(const std::string& b64, int index = 0, double timestamp = 0.0);
std::string frame_to_png_base64(const Frame& frame);

}  // namespace catv::gateway
