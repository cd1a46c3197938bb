#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "catv/captioner.hpp"
#include "catv/injection.hpp"
#include "catv/segmenter.hpp"
#include "catv/temporal.hpp"

namespace catv {

struct BackendEndpoints {
  std::string segmenter;
  std::string temporal;
  std::string captioner;

  bool any() const { return !segmenter.empty() || !temporal.empty() || !captioner.empty(); }
  friend bool operator==(const BackendEndpoints&, const BackendEndpoints&) = default;
};

struct PipelineConfig {
  InjectionStyle injection_style;
  bool stabilize = true;
  bool temporal_fallback = true;
  int captioner_frame_budget = 16;
  int retry_limit = 2;
  bool strict_parse = false;
  BackendEndpoints endpoints;

  void validate() const;
  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);
// SHA-256 over the canonical (key-sorted) JSON form.
std::string config_hash(const PipelineConfig& config);

struct Backends {
  std::shared_ptr<SegmenterBackend> segmenter;
  std::shared_ptr<TemporalBackend> temporal;
  std::shared_ptr<CaptionerBackend> captioner;
};

struct Provenance {
  std::string segmenter;
  std::string temporal;
  std::string captioner;
  std::string config_hash;
  std::map<std::string, double> stage_ms;  // wall times; excluded from canonical form
};

struct CaptionResult {
  StructuredCaption structured;
  Timeline timeline;
  std::string masklet_ref;
  Provenance provenance;
  int caption_retries = 0;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const CaptionResult& r, bool include_timings);
CaptionResult caption_result_from_json(const nlohmann::json& j);
// Byte-stable serialization: everything except wall times.
std::string canonical_json(const CaptionResult& r);

std::string masklet_ref(const Masklet& masklet);

struct MaskletPreview {
  int anchor_frame = 0;
  RleMask anchor_mask;
  std::vector<std::optional<Box>> boxes;
  std::vector<std::string> warnings;
  std::string masklet_ref;
};

nlohmann::json to_json(const MaskletPreview& p);

inline constexpr std::string_view kChatPreamble =
    "Please pay attention to the object highlighted (HO) in the video frames and answer the user's question "
    "about the HO. Keep the HO as the subject of your answer.";

struct SessionState {
  std::string session_id;
  std::string clip_id;
  std::shared_ptr<const VideoClip> clip;
  std::optional<VisualPrompt> prompt;
  std::optional<Masklet> masklet;
  std::optional<Timeline> timeline;
  std::optional<CaptionResult> last_result;
  std::vector<ChatTurn> chat_history;
  bool masklet_stabilized = false;
};

// One interactive captioning session. Every public operation runs under
// the session mutex.
class Session {
 public:
  Session(std::string session_id, std::string clip_id, std::shared_ptr<const VideoClip> clip, Backends backends);

  const std::string& id() const noexcept { return id_; }

  MaskletPreview select_object(const GestureRecord& gesture, bool stabilize = true);
  CaptionResult run_pipeline(const PipelineConfig& config);
  std::string chat_turn(std::string_view user_message);

  // Frame t with the current masklet injected (raw frame without one).
  Frame render_frame(int t, const std::optional<InjectionStyle>& style) const;

  void set_backends(Backends backends);
  SessionState snapshot() const;

 private:
  std::string id_;
  mutable std::mutex mutex_;
  SessionState state_;
  Backends backends_;
  std::shared_ptr<const VideoClip> injected_;
  PipelineConfig last_config_;
};

// Clip store plus live sessions; ids are sequential and deterministic.
class SessionManager {
 public:
  explicit SessionManager(Backends defaults) : defaults_(std::move(defaults)) {}

  std::string add_clip(VideoClip clip);
  std::shared_ptr<const VideoClip> clip(const std::string& clip_id) const;
  std::shared_ptr<Session> create_session(const std::string& clip_id);
  std::shared_ptr<Session> session(const std::string& session_id) const;
  const Backends& default_backends() const noexcept { return defaults_; }

 private:
  mutable std::mutex mutex_;
  Backends defaults_;
  std::map<std::string, std::shared_ptr<const VideoClip>> clips_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  int next_clip_ = 1;
  int next_session_ = 1;
};

}  // namespace catv
