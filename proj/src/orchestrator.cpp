#include "catv/orchestrator.hpp"

#include <chrono>
#include <future>

#include <fmt/format.h>

#include "catv/digest.hpp"
#include "catv/error.hpp"

namespace catv {

void PipelineConfig::validate() const {
  if (captioner_frame_budget < 1) throw Error(ErrorCode::kInvalidArgument, "captioner_frame_budget must be >= 1");
  if (retry_limit < 0) throw Error(ErrorCode::kInvalidArgument, "retry_limit must be >= 0");
  injection_style.params.validate();
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = nlohmann::json{{"injection_style", c.injection_style},
                     {"stabilize", c.stabilize},
                     {"temporal_fallback", c.temporal_fallback},
                     {"captioner_frame_budget", c.captioner_frame_budget},
                     {"retry_limit", c.retry_limit},
                     {"strict_parse", c.strict_parse},
                     {"endpoints",
                      {{"segmenter", c.endpoints.segmenter},
                       {"temporal", c.endpoints.temporal},
                       {"captioner", c.endpoints.captioner}}}};
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  c = PipelineConfig{};
  if (j.contains("injection_style")) {
    c.injection_style = j.at("injection_style").get<InjectionStyle>();
  } else if (j.contains("style")) {
    c.injection_style.kind = style_kind_from_string(j.at("style").get<std::string>());
  }
  c.stabilize = j.value("stabilize", c.stabilize);
  c.temporal_fallback = j.value("temporal_fallback", c.temporal_fallback);
  c.captioner_frame_budget = j.value("captioner_frame_budget", c.captioner_frame_budget);
  c.retry_limit = j.value("retry_limit", c.retry_limit);
  c.strict_parse = j.value("strict_parse", c.strict_parse);
  if (j.contains("endpoints")) {
    const auto& e = j.at("endpoints");
    c.endpoints.segmenter = e.value("segmenter", std::string{});
    c.endpoints.temporal = e.value("temporal", std::string{});
    c.endpoints.captioner = e.value("captioner", std::string{});
  }
  c.validate();
}

std::string config_hash(const PipelineConfig& config) {
  return sha256_hex(nlohmann::json(config).dump());
}

nlohmann::json to_json(const CaptionResult& r, bool include_timings) {
  nlohmann::json prov{{"segmenter", r.provenance.segmenter},
                      {"temporal", r.provenance.temporal},
                      {"captioner", r.provenance.captioner},
                      {"config_hash", r.provenance.config_hash}};
  if (include_timings) prov["stage_ms"] = r.provenance.stage_ms;
  return nlohmann::json{{"structured", r.structured},   {"timeline", r.timeline},
                        {"masklet_ref", r.masklet_ref}, {"provenance", std::move(prov)},
                        {"caption_retries", r.caption_retries}, {"warnings", r.warnings}};
}

CaptionResult caption_result_from_json(const nlohmann::json& j) {
  CaptionResult r;
  r.structured = j.at("structured").get<StructuredCaption>();
  r.timeline = j.at("timeline").get<Timeline>();
  r.masklet_ref = j.at("masklet_ref").get<std::string>();
  const auto& p = j.at("provenance");
  r.provenance.segmenter = p.at("segmenter").get<std::string>();
  r.provenance.temporal = p.at("temporal").get<std::string>();
  r.provenance.captioner = p.at("captioner").get<std::string>();
  r.provenance.config_hash = p.at("config_hash").get<std::string>();
  if (p.contains("stage_ms")) r.provenance.stage_ms = p.at("stage_ms").get<std::map<std::string, double>>();
  r.caption_retries = j.value("caption_retries", 0);
  r.warnings = j.value("warnings", std::vector<std::string>{});
  return r;
}

std::string canonical_json(const CaptionResult& r) { return to_json(r, false).dump(); }

std::string masklet_ref(const Masklet& masklet) {
  return "masklet:" + sha256_hex(nlohmann::json(masklet).dump());
}

nlohmann::json to_json(const MaskletPreview& p) {
  auto boxes = nlohmann::json::array();
  for (const auto& b : p.boxes) boxes.push_back(b ? nlohmann::json(*b) : nlohmann::json(nullptr));
  return nlohmann::json{{"anchor_frame", p.anchor_frame},
                        {"anchor_rle", p.anchor_mask},
                        {"boxes", std::move(boxes)},
                        {"warnings", p.warnings},
                        {"masklet_ref", p.masklet_ref}};
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

void require_backends(const Backends& b) {
  if (!b.segmenter || !b.temporal || !b.captioner) {
    throw Error(ErrorCode::kPrecondition, "session is missing a backend");
  }
}

// Re-tags errors thrown inside a stage.
template <typename F>
auto staged(std::string_view stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError& e) {
    if (!e.stage().empty()) throw;
    throw ParseError(e.what(), e.raw(), std::string(stage));
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(std::string(stage));
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, e.what(), std::string(stage));
  }
}

}  // namespace

Session::Session(std::string session_id, std::string clip_id, std::shared_ptr<const VideoClip> clip, Backends backends)
    : id_(std::move(session_id)), backends_(std::move(backends)) {
  state_.session_id = id_;
  state_.clip_id = std::move(clip_id);
  state_.clip = std::move(clip);
}

void Session::set_backends(Backends backends) {
  std::lock_guard lock(mutex_);
  backends_ = std::move(backends);
}

SessionState Session::snapshot() const {
  std::lock_guard lock(mutex_);
  return state_;
}

MaskletPreview Session::select_object(const GestureRecord& gesture, bool stabilize) {
  std::lock_guard lock(mutex_);
  if (!state_.clip) throw Error(ErrorCode::kPrecondition, "session has no video", "segment");
  if (!backends_.segmenter) throw Error(ErrorCode::kPrecondition, "session has no segmenter backend", "segment");
  const auto& clip = *state_.clip;
  if (gesture.anchor_frame < 0 || gesture.anchor_frame >= clip.frame_count()) {
    throw Error(ErrorCode::kRange,
                fmt::format("gesture on frame {} outside clip of {} frames", gesture.anchor_frame, clip.frame_count()),
                "segment");
  }
  auto prompt = staged("segment", [&] { return normalize_prompt(gesture, clip.height(), clip.width()); });
  SegmentOptions options;
  options.stabilize = stabilize;
  auto seg = staged("segment", [&] { return segment_video(clip, prompt, *backends_.segmenter, options); });

  state_.prompt = std::move(prompt);
  state_.masklet = seg.masklet;
  state_.masklet_stabilized = stabilize;
  state_.timeline.reset();
  state_.last_result.reset();
  state_.chat_history.clear();
  injected_.reset();

  MaskletPreview preview;
  preview.anchor_frame = seg.masklet.anchor_frame;
  preview.anchor_mask = rle_encode(seg.masklet.masks[static_cast<std::size_t>(seg.masklet.anchor_frame)]);
  preview.boxes = std::move(seg.boxes);
  preview.warnings = std::move(seg.warnings);
  preview.masklet_ref = masklet_ref(seg.masklet);
  return preview;
}

CaptionResult Session::run_pipeline(const PipelineConfig& config) {
  std::lock_guard lock(mutex_);
  config.validate();
  if (!state_.clip) throw Error(ErrorCode::kPrecondition, "session has no video", "pipeline");
  if (!state_.masklet || !state_.prompt) throw Error(ErrorCode::kPrecondition, "no object selected", "pipeline");
  require_backends(backends_);
  const auto clip = state_.clip;
  CaptionResult result;

  if (config.stabilize != state_.masklet_stabilized) {
    const auto t0 = Clock::now();
    SegmentOptions options;
    options.stabilize = config.stabilize;
    auto seg = staged("segment", [&] { return segment_video(*clip, *state_.prompt, *backends_.segmenter, options); });
    state_.masklet = std::move(seg.masklet);
    state_.masklet_stabilized = config.stabilize;
    result.warnings.insert(result.warnings.end(), seg.warnings.begin(), seg.warnings.end());
    result.provenance.stage_ms["segment"] = elapsed_ms(t0);
  }
  const Masklet masklet = *state_.masklet;

  // Temporal analysis sees the raw clip; injection feeds only the captioner.
  auto temporal = std::async(std::launch::async, [&] {
    const auto t0 = Clock::now();
    auto r = analyze_timeline(*clip, *backends_.temporal, TemporalOptions{config.temporal_fallback});
    return std::pair{std::move(r), elapsed_ms(t0)};
  });
  auto injected = std::async(std::launch::async, [&] {
    const auto t0 = Clock::now();
    auto v = staged("inject", [&] { return inject_video(*clip, masklet, config.injection_style); });
    return std::pair{std::move(v), elapsed_ms(t0)};
  });
  auto [timeline_result, temporal_ms] = staged("temporal", [&] { return temporal.get(); });
  auto [injected_clip, inject_ms] = injected.get();
  result.provenance.stage_ms["temporal"] = temporal_ms;
  result.provenance.stage_ms["inject"] = inject_ms;
  result.warnings.insert(result.warnings.end(), timeline_result.warnings.begin(), timeline_result.warnings.end());

  const auto prompt = staged("caption", [&] { return build_cot_prompt(timeline_result.timeline); });
  const auto indices =
      sample_frame_indices(injected_clip.frame_count(), config.captioner_frame_budget, masklet.anchor_frame);
  std::vector<Frame> frames;
  frames.reserve(indices.size());
  for (const int i : indices) frames.push_back(injected_clip.frame(i));

  const auto t0 = Clock::now();
  CaptionOptions copts;
  copts.retry_limit = config.retry_limit;
  copts.parse.strict = config.strict_parse;
  auto outcome = staged("caption", [&] { return request_caption(frames, prompt, *backends_.captioner, {}, copts); });
  result.provenance.stage_ms["caption"] = elapsed_ms(t0);

  result.structured = std::move(outcome.caption);
  result.caption_retries = outcome.retries;
  result.warnings.insert(result.warnings.end(), outcome.warnings.begin(), outcome.warnings.end());
  result.timeline = timeline_result.timeline;
  result.masklet_ref = masklet_ref(masklet);
  result.provenance.segmenter = backends_.segmenter->identity();
  result.provenance.temporal = backends_.temporal->identity();
  result.provenance.captioner = backends_.captioner->identity();
  result.provenance.config_hash = config_hash(config);

  state_.timeline = result.timeline;
  state_.last_result = result;
  injected_ = std::make_shared<const VideoClip>(std::move(injected_clip));
  last_config_ = config;
  return result;
}

std::string Session::chat_turn(std::string_view user_message) {
  std::lock_guard lock(mutex_);
  if (!state_.masklet) throw Error(ErrorCode::kPrecondition, "no object selected", "chat");
  if (!state_.last_result || !injected_) throw Error(ErrorCode::kPrecondition, "run the caption pipeline before chatting", "chat");
  if (!backends_.captioner) throw Error(ErrorCode::kPrecondition, "session has no captioner backend", "chat");

  const auto indices =
      sample_frame_indices(injected_->frame_count(), last_config_.captioner_frame_budget, state_.masklet->anchor_frame);
  std::vector<Frame> frames;
  for (const int i : indices) frames.push_back(injected_->frame(i));

  const auto prompt = fmt::format("{}\nCaption of the HO so far: {}\n\n{}", kChatPreamble,
                                  state_.last_result->structured.final_paragraph, user_message);
  std::string reply;
  try {
    reply = backends_.captioner->generate(CaptionRequest{frames, prompt, state_.chat_history});
  } catch (const std::exception& e) {
    rethrow_if_replay_miss(e);
    throw Error(ErrorCode::kCaptionerBackend, fmt::format("chat backend failed: {}", e.what()), "chat");
  }
  state_.chat_history.push_back({"user", std::string(user_message)});
  state_.chat_history.push_back({"assistant", reply});
  return reply;
}

Frame Session::render_frame(int t, const std::optional<InjectionStyle>& style) const {
  std::lock_guard lock(mutex_);
  if (!state_.clip) throw Error(ErrorCode::kPrecondition, "session has no video");
  const auto& frame = state_.clip->frame(t);
  if (!style || !state_.masklet) return frame;
  return inject(frame, state_.masklet->masks[static_cast<std::size_t>(t)], *style);
}

std::string SessionManager::add_clip(VideoClip clip) {
  if (clip.empty()) throw Error(ErrorCode::kEmptyVideo, "clip has no frames");
  std::lock_guard lock(mutex_);
  auto id = fmt::format("clip-{}", next_clip_++);
  clips_.emplace(id, std::make_shared<const VideoClip>(std::move(clip)));
  return id;
}

std::shared_ptr<const VideoClip> SessionManager::clip(const std::string& clip_id) const {
  std::lock_guard lock(mutex_);
  const auto it = clips_.find(clip_id);
  if (it == clips_.end()) throw Error(ErrorCode::kNotFound, fmt::format("unknown clip '{}'", clip_id));
  return it->second;
}

std::shared_ptr<Session> SessionManager::create_session(const std::string& clip_id) {
  auto c = clip(clip_id);
  std::lock_guard lock(mutex_);
  auto id = fmt::format("session-{}", next_session_++);
  auto s = std::make_shared<Session>(id, clip_id, std::move(c), defaults_);
  sessions_.emplace(id, s);
  return s;
}

std::shared_ptr<Session> SessionManager::session(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(ErrorCode::kNotFound, fmt::format("unknown session '{}'", session_id));
  return it->second;
}

}  // namespace catv
