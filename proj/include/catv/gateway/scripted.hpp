#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "catv/captioner.hpp"
#include "catv/segmenter.hpp"
#include "catv/temporal.hpp"

// Fixture-driven backends. Ordered mode hands out responses in call order
// and throws kScriptedExhausted past the end; keyed mode looks responses up
// by frame index (segmenter) or request digest (captioner).
namespace catv::gateway {

class ScriptedSegmenter final : public SegmenterBackend {
 public:
  // Ordered responses.
  explicit ScriptedSegmenter(std::vector<SegmentResponse> responses, SegmenterCapabilities caps = {});
  // Per-frame masks; frames listed in `faults` throw instead.
  static std::shared_ptr<ScriptedSegmenter> from_masklet(const Masklet& truth, std::set<int> faults = {},
                                                         SegmenterCapabilities caps = {});
  static std::shared_ptr<ScriptedSegmenter> from_frames(std::map<int, BinaryMask> masks, std::set<int> faults = {},
                                                        SegmenterCapabilities caps = {});

  SegmenterCapabilities capabilities() const override { return caps_; }
  std::string identity() const override { return "scripted-segmenter"; }
  SegmentResponse segment(const SegmentRequest& request) override;

  int calls() const;
  std::vector<int> visit_order() const;

 private:
  ScriptedSegmenter() = default;

  SegmenterCapabilities caps_;
  std::vector<SegmentResponse> ordered_;
  std::map<int, BinaryMask> by_frame_;
  std::set<int> faults_;
  bool keyed_ = false;
  mutable std::mutex mutex_;
  std::size_t next_ = 0;
  std::vector<int> visits_;
};

class ScriptedTemporal final : public TemporalBackend {
 public:
  explicit ScriptedTemporal(std::vector<RawEvent> events) : events_(std::move(events)) {}
  // Every call throws `message`.
  static std::shared_ptr<ScriptedTemporal> failing(std::string message);

  std::string identity() const override { return "scripted-temporal"; }
  std::vector<RawEvent> analyze(const VideoClip& clip) override;

 private:
  std::vector<RawEvent> events_;
  std::optional<std::string> error_;
};

class ScriptedCaptioner final : public CaptionerBackend {
 public:
  using Responder = std::function<std::string(const CaptionRequest&)>;

  explicit ScriptedCaptioner(std::vector<std::string> responses);
  static std::shared_ptr<ScriptedCaptioner> keyed(std::map<std::string, std::string> by_digest);
  static std::shared_ptr<ScriptedCaptioner> from_function(Responder fn);

  std::string identity() const override { return "scripted-captioner"; }
  std::string generate(const CaptionRequest& request) override;

  int calls() const;
  // Prompts received, in call order.
  std::vector<std::string> prompts() const;

 private:
  ScriptedCaptioner() = default;

  std::vector<std::string> ordered_;
  std::map<std::string, std::string> by_digest_;
  Responder fn_;
  enum class Mode { kOrdered, kKeyed, kFunction } mode_ = Mode::kOrdered;
  mutable std::mutex mutex_;
  std::size_t next_ = 0;
  std::vector<std::string> prompts_;
};

// Fixture JSON:
//   segmenter: {"mode": "ordered", "responses": [{rle_mask, confidence?, context_token?}]}
//              {"mode": "by_frame", "masks": {"<t>": rle}, "faults": [t...], "capabilities": {...}}
//   temporal:  {"events": [{start, end, caption}]} or {"error": "..."}
//   captioner: {"mode": "ordered", "responses": ["..."]} or {"mode": "by_digest", "responses": {"<digest>": "..."}}
std::shared_ptr<ScriptedSegmenter> scripted_segmenter(const nlohmann::json& fixture);
std::shared_ptr<ScriptedTemporal> scripted_temporal(const nlohmann::json& fixture);
std::shared_ptr<ScriptedCaptioner> scripted_captioner(const nlohmann::json& fixture);

}  // namespace catv::gateway
