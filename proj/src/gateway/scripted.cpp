#include "catv/gateway/scripted.hpp"

#include <fmt/format.h>

#include "catv/error.hpp"
#include "catv/gateway/trace.hpp"
#include "catv/gateway/wire.hpp"

namespace catv::gateway {

ScriptedSegmenter::ScriptedSegmenter(std::vector<SegmentResponse> responses, SegmenterCapabilities caps)
    : caps_(caps), ordered_(std::move(responses)) {}

std::shared_ptr<ScriptedSegmenter> ScriptedSegmenter::from_masklet(const Masklet& truth, std::set<int> faults,
                                                                   SegmenterCapabilities caps) {
  std::map<int, BinaryMask> masks;
  for (std::size_t t = 0; t < truth.masks.size(); ++t) masks[static_cast<int>(t)] = truth.masks[t];
  return from_frames(std::move(masks), std::move(faults), caps);
}

std::shared_ptr<ScriptedSegmenter> ScriptedSegmenter::from_frames(std::map<int, BinaryMask> masks, std::set<int> faults,
                                                                  SegmenterCapabilities caps) {
  std::shared_ptr<ScriptedSegmenter> s(new ScriptedSegmenter());
  s->caps_ = caps;
  s->keyed_ = true;
  s->by_frame_ = std::move(masks);
  s->faults_ = std::move(faults);
  return s;
}

SegmentResponse ScriptedSegmenter::segment(const SegmentRequest& request) {
  const int t = request.frame->index();
  std::lock_guard lock(mutex_);
  visits_.push_back(t);
  if (keyed_) {
    if (faults_.count(t)) throw std::runtime_error(fmt::format("scripted fault at frame {}", t));
    const auto it = by_frame_.find(t);
    if (it == by_frame_.end()) {
      throw Error(ErrorCode::kScriptedExhausted, fmt::format("segmenter fixture has no mask for frame {}", t));
    }
    return SegmentResponse{it->second, 1.0, fmt::format("scripted:{}", t)};
  }
  if (next_ >= ordered_.size()) {
    throw Error(ErrorCode::kScriptedExhausted,
                fmt::format("segmenter fixture exhausted after {} responses", ordered_.size()));
  }
  return ordered_[next_++];
}

int ScriptedSegmenter::calls() const {
  std::lock_guard lock(mutex_);
  return static_cast<int>(visits_.size());
}

std::vector<int> ScriptedSegmenter::visit_order() const {
  std::lock_guard lock(mutex_);
  return visits_;
}

std::shared_ptr<ScriptedTemporal> ScriptedTemporal::failing(std::string message) {
  auto t = std::make_shared<ScriptedTemporal>(std::vector<RawEvent>{});
  t->error_ = std::move(message);
  return t;
}

std::vector<RawEvent> ScriptedTemporal::analyze(const VideoClip&) {
  if (error_) throw std::runtime_error(*error_);
  return events_;
}

ScriptedCaptioner::ScriptedCaptioner(std::vector<std::string> responses) : ordered_(std::move(responses)) {}

std::shared_ptr<ScriptedCaptioner> ScriptedCaptioner::keyed(std::map<std::string, std::string> by_digest) {
  std::shared_ptr<ScriptedCaptioner> c(new ScriptedCaptioner());
  c->by_digest_ = std::move(by_digest);
  c->mode_ = Mode::kKeyed;
  return c;
}

std::shared_ptr<ScriptedCaptioner> ScriptedCaptioner::from_function(Responder fn) {
  std::shared_ptr<ScriptedCaptioner> c(new ScriptedCaptioner());
  c->fn_ = std::move(fn);
  c->mode_ = Mode::kFunction;
  return c;
}

std::string ScriptedCaptioner::generate(const CaptionRequest& request) {
  {
    std::lock_guard lock(mutex_);
    prompts_.emplace_back(request.prompt);
  }
  switch (mode_) {
    case Mode::kFunction:
      return fn_(request);
    case Mode::kKeyed: {
      const auto digest = request_digest(caption_canonical_request(request));
      const auto it = by_digest_.find(digest);
      if (it == by_digest_.end()) {
        throw Error(ErrorCode::kScriptedExhausted, fmt::format("captioner fixture has no response for {}", digest));
      }
      return it->second;
    }
    case Mode::kOrdered:
      break;
  }
  std::lock_guard lock(mutex_);
  if (next_ >= ordered_.size()) {
    throw Error(ErrorCode::kScriptedExhausted,
                fmt::format("captioner fixture exhausted after {} responses", ordered_.size()));
  }
  return ordered_[next_++];
}

int ScriptedCaptioner::calls() const {
  std::lock_guard lock(mutex_);
  return static_cast<int>(prompts_.size());
}

std::vector<std::string> ScriptedCaptioner::prompts() const {
  std::lock_guard lock(mutex_);
  return prompts_;
}

std::shared_ptr<ScriptedSegmenter> scripted_segmenter(const nlohmann::json& fixture) {
  const auto mode = fixture.value("mode", std::string("ordered"));
  const auto caps = capabilities_from_json(fixture.value("capabilities", nlohmann::json()));
  if (mode == "ordered") {
    std::vector<SegmentResponse> responses;
    for (const auto& r : fixture.at("responses")) responses.push_back(segment_response_from_json(r));
    return std::make_shared<ScriptedSegmenter>(std::move(responses), caps);
  }
  if (mode == "by_frame") {
    std::map<int, BinaryMask> keyed;
    for (const auto& [k, v] : fixture.at("masks").items()) keyed[std::stoi(k)] = rle_decode(v.get<RleMask>());
    std::set<int> faults;
    for (const auto& f : fixture.value("faults", nlohmann::json::array())) faults.insert(f.get<int>());
    return ScriptedSegmenter::from_frames(std::move(keyed), std::move(faults), caps);
  }
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown segmenter fixture mode '{}'", mode));
}

std::shared_ptr<ScriptedTemporal> scripted_temporal(const nlohmann::json& fixture) {
  if (fixture.contains("error")) return ScriptedTemporal::failing(fixture.at("error").get<std::string>());
  return std::make_shared<ScriptedTemporal>(events_from_json(fixture));
}

std::shared_ptr<ScriptedCaptioner> scripted_captioner(const nlohmann::json& fixture) {
  const auto mode = fixture.value("mode", std::string("ordered"));
  if (mode == "ordered") return std::make_shared<ScriptedCaptioner>(fixture.at("responses").get<std::vector<std::string>>());
  if (mode == "by_digest") {
    return ScriptedCaptioner::keyed(fixture.at("responses").get<std::map<std::string, std::string>>());
  }
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown captioner fixture mode '{}'", mode));
}

}  // namespace catv::gateway
