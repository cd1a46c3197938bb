#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace catv {

enum class ErrorCode {
  kInvalidArgument,
  kPrecondition,
  kRange,
  kShape,
  kDecode,
  kEmptyVideo,
  kMalformedRle,
  kEmptyMask,
  kDegenerateInterior,
  kInvalidPrompt,
  kInvalidMeasurement,
  kEmptyTrack,
  kSegmentationFailed,
  kTemporalBackend,
  kCaptionerBackend,
  kParse,
  kScriptedExhausted,
  kReplayMiss,
  kNotFound,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library. `stage` names the pipeline stage
// (segment, temporal, inject, caption, chat, ...) when one applies.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string stage = {})
      : std::runtime_error(std::move(message)), code_(code), stage_(std::move(stage)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }

  Error with_stage(std::string stage) const { return Error(code_, what(), std::move(stage)); }

 private:
  ErrorCode code_;
  std::string stage_;
};

// Parse failures keep the text that could not be parsed.
class ParseError : public Error {
 public:
  ParseError(std::string message, std::string raw, std::string stage = {})
      : Error(ErrorCode::kParse, std::move(message), std::move(stage)), raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

// A replay miss means the inputs diverged from the recording; backend-failure
// fallbacks must not absorb it.
inline void rethrow_if_replay_miss(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e); err && err->code() == ErrorCode::kReplayMiss) throw *err;
}

}  // namespace catv
