#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "catv/media.hpp"

namespace catv {

inline constexpr std::string_view kFallbackCaption = "the full video";

struct Event {
  double start = 0.0;
  double end = 0.0;
  std::string caption;

  friend bool operator==(const Event&, const Event&) = default;
};

// Backend output before validation; anything goes.
struct RawEvent {
  double start = 0.0;
  double end = 0.0;
  std::string caption;
};

struct Timeline {
  std::vector<Event> events;
  double duration = 0.0;

  friend bool operator==(const Timeline&, const Timeline&) = default;
};

void to_json(nlohmann::json& j, const Event& e);
void from_json(const nlohmann::json& j, Event& e);
void to_json(nlohmann::json& j, const Timeline& t);
void from_json(const nlohmann::json& j, Timeline& t);

class TemporalBackend {
 public:
  virtual ~TemporalBackend() = default;
  virtual std::string identity() const = 0;
  // Throws on failure.
  virtual std::vector<RawEvent> analyze(const VideoClip& clip) = 0;
};

Timeline fallback_timeline(double duration);

// Clamps to [0, duration], drops empty or inverted events, sorts by
// (start, end) keeping overlaps, and falls back to one whole-clip event.
Timeline normalize_events(const std::vector<RawEvent>& raw, double duration);

struct TimelineResult {
  Timeline timeline;
  std::vector<std::string> warnings;
};

struct TemporalOptions {
  // Substitute the whole-clip event when the backend fails.
  bool fallback_on_error = false;
};

TimelineResult analyze_timeline(const VideoClip& clip, TemporalBackend& backend, const TemporalOptions& options = {});

// Events with start <= t < end; an event ending at the clip's duration also
// covers t == duration.
std::vector<Event> events_for_time(const Timeline& timeline, double t);

}  // namespace catv
