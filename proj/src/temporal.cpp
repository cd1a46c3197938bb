#include "catv/temporal.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "catv/error.hpp"

namespace catv {

void to_json(nlohmann::json& j, const Event& e) {
  j = nlohmann::json{{"start", e.start}, {"end", e.end}, {"caption", e.caption}};
}

void from_json(const nlohmann::json& j, Event& e) {
  j.at("start").get_to(e.start);
  j.at("end").get_to(e.end);
  j.at("caption").get_to(e.caption);
}

void to_json(nlohmann::json& j, const Timeline& t) {
  j = nlohmann::json{{"duration", t.duration}, {"events", t.events}};
}

void from_json(const nlohmann::json& j, Timeline& t) {
  j.at("duration").get_to(t.duration);
  j.at("events").get_to(t.events);
}

Timeline fallback_timeline(double duration) {
  return Timeline{{Event{0.0, duration, std::string(kFallbackCaption)}}, duration};
}

namespace {

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

Timeline normalize_events(const std::vector<RawEvent>& raw, double duration) {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw Error(ErrorCode::kPrecondition, "timeline duration must be positive");
  }
  Timeline out{{}, duration};
  for (const auto& r : raw) {
    if (std::isnan(r.start) || std::isnan(r.end) || blank(r.caption)) continue;
    const double s = std::clamp(r.start, 0.0, duration);
    const double e = std::clamp(r.end, 0.0, duration);
    if (e <= s) continue;
    out.events.push_back(Event{s, e, r.caption});
  }
  std::stable_sort(out.events.begin(), out.events.end(), [](const Event& a, const Event& b) {
    return a.start != b.start ? a.start < b.start : a.end < b.end;
  });
  if (out.events.empty()) return fallback_timeline(duration);
  return out;
}

TimelineResult analyze_timeline(const VideoClip& clip, TemporalBackend& backend, const TemporalOptions& options) {
  if (clip.empty()) throw Error(ErrorCode::kPrecondition, "clip has no frames", "temporal");
  TimelineResult result;
  std::vector<RawEvent> raw;
  try {
    raw = backend.analyze(clip);
  } catch (const std::exception& e) {
    rethrow_if_replay_miss(e);
    if (!options.fallback_on_error) {
      throw Error(ErrorCode::kTemporalBackend, fmt::format("temporal backend '{}' failed: {}", backend.identity(), e.what()),
                  "temporal");
    }
    result.timeline = fallback_timeline(clip.duration());
    result.warnings.push_back(fmt::format("temporal backend failed ({}); using whole-clip event", e.what()));
    return result;
  }
  if (raw.empty()) result.warnings.emplace_back("temporal backend returned no events; using whole-clip event");
  result.timeline = normalize_events(raw, clip.duration());
  return result;
}

std::vector<Event> events_for_time(const Timeline& timeline, double t) {
  if (!(t >= 0.0) || t > timeline.duration) {
    throw Error(ErrorCode::kRange, fmt::format("time {} outside [0, {}]", t, timeline.duration));
  }
  std::vector<Event> out;
  for (const auto& e : timeline.events) {
    if ((e.start <= t && t < e.end) || (t == timeline.duration && e.end == timeline.duration)) out.push_back(e);
  }
  return out;
}

}  // namespace catv
