#include "catv/gateway/trace.hpp"

#include <chrono>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "catv/error.hpp"

namespace catv::gateway {

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(now));
}

void flatten(const nlohmann::json& j, const std::string& path, std::map<std::string, const nlohmann::json*>& out) {
  if (j.is_object()) {
    if (j.empty()) out[path] = &j;
    for (const auto& [k, v] : j.items()) flatten(v, path + "/" + k, out);
  } else if (j.is_array()) {
    if (j.empty()) out[path] = &j;
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], path + "/" + std::to_string(i), out);
  } else {
    out[path] = &j;
  }
}

[[noreturn]] void rethrow_recorded(const nlohmann::json& response) {
  throw std::runtime_error(response.at("error").get<std::string>());
}

bool is_error(const nlohmann::json& response) { return response.is_object() && response.contains("error"); }

}  // namespace

const TraceEntry* BackendTrace::find(const std::string& digest) const {
  for (const auto& e : entries) {
    if (e.digest == digest) return &e;
  }
  return nullptr;
}

std::string TraceFile::to_jsonl() const {
  std::string out;
  for (const auto& [kind, trace] : traces) {
    nlohmann::json meta{{"type", "meta"},
                        {"backend", to_string(kind)},
                        {"adapter", trace.adapter},
                        {"recorded_at", trace.recorded_at}};
    if (!trace.capabilities.is_null()) meta["capabilities"] = trace.capabilities;
    out += meta.dump() + "\n";
    for (const auto& e : trace.entries) {
      out += nlohmann::json{{"type", "exchange"},
                            {"backend", to_string(kind)},
                            {"digest", e.digest},
                            {"request", e.request},
                            {"response", e.response}}
                 .dump() +
             "\n";
    }
  }
  for (const auto& r : runs) {
    out += nlohmann::json{{"type", "run"},
                          {"clip", r.clip},
                          {"gesture", r.gesture},
                          {"config", r.config},
                          {"stabilize", r.stabilize},
                          {"result", r.result}}
               .dump() +
           "\n";
  }
  return out;
}

TraceFile TraceFile::from_jsonl(std::string_view text) {
  TraceFile file;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(fmt::format("trace line {}: {}", lineno, e.what()), line);
    }
    const auto type = j.value("type", std::string{});
    if (type == "meta" || type == "exchange") {
      const auto kind = backend_kind_from_string(j.at("backend").get<std::string>());
      auto& trace = file.traces[kind];
      trace.kind = kind;
      if (type == "meta") {
        trace.adapter = j.value("adapter", std::string{});
        trace.recorded_at = j.value("recorded_at", std::string{});
        trace.capabilities = j.value("capabilities", nlohmann::json());
      } else {
        auto digest = j.at("digest").get<std::string>();
        if (trace.find(digest)) {
          throw Error(ErrorCode::kInvalidArgument, fmt::format("trace line {}: duplicate digest {}", lineno, digest));
        }
        trace.entries.push_back({std::move(digest), j.at("request"), j.at("response")});
      }
    } else if (type == "run") {
      file.runs.push_back({j.at("clip"), j.at("gesture"), j.at("config"), j.value("stabilize", true),
                           j.at("result").get<std::string>()});
    } else {
      throw ParseError(fmt::format("trace line {}: unknown record type '{}'", lineno, type), line);
    }
  }
  return file;
}

void TraceFile::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", path.string()));
  out << to_jsonl();
  if (!out) throw Error(ErrorCode::kIo, fmt::format("write failed: {}", path.string()));
}

TraceFile TraceFile::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot read {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return from_jsonl(ss.str());
}

void TraceRecorder::set_adapter(BackendKind kind, std::string identity, nlohmann::json capabilities) {
  std::lock_guard lock(mutex_);
  auto& t = file_.traces[kind];
  t.kind = kind;
  t.adapter = std::move(identity);
  t.recorded_at = utc_now();
  t.capabilities = std::move(capabilities);
}

void TraceRecorder::record(BackendKind kind, const nlohmann::json& canonical_request, nlohmann::json response) {
  auto digest = request_digest(canonical_request);
  std::lock_guard lock(mutex_);
  auto& t = file_.traces[kind];
  t.kind = kind;
  if (t.find(digest)) return;
  t.entries.push_back({std::move(digest), canonical_request, std::move(response)});
}

void TraceRecorder::add_run(RunRecord run) {
  std::lock_guard lock(mutex_);
  file_.runs.push_back(std::move(run));
}

TraceFile TraceRecorder::snapshot() const {
  std::lock_guard lock(mutex_);
  return file_;
}

nlohmann::json capabilities_json(const SegmenterCapabilities& caps) {
  return {{"points", caps.points}, {"box", caps.box}, {"region", caps.region}, {"stateless", caps.stateless}};
}

SegmenterCapabilities capabilities_from_json(const nlohmann::json& j) {
  SegmenterCapabilities c;
  if (!j.is_object()) return c;
  c.points = j.value("points", c.points);
  c.box = j.value("box", c.box);
  c.region = j.value("region", c.region);
  c.stateless = j.value("stateless", c.stateless);
  return c;
}

RecordingSegmenter::RecordingSegmenter(std::shared_ptr<SegmenterBackend> inner, std::shared_ptr<TraceRecorder> recorder)
    : inner_(std::move(inner)), recorder_(std::move(recorder)) {
  recorder_->set_adapter(BackendKind::kSegmenter, inner_->identity(), capabilities_json(inner_->capabilities()));
}

SegmentResponse RecordingSegmenter::segment(const SegmentRequest& request) {
  const auto canonical = segment_canonical_request(request);
  try {
    auto response = inner_->segment(request);
    recorder_->record(BackendKind::kSegmenter, canonical, segment_response_json(response));
    return response;
  } catch (const std::exception& e) {
    recorder_->record(BackendKind::kSegmenter, canonical, {{"error", e.what()}});
    throw;
  }
}

RecordingTemporal::RecordingTemporal(std::shared_ptr<TemporalBackend> inner, std::shared_ptr<TraceRecorder> recorder)
    : inner_(std::move(inner)), recorder_(std::move(recorder)) {
  recorder_->set_adapter(BackendKind::kTemporal, inner_->identity());
}

std::vector<RawEvent> RecordingTemporal::analyze(const VideoClip& clip) {
  const auto canonical = temporal_canonical_request(clip);
  try {
    auto events = inner_->analyze(clip);
    recorder_->record(BackendKind::kTemporal, canonical, events_json(events));
    return events;
  } catch (const std::exception& e) {
    recorder_->record(BackendKind::kTemporal, canonical, {{"error", e.what()}});
    throw;
  }
}

RecordingCaptioner::RecordingCaptioner(std::shared_ptr<CaptionerBackend> inner, std::shared_ptr<TraceRecorder> recorder)
    : inner_(std::move(inner)), recorder_(std::move(recorder)) {
  recorder_->set_adapter(BackendKind::kCaptioner, inner_->identity());
}

std::string RecordingCaptioner::generate(const CaptionRequest& request) {
  const auto canonical = caption_canonical_request(request);
  try {
    auto text = inner_->generate(request);
    recorder_->record(BackendKind::kCaptioner, canonical, {{"text", text}});
    return text;
  } catch (const std::exception& e) {
    recorder_->record(BackendKind::kCaptioner, canonical, {{"error", e.what()}});
    throw;
  }
}

Backends recording_backends(const Backends& live, const std::shared_ptr<TraceRecorder>& recorder) {
  Backends b;
  if (live.segmenter) b.segmenter = std::make_shared<RecordingSegmenter>(live.segmenter, recorder);
  if (live.temporal) b.temporal = std::make_shared<RecordingTemporal>(live.temporal, recorder);
  if (live.captioner) b.captioner = std::make_shared<RecordingCaptioner>(live.captioner, recorder);
  return b;
}

std::size_t json_leaf_distance(const nlohmann::json& a, const nlohmann::json& b) {
  std::map<std::string, const nlohmann::json*> fa, fb;
  flatten(a, "", fa);
  flatten(b, "", fb);
  std::size_t d = 0;
  for (const auto& [path, v] : fa) {
    const auto it = fb.find(path);
    if (it == fb.end() || *it->second != *v) ++d;
  }
  for (const auto& [path, v] : fb) {
    if (!fa.count(path)) ++d;
  }
  return d;
}

TraceReplayer::TraceReplayer(BackendTrace trace, ReplayMode mode) : trace_(std::move(trace)), mode_(mode) {}

const nlohmann::json& TraceReplayer::lookup(const nlohmann::json& canonical_request) {
  const auto digest = request_digest(canonical_request);
  if (const auto* e = trace_.find(digest)) return e->response;
  if (mode_ == ReplayMode::kStrict || trace_.entries.empty()) {
    throw Error(ErrorCode::kReplayMiss,
                fmt::format("{} replay: no recorded exchange for digest {}", to_string(trace_.kind), digest));
  }
  const TraceEntry* best = nullptr;
  auto best_d = std::numeric_limits<std::size_t>::max();
  for (const auto& e : trace_.entries) {
    const auto d = json_leaf_distance(canonical_request, e.request);
    if (d < best_d) {
      best_d = d;
      best = &e;
    }
  }
  std::lock_guard lock(mutex_);
  warnings_.push_back(fmt::format("{} replay: digest {} not recorded; served nearest entry {} ({} differing fields)",
                                  to_string(trace_.kind), digest.substr(0, 12), best->digest.substr(0, 12), best_d));
  return best->response;
}

std::vector<std::string> TraceReplayer::warnings() const {
  std::lock_guard lock(mutex_);
  return warnings_;
}

ReplaySegmenter::ReplaySegmenter(BackendTrace trace, ReplayMode mode)
    : replayer_(std::move(trace), mode), caps_(capabilities_from_json(replayer_.trace().capabilities)) {}

SegmentResponse ReplaySegmenter::segment(const SegmentRequest& request) {
  const auto& r = replayer_.lookup(segment_canonical_request(request));
  if (is_error(r)) rethrow_recorded(r);
  return segment_response_from_json(r);
}

ReplayTemporal::ReplayTemporal(BackendTrace trace, ReplayMode mode) : replayer_(std::move(trace), mode) {}

std::vector<RawEvent> ReplayTemporal::analyze(const VideoClip& clip) {
  const auto& r = replayer_.lookup(temporal_canonical_request(clip));
  if (is_error(r)) rethrow_recorded(r);
  return events_from_json(r);
}

ReplayCaptioner::ReplayCaptioner(BackendTrace trace, ReplayMode mode) : replayer_(std::move(trace), mode) {}

std::string ReplayCaptioner::generate(const CaptionRequest& request) {
  const auto& r = replayer_.lookup(caption_canonical_request(request));
  if (is_error(r)) rethrow_recorded(r);
  return r.at("text").get<std::string>();
}

RecordedRun record_run(const VideoClip& clip, const GestureRecord& gesture, bool stabilize,
                       const PipelineConfig& config, const Backends& live) {
  auto recorder = std::make_shared<TraceRecorder>();
  SessionManager manager(recording_backends(live, recorder));
  const auto clip_id = manager.add_clip(clip);
  auto session = manager.create_session(clip_id);
  session->select_object(gesture, stabilize);
  RecordedRun out;
  out.result = session->run_pipeline(config);
  recorder->add_run({clip_json(clip), gesture_to_json(gesture), nlohmann::json(config), stabilize,
                     canonical_json(out.result)});
  out.trace = recorder->snapshot();
  return out;
}

ReplayReport replay_run(const TraceFile& trace, ReplayMode mode, std::size_t run_index) {
  if (run_index >= trace.runs.size()) {
    throw Error(ErrorCode::kNotFound, fmt::format("trace has {} recorded runs, no run {}", trace.runs.size(), run_index));
  }
  const auto& run = trace.runs[run_index];
  auto trace_for = [&](BackendKind kind) {
    const auto it = trace.traces.find(kind);
    if (it == trace.traces.end()) {
      BackendTrace empty;
      empty.kind = kind;
      return empty;
    }
    return it->second;
  };
  auto seg = std::make_shared<ReplaySegmenter>(trace_for(BackendKind::kSegmenter), mode);
  auto tem = std::make_shared<ReplayTemporal>(trace_for(BackendKind::kTemporal), mode);
  auto cap = std::make_shared<ReplayCaptioner>(trace_for(BackendKind::kCaptioner), mode);
  SessionManager manager(Backends{seg, tem, cap});
  const auto clip_id = manager.add_clip(clip_from_json(run.clip));
  auto session = manager.create_session(clip_id);
  session->select_object(gesture_from_json(run.gesture), run.stabilize);

  ReplayReport report;
  report.result = session->run_pipeline(run.config.get<PipelineConfig>());
  report.replayed = canonical_json(report.result);
  report.recorded = run.result;
  report.identical = report.replayed == report.recorded;
  for (const auto& w : seg->warnings()) report.warnings.push_back(w);
  for (const auto& w : tem->warnings()) report.warnings.push_back(w);
  for (const auto& w : cap->warnings()) report.warnings.push_back(w);
  return report;
}

}  // namespace catv::gateway
