#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "catv/gateway/wire.hpp"
#include "catv/orchestrator.hpp"

namespace catv::gateway {

struct TraceEntry {
  std::string digest;
  nlohmann::json request;   // canonical form
  nlohmann::json response;  // {"error": msg} when the live call threw
};

struct BackendTrace {
  BackendKind kind = BackendKind::kSegmenter;
  std::string adapter;      // identity of the recorded backend
  std::string recorded_at;  // ISO-8601 UTC
  nlohmann::json capabilities;  // segmenter only
  std::vector<TraceEntry> entries;

  const TraceEntry* find(const std::string& digest) const;
};

// Pipeline invocation recorded alongside the exchanges, enough to re-run it.
struct RunRecord {
  nlohmann::json clip;  // clip_json()
  nlohmann::json gesture;
  nlohmann::json config;
  bool stabilize = true;
  std::string result;  // canonical_json of the recorded CaptionResult
};

struct TraceFile {
  std::map<BackendKind, BackendTrace> traces;
  std::vector<RunRecord> runs;

  // JSON lines: one "meta" line per backend, one "exchange" line per entry,
  // one "run" line per recorded pipeline run.
  std::string to_jsonl() const;
  static TraceFile from_jsonl(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static TraceFile load(const std::filesystem::path& path);
};

// Thread-safe collector shared by the recording wrappers.
class TraceRecorder {
 public:
  void set_adapter(BackendKind kind, std::string identity, nlohmann::json capabilities = nullptr);
  // Duplicate digests keep the first response.
  void record(BackendKind kind, const nlohmann::json& canonical_request, nlohmann::json response);
  void add_run(RunRecord run);
  TraceFile snapshot() const;

 private:
  mutable std::mutex mutex_;
  TraceFile file_;
};

class RecordingSegmenter final : public SegmenterBackend {
 public:
  RecordingSegmenter(std::shared_ptr<SegmenterBackend> inner, std::shared_ptr<TraceRecorder> recorder);
  SegmenterCapabilities capabilities() const override { return inner_->capabilities(); }
  std::string identity() const override { return inner_->identity(); }
  SegmentResponse segment(const SegmentRequest& request) override;

 private:
  std::shared_ptr<SegmenterBackend> inner_;
  std::shared_ptr<TraceRecorder> recorder_;
};

class RecordingTemporal final : public TemporalBackend {
 public:
  RecordingTemporal(std::shared_ptr<TemporalBackend> inner, std::shared_ptr<TraceRecorder> recorder);
  std::string identity() const override { return inner_->identity(); }
  std::vector<RawEvent> analyze(const VideoClip& clip) override;

 private:
  std::shared_ptr<TemporalBackend> inner_;
  std::shared_ptr<TraceRecorder> recorder_;
};

class RecordingCaptioner final : public CaptionerBackend {
 public:
  RecordingCaptioner(std::shared_ptr<CaptionerBackend> inner, std::shared_ptr<TraceRecorder> recorder);
  std::string identity() const override { return inner_->identity(); }
  std::string generate(const CaptionRequest& request) override;

 private:
  std::shared_ptr<CaptionerBackend> inner_;
  std::shared_ptr<TraceRecorder> recorder_;
};

Backends recording_backends(const Backends& live, const std::shared_ptr<TraceRecorder>& recorder);

enum class ReplayMode { kStrict, kLenient };

// Serves stored responses by request digest. Lenient mode falls back to the
// entry whose canonical request differs in the fewest leaf values.
class TraceReplayer {
 public:
  TraceReplayer(BackendTrace trace, ReplayMode mode);
  const BackendTrace& trace() const noexcept { return trace_; }
  const nlohmann::json& lookup(const nlohmann::json& canonical_request);
  const std::string& adapter() const noexcept { return trace_.adapter; }
  std::vector<std::string> warnings() const;

 private:
  BackendTrace trace_;
  ReplayMode mode_;
  mutable std::mutex mutex_;
  std::vector<std::string> warnings_;
};

class ReplaySegmenter final : public SegmenterBackend {
 public:
  ReplaySegmenter(BackendTrace trace, ReplayMode mode);
  SegmenterCapabilities capabilities() const override { return caps_; }
  std::string identity() const override { return replayer_.adapter(); }
  SegmentResponse segment(const SegmentRequest& request) override;
  std::vector<std::string> warnings() const { return replayer_.warnings(); }

 private:
  TraceReplayer replayer_;
  SegmenterCapabilities caps_;
};

class ReplayTemporal final : public TemporalBackend {
 public:
  ReplayTemporal(BackendTrace trace, ReplayMode mode);
  std::string identity() const override { return replayer_.adapter(); }
  std::vector<RawEvent> analyze(const VideoClip& clip) override;
  std::vector<std::string> warnings() const { return replayer_.warnings(); }

 private:
  TraceReplayer replayer_;
};

class ReplayCaptioner final : public CaptionerBackend {
 public:
  ReplayCaptioner(BackendTrace trace, ReplayMode mode);
  std::string identity() const override { return replayer_.adapter(); }
  std::string generate(const CaptionRequest& request) override;
  std::vector<std::string> warnings() const { return replayer_.warnings(); }

 private:
  TraceReplayer replayer_;
};

nlohmann::json capabilities_json(const SegmenterCapabilities& caps);
SegmenterCapabilities capabilities_from_json(const nlohmann::json& j);

// Count of differing leaves between two JSON documents (arrays and objects
// flattened by path; a leaf present on one side only counts once).
std::size_t json_leaf_distance(const nlohmann::json& a, const nlohmann::json& b);

struct RecordedRun {
  CaptionResult result;
  TraceFile trace;
};

// Runs one full pipeline (select + caption) with recording wrappers around
// `live` and returns the result and the self-contained trace.
RecordedRun record_run(const VideoClip& clip, const GestureRecord& gesture, bool stabilize,
                       const PipelineConfig& config, const Backends& live);

struct ReplayReport {
  CaptionResult result;
  std::string replayed;  // canonical_json(result)
  std::string recorded;
  bool identical = false;
  std::vector<std::string> warnings;
};

// Re-runs recorded run `run_index` against replay backends only.
ReplayReport replay_run(const TraceFile& trace, ReplayMode mode = ReplayMode::kStrict, std::size_t run_index = 0);

}  // namespace catv::gateway
