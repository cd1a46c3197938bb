#pragma once

#include <string>

#include <json.hpp>

#include "catv/captioner.hpp"
#include "catv/error.hpp"
#include "catv/orchestrator.hpp"
#include "catv/segmenter.hpp"
#include "catv/temporal.hpp"

// JSON-over-HTTP adapters for remote model servers.
namespace catv::gateway {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

// Throws kInvalidArgument for anything but http://host[:port][/path].
Endpoint parse_endpoint(std::string_view url);

struct HttpOptions {
  int connect_timeout_s = 10;
  int read_timeout_s = 300;
};

// POSTs `body` and returns the parsed JSON reply; `code` is used for
// transport failures, non-2xx statuses and unparseable replies.
nlohmann::json post_json(const Endpoint& endpoint, const nlohmann::json& body, ErrorCode code,
                         const HttpOptions& options = {});

class HttpSegmenter final : public SegmenterBackend {
 public:
  HttpSegmenter(std::string url, SegmenterCapabilities caps = {}, HttpOptions options = {});
  SegmenterCapabilities capabilities() const override { return caps_; }
  std::string identity() const override { return "http-segmenter " + url_; }
  SegmentResponse segment(const SegmentRequest& request) override;

 private:
  std::string url_;
  Endpoint endpoint_;
  SegmenterCapabilities caps_;
  HttpOptions options_;
};

class HttpTemporal final : public TemporalBackend {
 public:
  explicit HttpTemporal(std::string url, int frame_budget = 64, HttpOptions options = {});
  std::string identity() const override { return "http-temporal " + url_; }
  std::vector<RawEvent> analyze(const VideoClip& clip) override;

 private:
  std::string url_;
  Endpoint endpoint_;
  int frame_budget_;
  HttpOptions options_;
};

class HttpCaptioner final : public CaptionerBackend {
 public:
  explicit HttpCaptioner(std::string url, HttpOptions options = {});
  std::string identity() const override { return "http-captioner " + url_; }
  std::string generate(const CaptionRequest& request) override;

 private:
  std::string url_;
  Endpoint endpoint_;
  HttpOptions options_;
};

// Replaces each backend for which an endpoint is configured.
Backends with_endpoints(Backends base, const BackendEndpoints& endpoints);

}  // namespace catv::gateway
