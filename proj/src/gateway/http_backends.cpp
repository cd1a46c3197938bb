#include "catv/gateway/http_backends.hpp"

#include <httplib.h>

#include <fmt/format.h>

#include "catv/error.hpp"
#include "catv/gateway/wire.hpp"

namespace catv::gateway {

Endpoint parse_endpoint(std::string_view url) {
  constexpr std::string_view scheme = "http://";
  if (url.substr(0, scheme.size()) != scheme) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("endpoint '{}' must start with http://", url));
  }
  const auto rest = url.substr(scheme.size());
  const auto slash = rest.find('/');
  const auto authority = rest.substr(0, slash);
  if (authority.empty()) throw Error(ErrorCode::kInvalidArgument, fmt::format("endpoint '{}' has no host", url));
  const auto colon = authority.rfind(':');
  if (colon != std::string_view::npos) {
    const auto port = authority.substr(colon + 1);
    if (port.empty() || port.find_first_not_of("0123456789") != std::string_view::npos) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("endpoint '{}' has a bad port", url));
    }
  }
  Endpoint e;
  e.origin = std::string(url.substr(0, scheme.size() + authority.size()));
  e.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
  return e;
}

nlohmann::json post_json(const Endpoint& endpoint, const nlohmann::json& body, ErrorCode code,
                         const HttpOptions& options) {
  httplib::Client client(endpoint.origin);
  client.set_connection_timeout(options.connect_timeout_s, 0);
  client.set_read_timeout(options.read_timeout_s, 0);
  client.set_write_timeout(options.read_timeout_s, 0);
  const auto res = client.Post(endpoint.path, body.dump(), "application/json");
  const auto where = endpoint.origin + endpoint.path;
  if (!res) {
    throw Error(code, fmt::format("POST {} failed: {}", where, httplib::to_string(res.error())));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(code, fmt::format("POST {} returned HTTP {}: {}", where, res->status, res->body.substr(0, 200)));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(code, fmt::format("POST {} returned invalid JSON: {}", where, e.what()));
  }
}

HttpSegmenter::HttpSegmenter(std::string url, SegmenterCapabilities caps, HttpOptions options)
    : url_(std::move(url)), endpoint_(parse_endpoint(url_)), caps_(caps), options_(options) {}

SegmentResponse HttpSegmenter::segment(const SegmentRequest& request) {
  const auto reply = post_json(endpoint_, segment_wire_request(request), ErrorCode::kSegmentationFailed, options_);
  try {
    return segment_response_from_json(reply);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSegmentationFailed, fmt::format("segmenter reply malformed: {}", e.what()));
  }
}

HttpTemporal::HttpTemporal(std::string url, int frame_budget, HttpOptions options)
    : url_(std::move(url)), endpoint_(parse_endpoint(url_)), frame_budget_(frame_budget), options_(options) {}

std::vector<RawEvent> HttpTemporal::analyze(const VideoClip& clip) {
  const auto reply =
      post_json(endpoint_, temporal_wire_request(clip, frame_budget_), ErrorCode::kTemporalBackend, options_);
  try {
    return events_from_json(reply);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kTemporalBackend, fmt::format("temporal reply malformed: {}", e.what()));
  }
}

HttpCaptioner::HttpCaptioner(std::string url, HttpOptions options)
    : url_(std::move(url)), endpoint_(parse_endpoint(url_)), options_(options) {}

std::string HttpCaptioner::generate(const CaptionRequest& request) {
  const auto reply = post_json(endpoint_, caption_wire_request(request), ErrorCode::kCaptionerBackend, options_);
  if (!reply.is_object() || !reply.contains("text") || !reply["text"].is_string()) {
    throw Error(ErrorCode::kCaptionerBackend, "captioner reply has no text field");
  }
  return reply["text"].get<std::string>();
}

Backends with_endpoints(Backends base, const BackendEndpoints& endpoints) {
  if (!endpoints.segmenter.empty()) base.segmenter = std::make_shared<HttpSegmenter>(endpoints.segmenter);
  if (!endpoints.temporal.empty()) base.temporal = std::make_shared<HttpTemporal>(endpoints.temporal);
  if (!endpoints.captioner.empty()) base.captioner = std::make_shared<HttpCaptioner>(endpoints.captioner);
  return base;
}

}  // namespace catv::gateway
