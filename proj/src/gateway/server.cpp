#include "catv/gateway/server.hpp"

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <fmt/format.h>

#include "catv/gateway/http_backends.hpp"
#include "catv/gateway/synth.hpp"
#include "catv/gateway/wire.hpp"
#include "catv/media.hpp"

namespace catv::gateway {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kPrecondition:
      return 409;
    case ErrorCode::kSegmentationFailed:
    case ErrorCode::kTemporalBackend:
    case ErrorCode::kCaptionerBackend:
    case ErrorCode::kReplayMiss:
    case ErrorCode::kScriptedExhausted:
      return 502;
    case ErrorCode::kIo:
      return 500;
    default:
      return 400;
  }
}

nlohmann::json error_body(const Error& e) {
  return {{"code", to_string(e.code())}, {"stage", e.stage()}, {"message", e.what()}};
}

namespace {

void send_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

nlohmann::json parse_body(const httplib::Request& req) {
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("request body is not JSON: {}", e.what()), "request");
  }
}

// Wraps a handler so every failure becomes {code, stage, message}.
template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_json(res, error_body(e), http_status(e.code()));
    } catch (const nlohmann::json::exception& e) {
      send_json(res, error_body(Error(ErrorCode::kInvalidArgument, e.what(), "request")), 400);
    } catch (const std::exception& e) {
      send_json(res, error_body(Error(ErrorCode::kIo, e.what())), 500);
    }
  };
}

VideoClip clip_from_upload(const httplib::Request& req) {
  std::optional<double> fps;
  if (req.has_param("fps")) fps = std::stod(req.get_param_value("fps"));
  if (req.get_header_value("Content-Type").rfind("application/json", 0) == 0) {
    const auto body = parse_body(req);
    VideoClip clip = body.contains("scene") ? synth_clip(body.at("scene").get<ScriptedScene>()).clip
                                            : clip_from_json(body);
    return fps ? resample(clip, *fps) : clip;
  }
  if (req.body.empty()) throw Error(ErrorCode::kDecode, "empty upload", "ingest");
  thread_local std::mt19937_64 rng{std::random_device{}()};
  const auto path = std::filesystem::temp_directory_path() / fmt::format("catv-upload-{:016x}", rng());
  {
    std::ofstream out(path, std::ios::binary);
    out.write(req.body.data(), static_cast<std::streamsize>(req.body.size()));
  }
  try {
    auto clip = load_video(path, fps);
    std::filesystem::remove(path);
    return clip;
  } catch (...) {
    std::filesystem::remove(path);
    throw;
  }
}

}  // namespace

GatewayServer::GatewayServer(Backends defaults)
    : manager_(std::move(defaults)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

GatewayServer::~GatewayServer() { stop(); }

void GatewayServer::install_routes() {
  auto& s = *server_;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  s.Get("/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, {{"status", "ok"}}); });

  s.Post("/videos", guarded([this](const httplib::Request& req, httplib::Response& res) {
           auto clip = clip_from_upload(req);
           const nlohmann::json meta{{"frame_count", clip.frame_count()}, {"fps", clip.fps()},
                                     {"height", clip.height()},         {"width", clip.width()},
                                     {"duration", clip.duration()}};
           auto j = meta;
           j["clip_id"] = manager_.add_clip(std::move(clip));
           send_json(res, j, 201);
         }));

  s.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const auto body = parse_body(req);
           const auto session = manager_.create_session(body.at("clip_id").get<std::string>());
           send_json(res, {{"session_id", session->id()}}, 201);
         }));

  s.Post(R"(/sessions/([^/]+)/prompt)", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const auto session = manager_.session(req.matches[1]);
           const auto body = parse_body(req);
           const auto& gesture = body.contains("gesture") ? body.at("gesture") : body;
           const auto errors = validate_gesture_json(gesture);
           if (!errors.empty()) {
             std::string msg;
             for (const auto& e : errors) msg += (msg.empty() ? "" : "; ") + e;
             throw Error(ErrorCode::kInvalidPrompt, msg, "prompt");
           }
           const bool stabilize = body.value("stabilize", true);
           send_json(res, to_json(session->select_object(gesture_from_json(gesture), stabilize)));
         }));

  s.Post(R"(/sessions/([^/]+)/caption)", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const auto session = manager_.session(req.matches[1]);
           const auto body = req.body.empty() ? nlohmann::json::object() : parse_body(req);
           const auto config = body.value("config", nlohmann::json::object()).get<PipelineConfig>();
           if (config.endpoints.any()) session->set_backends(with_endpoints(manager_.default_backends(), config.endpoints));
           send_json(res, to_json(session->run_pipeline(config), true));
         }));

  s.Post(R"(/sessions/([^/]+)/chat)", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const auto session = manager_.session(req.matches[1]);
           const auto body = parse_body(req);
           send_json(res, {{"reply", session->chat_turn(body.at("message").get<std::string>())}});
         }));

  s.Get(R"(/sessions/([^/]+)/frames/(-?\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const auto session = manager_.session(req.matches[1]);
          const int t = std::stoi(req.matches[2]);
          std::optional<InjectionStyle> style;
          if (req.has_param("style")) {
            InjectionStyle st;
            st.kind = style_kind_from_string(req.get_param_value("style"));
            style = st;
          }
          const auto png = encode_png(session->render_frame(t, style));
          res.set_content(std::string(png.begin(), png.end()), "image/png");
        }));

  s.Post("/gestures/validate", guarded([](const httplib::Request& req, httplib::Response& res) {
           const auto errors = validate_gesture_json(parse_body(req));
           send_json(res, {{"valid", errors.empty()}, {"errors", errors}});
         }));
}

int GatewayServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::kIo, fmt::format("cannot bind {}:{}", host, port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void GatewayServer::run(const std::string& host, int port) {
  if (!server_->bind_to_port(host, port)) throw Error(ErrorCode::kIo, fmt::format("cannot bind {}:{}", host, port));
  server_->listen_after_bind();
}

void GatewayServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace catv::gateway
