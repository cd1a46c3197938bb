#pragma once

#include <memory>
#include <string>
#include <thread>

#include <json.hpp>

#include "catv/error.hpp"
#include "catv/orchestrator.hpp"

namespace httplib {
class Server;
}

namespace catv::gateway {

// HTTP status used for a library error code.
int http_status(ErrorCode code);
// {"code", "stage", "message"}
nlohmann::json error_body(const Error& e);

// Routes:
//   POST /videos                       raw video bytes, or JSON {"scene": {...}} / {"fps", "frames"}
//   POST /sessions                     {"clip_id"}
//   POST /sessions/{id}/prompt         {"gesture", "stabilize"?}
//   POST /sessions/{id}/caption        {"config"}
//   POST /sessions/{id}/chat           {"message"}
//   GET  /sessions/{id}/frames/{t}     ?style=<kind>  -> image/png
//   POST /gestures/validate            gesture -> {"valid", "errors"}
//   GET  /health
class GatewayServer {
 public:
  explicit GatewayServer(Backends defaults);
  ~GatewayServer();
  GatewayServer(const GatewayServer&) = delete;
  GatewayServer& operator=(const GatewayServer&) = delete;

  // Binds (port 0 picks a free one) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Binds and serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

  SessionManager& sessions() noexcept { return manager_; }

 private:
  void install_routes();

  SessionManager manager_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace catv::gateway
