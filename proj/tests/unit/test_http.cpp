#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "catv/digest.hpp"
#include "catv/error.hpp"
#include "catv/gateway/http_backends.hpp"
#include "catv/gateway/server.hpp"
#include "catv/gateway/wire.hpp"
#include "pipeline_fixture.hpp"
#include "test_support.hpp"

#include <httplib.h>

using namespace catv;
using namespace catv::gateway;
namespace ts = catv::testing_support;
namespace fs = std::filesystem;

namespace {

// httplib server on a free port, torn down with the object.
class FakeServer {
 public:
  FakeServer() = default;
  ~FakeServer() {
    server.stop();
    if (thread_.joinable()) thread_.join();
  }
  std::string start() {
    port_ = server.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
    return "http://127.0.0.1:" + std::to_string(port_);
  }

  httplib::Server server;

 private:
  int port_ = 0;
  std::thread thread_;
};

int unused_port() {
  httplib::Server s;
  return s.bind_to_any_port("127.0.0.1");
}

void reply(httplib::Response& res, const nlohmann::json& j) { res.set_content(j.dump(), "application/json"); }

}  // namespace

TEST(Endpoint, Parse) {
  const auto e = parse_endpoint("http://localhost:8080/v1/segment");
  EXPECT_EQ(e.origin, "http://localhost:8080");
  EXPECT_EQ(e.path, "/v1/segment");
  EXPECT_EQ(parse_endpoint("http://models").path, "/");
  for (const char* bad : {"https://x/y", "ftp://x", "http://", "http://x:port/p", "localhost:80/x"}) {
    try {
      parse_endpoint(bad);
      FAIL() << bad;
    } catch (const Error& e2) {
      EXPECT_EQ(e2.code(), ErrorCode::kInvalidArgument) << bad;
    }
  }
}

TEST(PostJson, TransportAndStatusErrors) {
  FakeServer fake;
  fake.server.Post("/ok", [](const httplib::Request& req, httplib::Response& res) {
    reply(res, {{"echo", nlohmann::json::parse(req.body)}});
  });
  fake.server.Post("/boom", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content("internal", "text/plain");
  });
  fake.server.Post("/garbled", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("{not json", "application/json");
  });
  const auto base = fake.start();
  EXPECT_EQ(post_json(parse_endpoint(base + "/ok"), {{"a", 1}}, ErrorCode::kIo).at("echo").at("a"), 1);
  for (const char* path : {"/boom", "/garbled"}) {
    try {
      post_json(parse_endpoint(base + path), {}, ErrorCode::kTemporalBackend);
      FAIL() << path;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kTemporalBackend) << path;
    }
  }
  const auto dead = parse_endpoint("http://127.0.0.1:" + std::to_string(unused_port()) + "/x");
  try {
    post_json(dead, {}, ErrorCode::kCaptionerBackend, {.connect_timeout_s = 2, .read_timeout_s = 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCaptionerBackend);
  }
}

// Remote model servers speaking the wire contract, backed by the fixture.
TEST(HttpAdapters, FullPipelineOverHttp) {
  const auto synth = synth_clip(ts::two_object_scene());
  std::map<std::string, int> frame_of;
  for (int t = 0; t < synth.clip.frame_count(); ++t) frame_of[frame_digest(synth.clip.frame(t))] = t;
  std::atomic<int> seg_calls = 0, temporal_frames = 0;
  std::vector<std::string> tokens;
  std::mutex tokens_mutex;
  nlohmann::json last_history;

  FakeServer fake;
  fake.server.Post("/segment", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const auto frame = frame_from_png_base64(body.at("frame_png_base64").get<std::string>());
    const int t = frame_of.at(frame_digest(frame));
    EXPECT_TRUE(body.at("prompt").contains("kind"));
    {
      std::lock_guard lock(tokens_mutex);
      tokens.push_back(body.at("context_token").get<std::string>());
    }
    ++seg_calls;
    reply(res, segment_response_json({synth.ground_truth[0].masks[t], 0.9, "after-" + std::to_string(t)}));
  });
  fake.server.Post("/temporal", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    temporal_frames = static_cast<int>(body.at("frames_png_base64").size());
    EXPECT_DOUBLE_EQ(body.at("fps").get<double>(), 5.0);
    reply(res, events_json(ts::fixture_events()));
  });
  fake.server.Post("/caption", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    EXPECT_FALSE(body.at("frames_png_base64").empty());
    last_history = body.at("history");
    const auto prompt = body.at("prompt").get<std::string>();
    if (prompt.rfind(kChatPreamble, 0) == 0) {
      reply(res, {{"text", "chat reply"}});
    } else {
      reply(res, {{"text", render_structured_caption(ts::fixture_caption())}});
    }
  });
  const auto base = fake.start();

  BackendEndpoints endpoints{base + "/segment", base + "/temporal", base + "/caption"};
  const auto backends = with_endpoints(ts::fixture_backends(synth), endpoints);
  EXPECT_EQ(backends.segmenter->identity(), "http-segmenter " + endpoints.segmenter);
  Session session("s", "c", std::make_shared<const VideoClip>(synth.clip), backends);
  const auto preview = session.select_object(ts::fixture_gesture());
  EXPECT_EQ(seg_calls, 12);
  EXPECT_EQ(tokens.front(), "");
  EXPECT_EQ(tokens[1], "after-0");
  EXPECT_EQ(rle_decode(preview.anchor_mask), synth.ground_truth[0].masks[0]);

  const auto r = session.run_pipeline({});
  EXPECT_EQ(r.structured.ho, ts::fixture_caption().ho);
  EXPECT_EQ(r.timeline, normalize_events(ts::fixture_events(), synth.clip.duration()));
  EXPECT_EQ(temporal_frames, 12);
  EXPECT_EQ(session.chat_turn("and then?"), "chat reply");
  EXPECT_EQ(session.chat_turn("more?"), "chat reply");
  ASSERT_EQ(last_history.size(), 2u);
  EXPECT_EQ(last_history[0].at("role"), "user");
  EXPECT_EQ(last_history[0].at("text"), "and then?");
}

TEST(HttpAdapters, MalformedReplies) {
  FakeServer fake;
  fake.server.Post("/x", [](const httplib::Request&, httplib::Response& res) { reply(res, {{"unexpected", true}}); });
  const auto base = fake.start();
  const auto clip = ts::uniform_clip(2, 8, 8, 5.0);
  const auto p = normalize_prompt(ts::fixture_gesture(), 8, 8);
  HttpSegmenter seg(base + "/x");
  HttpTemporal tmp(base + "/x");
  HttpCaptioner cap(base + "/x");
  auto code = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kIo;
  };
  EXPECT_EQ(code([&] { seg.segment({&clip.frame(0), &p, ""}); }), ErrorCode::kSegmentationFailed);
  EXPECT_EQ(code([&] { tmp.analyze(clip); }), ErrorCode::kTemporalBackend);
  const auto frames = clip.frames();
  EXPECT_EQ(code([&] { cap.generate({frames, "p", {}}); }), ErrorCode::kCaptionerBackend);
}

TEST(ServerErrors, StatusMapping) {
  EXPECT_EQ(http_status(ErrorCode::kNotFound), 404);
  EXPECT_EQ(http_status(ErrorCode::kPrecondition), 409);
  EXPECT_EQ(http_status(ErrorCode::kInvalidPrompt), 400);
  EXPECT_EQ(http_status(ErrorCode::kCaptionerBackend), 502);
  EXPECT_EQ(http_status(ErrorCode::kReplayMiss), 502);
  EXPECT_EQ(http_status(ErrorCode::kIo), 500);
  const auto body = error_body(Error(ErrorCode::kParse, "bad", "caption"));
  EXPECT_EQ(body, (nlohmann::json{{"code", "parse"}, {"stage", "caption"}, {"message", "bad"}}));
}

class GatewayTest : public ::testing::Test {
 protected:
  void SetUp() override {
    synth_ = synth_clip(ts::two_object_scene());
    server_ = std::make_unique<GatewayServer>(ts::fixture_backends(synth_));
    port_ = server_->start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override { server_->stop(); }

  std::pair<int, nlohmann::json> post(const std::string& path, const nlohmann::json& body) {
    const auto res = client_->Post(path, body.dump(), "application/json");
    if (!res) return {0, nullptr};
    return {res->status, res->body.empty() ? nlohmann::json() : nlohmann::json::parse(res->body)};
  }

  std::string new_session() {
    const auto [status, clip] = post("/videos", {{"scene", ts::two_object_scene()}});
    EXPECT_EQ(status, 201);
    const auto [s2, session] = post("/sessions", {{"clip_id", clip.at("clip_id")}});
    EXPECT_EQ(s2, 201);
    return session.at("session_id").get<std::string>();
  }

  SynthResult synth_;
  std::unique_ptr<GatewayServer> server_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> client_;
};

TEST_F(GatewayTest, HealthAndCors) {
  const auto res = client_->Get("/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
  const auto pre = client_->Options("/sessions");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
  EXPECT_NE(pre->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
}

TEST_F(GatewayTest, UploadVariants) {
  const auto [status, meta] = post("/videos", {{"scene", ts::two_object_scene()}});
  EXPECT_EQ(status, 201);
  EXPECT_EQ(meta.at("frame_count"), 12);
  EXPECT_EQ(meta.at("width"), 64);
  EXPECT_EQ(meta.at("clip_id"), "clip-1");

  const auto [s2, from_clip] = post("/videos", clip_json(synth_.clip));
  EXPECT_EQ(s2, 201);
  EXPECT_EQ(server_->sessions().clip(from_clip.at("clip_id").get<std::string>())->frames(), synth_.clip.frames());

  const auto path = fs::temp_directory_path() / "catv_http_upload.avi";
  write_video(path, synth_.clip);
  std::ifstream in(path, std::ios::binary);
  std::stringstream bytes;
  bytes << in.rdbuf();
  const auto res = client_->Post("/videos", bytes.str(), "video/x-msvideo");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201) << res->body;
  EXPECT_EQ(nlohmann::json::parse(res->body).at("frame_count"), 12);

  const auto bad = client_->Post("/videos", std::string("not a video"), "application/octet-stream");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(nlohmann::json::parse(bad->body).at("code"), "decode");
}

TEST_F(GatewayTest, FullSessionFlow) {
  const auto id = new_session();
  const auto base = "/sessions/" + id;

  auto [s_early, early] = post(base + "/chat", {{"message", "hi"}});
  EXPECT_EQ(s_early, 409);
  EXPECT_EQ(early.at("code"), "precondition");
  EXPECT_EQ(early.at("stage"), "chat");
  EXPECT_FALSE(early.at("message").get<std::string>().empty());

  auto [s_bad, bad] = post(base + "/prompt", {{"gesture", {{"kind", "points"}}}});
  EXPECT_EQ(s_bad, 400);
  EXPECT_EQ(bad.at("code"), "invalid_prompt");

  auto [s_prompt, preview] = post(base + "/prompt", {{"gesture", gesture_to_json(ts::fixture_gesture())}});
  ASSERT_EQ(s_prompt, 200) << preview.dump();
  EXPECT_EQ(preview.at("boxes").size(), 12u);
  EXPECT_EQ(rle_decode(preview.at("anchor_rle").get<RleMask>()), synth_.ground_truth[0].masks[0]);

  auto [s_cap, result] = post(base + "/caption", {{"config", {{"style", "halo"}}}});
  ASSERT_EQ(s_cap, 200) << result.dump();
  EXPECT_EQ(result.at("structured").at("ho"), ts::fixture_caption().ho);
  EXPECT_TRUE(result.at("provenance").contains("stage_ms"));
  const auto parsed = caption_result_from_json(result);
  EXPECT_EQ(parsed.timeline.events.size(), 2u);

  auto [s_chat, chat] = post(base + "/chat", {{"message", "what is it?"}});
  EXPECT_EQ(s_chat, 200);
  EXPECT_TRUE(chat.contains("reply"));

  const auto png = client_->Get(base + "/frames/3?style=halo");
  ASSERT_TRUE(png);
  EXPECT_EQ(png->status, 200);
  EXPECT_EQ(png->get_header_value("Content-Type"), "image/png");
  const auto frame = decode_png(std::span(reinterpret_cast<const std::uint8_t*>(png->body.data()), png->body.size()));
  const auto expected = inject(synth_.clip.frame(3), synth_.ground_truth[0].masks[3], {StyleKind::kHalo, {}});
  EXPECT_TRUE(std::equal(frame.pixels().begin(), frame.pixels().end(), expected.pixels().begin(), expected.pixels().end()));

  const auto raw = client_->Get(base + "/frames/3");
  ASSERT_TRUE(raw);
  EXPECT_EQ(raw->status, 200);
  const auto out_of_range = client_->Get(base + "/frames/40");
  ASSERT_TRUE(out_of_range);
  EXPECT_EQ(out_of_range->status, 400);
  EXPECT_EQ(nlohmann::json::parse(out_of_range->body).at("code"), "range");
  const auto bad_style = client_->Get(base + "/frames/1?style=glitter");
  ASSERT_TRUE(bad_style);
  EXPECT_EQ(bad_style->status, 400);
}

TEST_F(GatewayTest, ErrorBodies) {
  auto [s404, nf] = post("/sessions/session-99/chat", {{"message", "x"}});
  EXPECT_EQ(s404, 404);
  EXPECT_EQ(nf.at("code"), "not_found");
  auto [s_clip, nc] = post("/sessions", {{"clip_id", "clip-42"}});
  EXPECT_EQ(s_clip, 404);
  const auto garbage = client_->Post("/sessions", std::string("{oops"), "application/json");
  ASSERT_TRUE(garbage);
  EXPECT_EQ(garbage->status, 400);
  EXPECT_EQ(nlohmann::json::parse(garbage->body).at("stage"), "request");
  auto [s_missing, missing] = post("/sessions", nlohmann::json::object());
  EXPECT_EQ(s_missing, 400);

  const auto id = new_session();
  auto [s_cap, early] = post("/sessions/" + id + "/caption", {{"config", nlohmann::json::object()}});
  EXPECT_EQ(s_cap, 409);
  auto [s_cfg, cfg] = post("/sessions/" + id + "/caption", {{"config", {{"captioner_frame_budget", 0}}}});
  EXPECT_EQ(s_cfg, 400);
  EXPECT_EQ(cfg.at("code"), "invalid_argument");
}

TEST_F(GatewayTest, GestureValidation) {
  auto [s_ok, ok] = post("/gestures/validate", gesture_to_json(ts::fixture_gesture()));
  EXPECT_EQ(s_ok, 200);
  EXPECT_EQ(ok.at("valid"), true);
  EXPECT_TRUE(ok.at("errors").empty());

  for (const auto& bad : {nlohmann::json{{"kind", "teleport"}}, nlohmann::json{{"kind", "box"}},
                          nlohmann::json{{"kind", "point-set"}, {"normalized", true}, {"points", {{{"x", 1.5}, {"y", 0.2}}}}}}) {
    auto [s_bad, res] = post("/gestures/validate", bad);
    EXPECT_EQ(s_bad, 200);
    EXPECT_EQ(res.at("valid"), false) << bad.dump();
    EXPECT_FALSE(res.at("errors").empty());
  }
}

TEST_F(GatewayTest, ConcurrentSessions) {
  std::vector<std::string> ids;
  for (int i = 0; i < 4; ++i) ids.push_back(new_session());
  std::vector<std::thread> threads;
  std::atomic<int> ok = 0;
  for (const auto& id : ids) {
    threads.emplace_back([&, id] {
      httplib::Client c("127.0.0.1", port_);
      const auto base = "/sessions/" + id;
      auto p = c.Post(base + "/prompt", nlohmann::json{{"gesture", gesture_to_json(ts::fixture_gesture())}}.dump(),
                      "application/json");
      auto r = c.Post(base + "/caption", "{}", "application/json");
      if (p && p->status == 200 && r && r->status == 200) ++ok;
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok, 4);
}
