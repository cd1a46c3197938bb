#include <gtest/gtest.h>

#include <set>
#include <thread>

#include <fmt/format.h>

#include "catv/digest.hpp"
#include "catv/error.hpp"
#include "catv/orchestrator.hpp"
#include "pipeline_fixture.hpp"

using namespace catv;
using namespace catv::gateway;
namespace ts = catv::testing_support;

namespace {

struct Fixture {
  SynthResult synth = synth_clip(ts::two_object_scene());
  Backends backends = ts::fixture_backends(synth);
  std::shared_ptr<Session> session = std::make_shared<Session>(
      "s", "c", std::make_shared<const VideoClip>(synth.clip), backends);
};

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

// Records the frame digests each backend receives.
class SpyTemporal final : public TemporalBackend {
 public:
  std::string identity() const override { return "spy-temporal"; }
  std::vector<RawEvent> analyze(const VideoClip& clip) override {
    for (const auto& f : clip.frames()) seen.insert(frame_digest(f));
    return ts::fixture_events();
  }
  std::set<std::string> seen;
};

}  // namespace

TEST(SelectObject, PopulatesMaskletAndPreview) {
  Fixture fx;
  const auto preview = fx.session->select_object(ts::fixture_gesture(), false);
  const auto state = fx.session->snapshot();
  ASSERT_TRUE(state.masklet);
  ASSERT_TRUE(state.prompt);
  EXPECT_TRUE(state.chat_history.empty());
  EXPECT_EQ(state.masklet->masks, fx.synth.ground_truth[0].masks);
  EXPECT_EQ(preview.anchor_frame, 0);
  EXPECT_EQ(rle_decode(preview.anchor_mask), fx.synth.ground_truth[0].masks[0]);
  EXPECT_EQ(preview.boxes.size(), 12u);
  EXPECT_EQ(preview.boxes[0], bbox_of(fx.synth.ground_truth[0].masks[0]));
  EXPECT_EQ(preview.masklet_ref, masklet_ref(*state.masklet));
  const auto j = to_json(preview);
  EXPECT_EQ(j.at("boxes").size(), 12u);
  EXPECT_TRUE(j.contains("anchor_rle"));
}

TEST(SelectObject, Errors) {
  Fixture fx;
  auto g = ts::fixture_gesture();
  g.anchor_frame = 12;
  EXPECT_EQ(code_of([&] { fx.session->select_object(g); }), ErrorCode::kRange);

  Session no_video("s", "c", nullptr, fx.backends);
  EXPECT_EQ(code_of([&] { no_video.select_object(ts::fixture_gesture()); }), ErrorCode::kPrecondition);

  auto bad = ts::fixture_gesture();
  bad.points.clear();
  try {
    fx.session->select_object(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidPrompt);
    EXPECT_EQ(e.stage(), "segment");
  }
  EXPECT_FALSE(fx.session->snapshot().masklet);
}

TEST(RunPipeline, ProducesFixtureCaption) {
  Fixture fx;
  fx.session->select_object(ts::fixture_gesture());
  const PipelineConfig config;
  const auto r = fx.session->run_pipeline(config);
  auto expected = ts::fixture_caption();
  expected.raw = render_structured_caption(expected);
  EXPECT_EQ(r.structured, expected);
  EXPECT_EQ(r.timeline, normalize_events(ts::fixture_events(), fx.synth.clip.duration()));
  EXPECT_EQ(r.provenance.segmenter, "scripted-segmenter");
  EXPECT_EQ(r.provenance.temporal, "scripted-temporal");
  EXPECT_EQ(r.provenance.captioner, "scripted-captioner");
  EXPECT_EQ(r.provenance.config_hash, config_hash(config));
  EXPECT_EQ(r.caption_retries, 0);
  EXPECT_TRUE(r.provenance.stage_ms.count("temporal"));
  EXPECT_TRUE(r.provenance.stage_ms.count("caption"));
  EXPECT_EQ(canonical_json(r).find("stage_ms"), std::string::npos);
  EXPECT_NE(to_json(r, true).dump().find("stage_ms"), std::string::npos);

  const auto state = fx.session->snapshot();
  ASSERT_TRUE(state.last_result);
  EXPECT_EQ(canonical_json(*state.last_result), canonical_json(r));
  EXPECT_EQ(r.masklet_ref, masklet_ref(*state.masklet));
}

TEST(RunPipeline, DeterministicAcrossRuns) {
  std::vector<std::string> results;
  std::vector<std::vector<std::string>> frames;
  for (int run = 0; run < 3; ++run) {
    Fixture fx;
    fx.session->select_object(ts::fixture_gesture());
    PipelineConfig config;
    results.push_back(canonical_json(fx.session->run_pipeline(config)));
    std::vector<std::string> digests;
    for (int t = 0; t < fx.synth.clip.frame_count(); ++t) {
      digests.push_back(frame_digest(fx.session->render_frame(t, config.injection_style)));
    }
    frames.push_back(digests);
  }
  EXPECT_EQ(results[0], results[1]);
  EXPECT_EQ(results[1], results[2]);
  EXPECT_EQ(frames[0], frames[1]);
  EXPECT_EQ(frames[1], frames[2]);
}

TEST(RunPipeline, TemporalFallback) {
  Fixture fx;
  fx.backends.temporal = ScriptedTemporal::failing("connection refused");
  fx.session->set_backends(fx.backends);
  fx.session->select_object(ts::fixture_gesture());
  const auto r = fx.session->run_pipeline({});
  EXPECT_EQ(r.timeline, fallback_timeline(fx.synth.clip.duration()));
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(r.warnings[0].find("connection refused"), std::string::npos);

  PipelineConfig strict;
  strict.temporal_fallback = false;
  try {
    fx.session->run_pipeline(strict);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTemporalBackend);
    EXPECT_EQ(e.stage(), "temporal");
  }
}

TEST(RunPipeline, StageErrorsAreTagged) {
  Fixture fx;
  fx.backends.captioner = std::make_shared<ScriptedCaptioner>(std::vector<std::string>{"no", "labels", "here"});
  fx.session->set_backends(fx.backends);
  fx.session->select_object(ts::fixture_gesture());
  try {
    fx.session->run_pipeline({});
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.stage(), "caption");
    EXPECT_EQ(e.raw(), "here");
  }
  EXPECT_FALSE(fx.session->snapshot().last_result);
}

TEST(RunPipeline, Preconditions) {
  Fixture fx;
  EXPECT_EQ(code_of([&] { fx.session->run_pipeline({}); }), ErrorCode::kPrecondition);
  fx.session->select_object(ts::fixture_gesture());
  PipelineConfig bad;
  bad.captioner_frame_budget = 0;
  EXPECT_EQ(code_of([&] { fx.session->run_pipeline(bad); }), ErrorCode::kInvalidArgument);
}

TEST(RunPipeline, StageIsolation) {
  Fixture fx;
  auto spy = std::make_shared<SpyTemporal>();
  std::vector<std::string> captioner_frames;
  fx.backends.temporal = spy;
  const std::string reply = render_structured_caption(ts::fixture_caption());
  fx.backends.captioner = ScriptedCaptioner::from_function([&](const CaptionRequest& r) {
    for (const auto& f : r.frames) captioner_frames.push_back(frame_digest(f));
    return reply;
  });
  fx.session->set_backends(fx.backends);
  fx.session->select_object(ts::fixture_gesture());
  PipelineConfig config;
  config.captioner_frame_budget = 4;
  fx.session->run_pipeline(config);

  std::set<std::string> raw, injected;
  for (int t = 0; t < fx.synth.clip.frame_count(); ++t) {
    raw.insert(frame_digest(fx.synth.clip.frame(t)));
    injected.insert(frame_digest(fx.session->render_frame(t, config.injection_style)));
  }
  EXPECT_EQ(spy->seen, raw);
  EXPECT_EQ(captioner_frames.size(), sample_frame_indices(12, 4, 0).size());
  for (const auto& d : captioner_frames) {
    EXPECT_TRUE(injected.count(d));
    EXPECT_FALSE(raw.count(d));
  }
}

TEST(RunPipeline, ResegmentsWhenStabilizeChanges) {
  Fixture fx;
  auto seg = ScriptedSegmenter::from_masklet(fx.synth.ground_truth[0]);
  fx.backends.segmenter = seg;
  fx.session->set_backends(fx.backends);
  fx.session->select_object(ts::fixture_gesture(), false);
  const int after_select = seg->calls();
  PipelineConfig plain;
  plain.stabilize = false;
  fx.session->run_pipeline(plain);
  EXPECT_EQ(seg->calls(), after_select);
  fx.session->run_pipeline({});
  EXPECT_EQ(seg->calls(), 2 * after_select);
  EXPECT_TRUE(fx.session->snapshot().masklet_stabilized);
}

TEST(Chat, ThreadsHistory) {
  Fixture fx;
  const std::string structured = render_structured_caption(ts::fixture_caption());
  std::vector<std::string> prompts;
  fx.backends.captioner = ScriptedCaptioner::from_function([&](const CaptionRequest& r) {
    prompts.emplace_back(r.prompt);
    if (r.prompt.rfind(kChatPreamble, 0) != 0) return structured;
    return fmt::format("{} prior turns", r.history.size());
  });
  fx.session->set_backends(fx.backends);
  EXPECT_EQ(code_of([&] { fx.session->chat_turn("hi"); }), ErrorCode::kPrecondition);
  fx.session->select_object(ts::fixture_gesture());
  EXPECT_EQ(code_of([&] { fx.session->chat_turn("hi"); }), ErrorCode::kPrecondition);
  fx.session->run_pipeline({});

  EXPECT_EQ(fx.session->chat_turn("what colour is it?"), "0 prior turns");
  EXPECT_EQ(fx.session->chat_turn("where does it go?"), "2 prior turns");
  const auto history = fx.session->snapshot().chat_history;
  ASSERT_EQ(history.size(), 4u);
  EXPECT_EQ(history[0], (ChatTurn{"user", "what colour is it?"}));
  EXPECT_EQ(history[1], (ChatTurn{"assistant", "0 prior turns"}));
  EXPECT_NE(prompts.back().find("pay attention to the object highlighted"), std::string::npos);
  EXPECT_NE(prompts.back().find("where does it go?"), std::string::npos);

  fx.session->select_object(ts::fixture_gesture());
  EXPECT_TRUE(fx.session->snapshot().chat_history.empty());
}

TEST(Chat, BackendFailureLeavesHistory) {
  Fixture fx;
  const std::string structured = render_structured_caption(ts::fixture_caption());
  bool fail = false;
  fx.backends.captioner = ScriptedCaptioner::from_function([&](const CaptionRequest&) -> std::string {
    if (fail) throw std::runtime_error("gateway 500");
    return structured;
  });
  fx.session->set_backends(fx.backends);
  fx.session->select_object(ts::fixture_gesture());
  fx.session->run_pipeline({});
  fx.session->chat_turn("one");
  fail = true;
  try {
    fx.session->chat_turn("two");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCaptionerBackend);
    EXPECT_EQ(e.stage(), "chat");
  }
  EXPECT_EQ(fx.session->snapshot().chat_history.size(), 2u);
}

TEST(Chat, ConcurrentTurnsNeverTear) {
  Fixture fx;
  const std::string structured = render_structured_caption(ts::fixture_caption());
  fx.backends.captioner = ScriptedCaptioner::from_function([&](const CaptionRequest& r) {
    if (r.prompt.rfind(kChatPreamble, 0) != 0) return structured;
    return fmt::format("reply after {}", r.history.size());
  });
  fx.session->set_backends(fx.backends);
  fx.session->select_object(ts::fixture_gesture());
  fx.session->run_pipeline({});
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] {
      for (int k = 0; k < 5; ++k) fx.session->chat_turn(fmt::format("q{}-{}", i, k));
    });
  }
  for (auto& t : threads) t.join();
  const auto history = fx.session->snapshot().chat_history;
  ASSERT_EQ(history.size(), 80u);
  for (std::size_t i = 0; i < history.size(); i += 2) {
    EXPECT_EQ(history[i].role, "user");
    EXPECT_EQ(history[i + 1], (ChatTurn{"assistant", fmt::format("reply after {}", i)}));
  }
}

TEST(Session, RenderFrame) {
  Fixture fx;
  const InjectionStyle style;
  EXPECT_EQ(fx.session->render_frame(3, style), fx.synth.clip.frame(3));
  fx.session->select_object(ts::fixture_gesture());
  EXPECT_EQ(fx.session->render_frame(3, style), inject(fx.synth.clip.frame(3), fx.synth.ground_truth[0].masks[3], style));
  EXPECT_EQ(fx.session->render_frame(3, std::nullopt), fx.synth.clip.frame(3));
  EXPECT_THROW(fx.session->render_frame(12, style), Error);
}

TEST(SessionManager, IdsAndLookup) {
  Fixture fx;
  SessionManager m(fx.backends);
  EXPECT_EQ(m.add_clip(fx.synth.clip), "clip-1");
  EXPECT_EQ(m.add_clip(fx.synth.clip), "clip-2");
  EXPECT_EQ(m.create_session("clip-1")->id(), "session-1");
  EXPECT_EQ(m.create_session("clip-2")->id(), "session-2");
  EXPECT_EQ(m.session("session-2")->snapshot().clip_id, "clip-2");
  EXPECT_EQ(code_of([&] { m.session("session-9"); }), ErrorCode::kNotFound);
  EXPECT_EQ(code_of([&] { m.create_session("clip-9"); }), ErrorCode::kNotFound);
  EXPECT_EQ(code_of([&] { m.add_clip(VideoClip{}); }), ErrorCode::kEmptyVideo);
}

TEST(Config, JsonHashAndValidation) {
  PipelineConfig c;
  c.injection_style.kind = StyleKind::kHalo;
  c.captioner_frame_budget = 8;
  c.endpoints.captioner = "http://localhost:9000/caption";
  const nlohmann::json j = c;
  EXPECT_EQ(j.get<PipelineConfig>(), c);
  EXPECT_EQ(config_hash(c), config_hash(j.get<PipelineConfig>()));
  EXPECT_NE(config_hash(c), config_hash(PipelineConfig{}));
  EXPECT_EQ(config_hash(PipelineConfig{}).size(), 64u);

  const auto shorthand = nlohmann::json::parse(R"({"style": "polygon", "retry_limit": 0})").get<PipelineConfig>();
  EXPECT_EQ(shorthand.injection_style.kind, StyleKind::kPolygon);
  EXPECT_EQ(shorthand.retry_limit, 0);
  EXPECT_THROW(nlohmann::json::parse(R"({"retry_limit": -1})").get<PipelineConfig>(), Error);
}

TEST(CaptionResult, JsonRoundTrip) {
  Fixture fx;
  fx.session->select_object(ts::fixture_gesture());
  const auto r = fx.session->run_pipeline({});
  const auto back = caption_result_from_json(to_json(r, true));
  EXPECT_EQ(canonical_json(back), canonical_json(r));
  EXPECT_EQ(back.provenance.stage_ms, r.provenance.stage_ms);
}
