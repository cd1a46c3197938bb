#include <gtest/gtest.h>

#include <random>

#include "catv/error.hpp"
#include "catv/gateway/scripted.hpp"
#include "catv/temporal.hpp"
#include "properties.hpp"
#include "test_support.hpp"

using namespace catv;
using catv::gateway::ScriptedTemporal;
namespace ts = catv::testing_support;

namespace {

VideoClip five_seconds() { return ts::uniform_clip(25, 8, 8, 5.0); }

}  // namespace

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize_events({{-1, 3, "a"}, {2, 5, "b"}}, 4),
            (Timeline{{{0, 3, "a"}, {2, 4, "b"}}, 4}));
  EXPECT_EQ(normalize_events({{3, 1, "bad"}}, 10), (Timeline{{{0, 10, "the full video"}}, 10}));
  const Timeline valid{{{0, 2, "a man runs"}, {2, 5, "a man jumps"}}, 5};
  EXPECT_EQ(normalize_events({{0, 2, "a man runs"}, {2, 5, "a man jumps"}}, 5), valid);
}

TEST(Normalize, SortsAndKeepsOverlaps) {
  const auto tl = normalize_events({{3, 4, "c"}, {1, 5, "b"}, {1, 2, "a"}, {0.5, 0.5, "empty"}, {2, 3, ""}}, 6);
  EXPECT_EQ(tl.events, (std::vector<Event>{{1, 2, "a"}, {1, 5, "b"}, {3, 4, "c"}}));
}

TEST(Normalize, NonFiniteAndBadDuration) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(normalize_events({{nan, 1, "a"}, {0, inf, "b"}}, 3).events, (std::vector<Event>{{0, 3, "b"}}));
  for (double d : {0.0, -1.0, nan, inf}) {
    try {
      normalize_events({}, d);
      FAIL() << d;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kPrecondition);
    }
  }
}

TEST(Normalize, PropertySuite) {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> dur(0.1, 60.0);
  int violations = 0;
  for (int i = 0; i < 2000; ++i) {
    const double d = dur(rng);
    const auto raw = ts::random_raw_events(rng, d);
    const auto v = ts::timeline_violation(raw, d);
    if (!v.empty()) {
      ++violations;
      ADD_FAILURE() << "case " << i << ": " << v;
    }
    if (violations > 5) break;
  }
  EXPECT_EQ(violations, 0);
}

TEST(AnalyzeTimeline, PassesThroughValidEvents) {
  ScriptedTemporal backend({{0, 2, "a man runs"}, {2, 5, "a man jumps"}});
  const auto r = analyze_timeline(five_seconds(), backend);
  EXPECT_EQ(r.timeline, (Timeline{{{0, 2, "a man runs"}, {2, 5, "a man jumps"}}, 5}));
  EXPECT_TRUE(r.warnings.empty());
}

TEST(AnalyzeTimeline, EmptyBackendOutputFallsBack) {
  ScriptedTemporal backend({});
  const auto r = analyze_timeline(five_seconds(), backend);
  EXPECT_EQ(r.timeline, (Timeline{{{0, 5, "the full video"}}, 5}));
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(AnalyzeTimeline, BackendFailure) {
  auto backend = ScriptedTemporal::failing("timeout");
  try {
    analyze_timeline(five_seconds(), *backend);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTemporalBackend);
    EXPECT_EQ(e.stage(), "temporal");
    EXPECT_NE(std::string(e.what()).find("timeout"), std::string::npos);
  }
  const auto r = analyze_timeline(five_seconds(), *backend, {.fallback_on_error = true});
  EXPECT_EQ(r.timeline, fallback_timeline(5));
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("timeout"), std::string::npos);
}

TEST(AnalyzeTimeline, EmptyClip) {
  ScriptedTemporal backend({});
  try {
    analyze_timeline(VideoClip{}, backend);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPrecondition);
  }
}

TEST(EventsForTime, Examples) {
  const Timeline tl{{{0, 2, "a"}, {2, 5, "b"}}, 5};
  EXPECT_EQ(events_for_time(tl, 2.0), (std::vector<Event>{{2, 5, "b"}}));
  EXPECT_EQ(events_for_time(tl, 5.0), (std::vector<Event>{{2, 5, "b"}}));
  EXPECT_EQ(events_for_time(tl, 0.0), (std::vector<Event>{{0, 2, "a"}}));

  const Timeline overlap{{{0, 3, "a"}, {1, 4, "b"}}, 4};
  EXPECT_EQ(events_for_time(overlap, 2.0), (std::vector<Event>{{0, 3, "a"}, {1, 4, "b"}}));

  for (double t : {-0.1, 5.1}) {
    try {
      events_for_time(tl, t);
      FAIL() << t;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kRange);
    }
  }
}

TEST(EventsForTime, PartitionsContiguousTimeline) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> cut(0.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> cuts{0.0, 10.0};
    for (int k = 0; k < 4; ++k) cuts.push_back(cut(rng));
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<RawEvent> raw;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) raw.push_back({cuts[i], cuts[i + 1], "e"});
    const auto tl = normalize_events(raw, 10.0);
    for (int s = 0; s <= 1000; ++s) EXPECT_EQ(events_for_time(tl, s / 100.0).size(), 1u) << s / 100.0;
  }
}

TEST(Timeline, Json) {
  const Timeline tl{{{0, 2.5, "a"}, {1, 3, "b"}}, 3};
  const nlohmann::json j = tl;
  EXPECT_EQ(j.at("events").size(), 2u);
  EXPECT_EQ(j.get<Timeline>(), tl);
}
