#include "catv/gateway/mock_backends.hpp"

#include <cstdlib>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "catv/error.hpp"

namespace catv::gateway {

namespace {

std::uint32_t pack(Rgb c) { return (std::uint32_t{c.r} << 16) | (std::uint32_t{c.g} << 8) | c.b; }

Rgb most_frequent(const Frame& f, const BinaryMask& where) {
  std::map<std::uint32_t, int> counts;
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      if (where.get(y, x)) ++counts[pack(f.at(y, x))];
    }
  }
  if (counts.empty()) throw Error(ErrorCode::kInvalidPrompt, "prompt covers no pixels");
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it) {
    if (it->second > best->second) best = it;  // ties keep the lowest packed colour
  }
  const auto v = best->first;
  return {static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
}

Rgb prompt_color(const Frame& f, const VisualPrompt& p) {
  switch (p.kind) {
    case PromptKind::kPointSet:
      for (const auto& pt : p.points) {
        if (pt.positive) return f.at(pt.y, pt.x);
      }
      throw Error(ErrorCode::kInvalidPrompt, "point prompt has no positive point");
    case PromptKind::kBox: {
      BinaryMask m(f.height(), f.width());
      m.fill_box(*p.box);
      return most_frequent(f, m);
    }
    case PromptKind::kRegion:
      return most_frequent(f, *p.region);
  }
  throw Error(ErrorCode::kInvalidPrompt, "unknown prompt kind");
}

Rgb parse_token(const std::string& token) {
  unsigned r = 0, g = 0, b = 0;
  if (std::sscanf(token.c_str(), "rgb:%u,%u,%u", &r, &g, &b) != 3 || r > 255 || g > 255 || b > 255) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("bad context token '{}'", token));
  }
  return {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
}

double mean_abs_diff(const Frame& a, const Frame& b) {
  const auto& pa = a.pixels();
  const auto& pb = b.pixels();
  double sum = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) sum += std::abs(int{pa[i]} - int{pb[i]});
  return pa.empty() ? 0.0 : sum / static_cast<double>(pa.size());
}

std::string color_name(Rgb c) {
  const int hi = std::max({c.r, c.g, c.b});
  if (hi < 40) return "dark";
  if (c.r == hi && c.g < hi / 2 && c.b < hi / 2) return "red";
  if (c.g == hi && c.r < hi / 2 && c.b < hi / 2) return "green";
  if (c.b == hi && c.r < hi / 2 && c.g < hi / 2) return "blue";
  if (c.r > 200 && c.g > 200 && c.b > 200) return "white";
  return "multicoloured";
}

}  // namespace

std::string ColorRegionSegmenter::identity() const { return fmt::format("mock-color-segmenter/1 tol={}", tolerance_); }

SegmentResponse ColorRegionSegmenter::segment(const SegmentRequest& request) {
  const Frame& f = *request.frame;
  Rgb target{};
  if (request.context_token.empty()) {
    if (!request.prompt) throw Error(ErrorCode::kInvalidPrompt, "first call needs a prompt");
    target = prompt_color(f, *request.prompt);
  } else {
    target = parse_token(request.context_token);
  }
  BinaryMask mask(f.height(), f.width());
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      const Rgb c = f.at(y, x);
      if (std::abs(c.r - target.r) <= tolerance_ && std::abs(c.g - target.g) <= tolerance_ &&
          std::abs(c.b - target.b) <= tolerance_) {
        mask.set(y, x);
      }
    }
  }
  return SegmentResponse{std::move(mask), 1.0, fmt::format("rgb:{},{},{}", target.r, target.g, target.b)};
}

std::string MotionTemporal::identity() const { return fmt::format("mock-motion-temporal/1 thr={}", threshold_); }

std::vector<RawEvent> MotionTemporal::analyze(const VideoClip& clip) {
  const int n = clip.frame_count();
  std::vector<bool> moving(static_cast<std::size_t>(n), false);
  for (int t = 1; t < n; ++t) moving[t] = mean_abs_diff(clip.frame(t - 1), clip.frame(t)) > threshold_;
  if (n > 1) moving[0] = moving[1];
  std::vector<RawEvent> events;
  int start = 0;
  for (int t = 1; t <= n; ++t) {
    if (t == n || moving[t] != moving[start]) {
      events.push_back({start / clip.fps(), t / clip.fps(),
                        moving[start] ? "objects move across the scene" : "the scene is still"});
      start = t;
    }
  }
  return events;
}

std::string TemplateCaptioner::generate(const CaptionRequest& request) {
  const std::string_view prompt = request.prompt;
  if (prompt.rfind(kChatPreamble, 0) == 0) {
    const auto nl = prompt.find_last_of('\n');
    const auto question = nl == std::string_view::npos ? prompt : prompt.substr(nl + 1);
    return fmt::format("About the HO ({} earlier exchanges): {}", request.history.size() / 2, question);
  }

  std::vector<std::string> events;
  std::istringstream lines{std::string(prompt)};
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind("From ", 0) == 0) events.push_back(line);
  }
  std::string colour = "unseen";
  if (!request.frames.empty()) {
    const auto& f = request.frames.front();
    colour = color_name(f.at(f.height() / 2, f.width() / 2));
  }

  StructuredCaption c;
  c.ho = "the highlighted object";
  c.attributes = fmt::format("{} at the frame centre, seen in {} frames", colour, request.frames.size());
  c.actions = events.empty() ? "none observed" : fmt::format("takes part in {} timed events", events.size());
  c.statuses = "visible throughout the sampled frames";
  c.interacting_objects = "none";
  c.environments = "a plain synthetic background";
  std::string joined;
  for (const auto& e : events) joined += (joined.empty() ? "" : "; ") + e;
  c.related_events = joined.empty() ? "none" : joined;
  c.final_paragraph = fmt::format("The highlighted object appears in {} frames and takes part in {} events.",
                                  request.frames.size(), events.size());
  return render_structured_caption(c);
}

Backends mock_backends() {
  return Backends{std::make_shared<ColorRegionSegmenter>(), std::make_shared<MotionTemporal>(),
                  std::make_shared<TemplateCaptioner>()};
}

}  // namespace catv::gateway
