#include "catv/captioner.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "catv/error.hpp"

namespace catv {

const std::string_view kCotTemplate =
    "Above are the event captions given by the user, whose timestamps are very accurate but the subjects of the "
    "sentences are not necessarily what we want to highlight. Please pay attention to the object highlighted (HO) "
    "by colored bounding box and blue mask in the video frames, and generate accurate object-centric caption for "
    "the HO. Please make sure in object-centric paragraph caption, the sentences should be detailed and specific, "
    "and the subjects of all sentences MUST be HO.\n"
    "Please follow the format:\n"
    "**HO**: ...\n"
    "**HO's attributes**: ...\n"
    "**All actions done by HO**: ...\n"
    "**All statuses of HO**: ...\n"
    "**All other objects interacted with HO**: ...\n"
    "**All environments/backgrounds of HO**: ...\n"
    "**All events related to HO**: ...\n"
    "**Final object-centric paragraph caption**: The HO is [attributes], [environment]. From ... to ...s, the HO "
    "[status], [any action], [any status/attribute/environment changes]... From ... to ...s, the HO [status], [any "
    "action], [any status/attribute/environment changes]. The OH's [final status] is ...\n";

std::string format_event_line(const Event& event) {
  std::string caption = event.caption;
  std::replace(caption.begin(), caption.end(), '\n', ' ');
  std::replace(caption.begin(), caption.end(), '\r', ' ');
  return fmt::format("From {:.1f}s to {:.1f}s: {}", event.start, event.end, caption);
}

std::string build_cot_prompt(const Timeline& timeline) {
  if (timeline.events.empty()) throw Error(ErrorCode::kPrecondition, "timeline has no events", "caption");
  std::string out;
  for (const auto& e : timeline.events) {
    out += format_event_line(e);
    out += '\n';
  }
  out += kCotTemplate;
  return out;
}

std::string& StructuredCaption::field(std::size_t i) {
  return const_cast<std::string&>(static_cast<const StructuredCaption&>(*this).field(i));
}

const std::string& StructuredCaption::field(std::size_t i) const {
  switch (i) {
    case 0: return ho;
    case 1: return attributes;
    case 2: return actions;
    case 3: return statuses;
    case 4: return interacting_objects;
    case 5: return environments;
    case 6: return related_events;
    case 7: return final_paragraph;
    default: throw Error(ErrorCode::kRange, fmt::format("caption field {} out of range", i));
  }
}

namespace {

constexpr std::array<std::string_view, kFieldCount> kJsonKeys{
    "ho", "attributes", "actions", "statuses", "interacting_objects", "environments", "related_events", "final_paragraph"};

}  // namespace

void to_json(nlohmann::json& j, const StructuredCaption& c) {
  j = nlohmann::json::object();
  for (std::size_t i = 0; i < kFieldCount; ++i) j[std::string(kJsonKeys[i])] = c.field(i);
  j["raw"] = c.raw;
}

void from_json(const nlohmann::json& j, StructuredCaption& c) {
  for (std::size_t i = 0; i < kFieldCount; ++i) c.field(i) = j.value(std::string(kJsonKeys[i]), std::string{});
  c.raw = j.value("raw", std::string{});
}

void to_json(nlohmann::json& j, const ChatTurn& t) { j = nlohmann::json{{"role", t.role}, {"text", t.text}}; }
void from_json(const nlohmann::json& j, ChatTurn& t) {
  j.at("role").get_to(t.role);
  j.at("text").get_to(t.text);
}

std::string render_structured_caption(const StructuredCaption& caption) {
  std::string out;
  for (std::size_t i = 0; i < kFieldCount; ++i) {
    out += fmt::format("**{}**: {}\n", kFieldLabels[i], caption.field(i));
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool iequals_prefix(std::string_view text, std::string_view prefix) {
  if (text.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

std::string normalize_quotes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    // U+2019 right single quotation mark.
    if (i + 2 < s.size() && s.compare(i, 3, "\xE2\x80\x99") == 0) {
      out += '\'';
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

struct LabelHit {
  std::size_t field;
  std::string rest;  // text after the colon
};

// Lenient: leading markdown/numbering, any case, bold markers around the
// label, ASCII or full-width colon.
std::optional<LabelHit> match_label_lenient(std::string_view line) {
  const std::string norm = normalize_quotes(line);
  std::string_view s = norm;
  auto skip = [&](std::string_view chars) {
    while (!s.empty() && chars.find(s.front()) != std::string_view::npos) s.remove_prefix(1);
  };
  skip(" \t*#->_");
  std::size_t digits = 0;
  while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) ++digits;
  if (digits > 0 && digits < s.size() && (s[digits] == '.' || s[digits] == ')')) {
    s.remove_prefix(digits + 1);
    skip(" \t*_");
  }
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < kFieldCount; ++i) {
    if (iequals_prefix(s, kFieldLabels[i]) && (!best || kFieldLabels[i].size() > kFieldLabels[*best].size())) {
      // Reject matches that continue a word ("HOw").
      const auto next = kFieldLabels[i].size();
      if (next < s.size() && (std::isalnum(static_cast<unsigned char>(s[next])) || s[next] == '\'')) continue;
      best = i;
    }
  }
  if (!best) return std::nullopt;
  s.remove_prefix(kFieldLabels[*best].size());
  skip(" \t*_");
  if (!s.empty() && s.front() == ':') {
    s.remove_prefix(1);
  } else if (s.substr(0, 3) == "\xEF\xBC\x9A") {
    s.remove_prefix(3);
  } else {
    return std::nullopt;
  }
  // "**HO:** text" puts the closing bold after the colon.
  skip("*_");
  return LabelHit{*best, std::string(s)};
}

std::optional<LabelHit> match_label_strict(std::string_view line) {
  for (std::size_t i = 0; i < kFieldCount; ++i) {
    const auto head = fmt::format("**{}**:", kFieldLabels[i]);
    if (line.substr(0, head.size()) == head) return LabelHit{i, std::string(line.substr(head.size()))};
  }
  return std::nullopt;
}

}  // namespace

ParsedCaption parse_structured_caption(std::string_view response, const ParseOptions& options) {
  ParsedCaption out;
  out.caption.raw = std::string(response);

  std::array<std::optional<std::string>, kFieldCount> fields;
  std::vector<std::size_t> order;
  std::optional<std::size_t> current;
  std::string buffer;
  auto flush = [&] {
    if (!current) return;
    if (!fields[*current]) {
      fields[*current] = std::string(trim(buffer));
    } else {
      out.warnings.push_back(fmt::format("duplicate field '{}' ignored", kFieldLabels[*current]));
    }
    buffer.clear();
  };

  std::size_t pos = 0;
  while (pos <= response.size()) {
    const auto nl = response.find('\n', pos);
    std::string_view line = response.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto hit = options.strict ? match_label_strict(line) : match_label_lenient(line);
    if (hit) {
      flush();
      current = hit->field;
      order.push_back(hit->field);
      buffer = hit->rest;
    } else if (current) {
      buffer += '\n';
      buffer += line;
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  flush();

  const auto raw = std::string(response);
  if (!fields[0] || fields[0]->empty()) throw ParseError("response has no 'HO' field", raw);
  if (!fields[kFieldCount - 1] || fields[kFieldCount - 1]->empty()) {
    throw ParseError("response has no 'Final object-centric paragraph caption' field", raw);
  }
  for (std::size_t i = 1; i + 1 < kFieldCount; ++i) {
    if (!fields[i]) {
      if (options.strict) throw ParseError(fmt::format("missing field '{}'", kFieldLabels[i]), raw);
      out.warnings.push_back(fmt::format("missing field '{}'", kFieldLabels[i]));
    }
  }
  if (!std::is_sorted(order.begin(), order.end())) {
    if (options.strict) throw ParseError("fields out of template order", raw);
    out.warnings.emplace_back("fields appear out of template order");
  }
  for (std::size_t i = 0; i < kFieldCount; ++i) {
    if (fields[i]) out.caption.field(i) = std::move(*fields[i]);
  }
  return out;
}

CaptionOutcome request_caption(std::span<const Frame> frames, std::string_view prompt, CaptionerBackend& backend,
                               std::span<const ChatTurn> history, const CaptionOptions& options) {
  if (frames.empty()) throw Error(ErrorCode::kPrecondition, "captioner needs at least one frame", "caption");
  if (options.retry_limit < 0) throw Error(ErrorCode::kInvalidArgument, "retry limit must be >= 0", "caption");
  CaptionOutcome outcome;
  std::string current_prompt(prompt);
  for (int attempt = 0;; ++attempt) {
    std::string response;
    try {
      response = backend.generate(CaptionRequest{frames, current_prompt, history});
    } catch (const std::exception& e) {
      rethrow_if_replay_miss(e);
      throw Error(ErrorCode::kCaptionerBackend,
                  fmt::format("captioner backend '{}' failed: {}", backend.identity(), e.what()), "caption");
    }
    try {
      auto parsed = parse_structured_caption(response, options.parse);
      outcome.caption = std::move(parsed.caption);
      outcome.retries = attempt;
      outcome.warnings.insert(outcome.warnings.end(), parsed.warnings.begin(), parsed.warnings.end());
      return outcome;
    } catch (const ParseError& e) {
      if (attempt >= options.retry_limit) {
        throw ParseError(fmt::format("{} (after {} attempts)", e.what(), attempt + 1), e.raw());
      }
      outcome.warnings.push_back(fmt::format("attempt {}: {}; retrying", attempt + 1, e.what()));
      current_prompt = std::string(prompt) + std::string(kCorrectiveSuffix);
    }
  }
}

std::vector<int> sample_frame_indices(int frame_count, int budget, int anchor) {
  if (frame_count < 1) throw Error(ErrorCode::kEmptyVideo, "no frames to sample");
  if (budget < 1) throw Error(ErrorCode::kInvalidArgument, "frame budget must be >= 1");
  std::vector<int> out;
  const int n = std::min(budget, frame_count);
  if (n == 1) {
    out.push_back(0);
  } else {
    for (int i = 0; i < n; ++i) {
      out.push_back(static_cast<int>(std::floor(static_cast<double>(i) * (frame_count - 1) / (n - 1) + 0.5)));
    }
  }
  if (anchor >= 0 && anchor < frame_count) out.push_back(anchor);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace catv
