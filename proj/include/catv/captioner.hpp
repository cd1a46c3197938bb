#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "catv/media.hpp"
#include "catv/temporal.hpp"

namespace catv {

inline constexpr std::size_t kFieldCount = 8;

// Field labels of the chain-of-thought answer format, in template order.
inline constexpr std::array<std::string_view, kFieldCount> kFieldLabels{
    "HO",
    "HO's attributes",
    "All actions done by HO",
    "All statuses of HO",
    "All other objects interacted with HO",
    "All environments/backgrounds of HO",
    "All events related to HO",
    "Final object-centric paragraph caption",
};

inline constexpr std::array<std::string_view, 2> kSentinelSentences{
    "the subjects of all sentences MUST be HO",
    "whose timestamps are very accurate",
};

// Instruction block that follows the event captions. Also shipped as
// data/cot_template.txt.
extern const std::string_view kCotTemplate;

// "From {start}s to {end}s: {caption}" per event, then the template.
std::string build_cot_prompt(const Timeline& timeline);
std::string format_event_line(const Event& event);

struct StructuredCaption {
  std::string ho;
  std::string attributes;
  std::string actions;
  std::string statuses;
  std::string interacting_objects;
  std::string environments;
  std::string related_events;
  std::string final_paragraph;
  std::string raw;

  std::string& field(std::size_t i);
  const std::string& field(std::size_t i) const;

  friend bool operator==(const StructuredCaption&, const StructuredCaption&) = default;
};

void to_json(nlohmann::json& j, const StructuredCaption& c);
void from_json(const nlohmann::json& j, StructuredCaption& c);

// Renders fields in template order with bold labels.
std::string render_structured_caption(const StructuredCaption& caption);

struct ParseOptions {
  // Strict: every label exactly "**Label**: " at line start, all present, in order.
  bool strict = false;
};

struct ParsedCaption {
  StructuredCaption caption;
  std::vector<std::string> warnings;
};

// Throws ParseError when the HO or final-paragraph field is missing or empty.
ParsedCaption parse_structured_caption(std::string_view response, const ParseOptions& options = {});

struct ChatTurn {
  std::string role;  // "user" | "assistant"
  std::string text;

  friend bool operator==(const ChatTurn&, const ChatTurn&) = default;
};

void to_json(nlohmann::json& j, const ChatTurn& t);
void from_json(const nlohmann::json& j, ChatTurn& t);

struct CaptionRequest {
  std::span<const Frame> frames;
  std::string_view prompt;
  std::span<const ChatTurn> history;
};

class CaptionerBackend {
 public:
  virtual ~CaptionerBackend() = default;
  virtual std::string identity() const = 0;
  // Returns the model's text response. Throws on transport failure.
  virtual std::string generate(const CaptionRequest& request) = 0;
};

inline constexpr std::string_view kCorrectiveSuffix =
    "\n\nYour previous answer did not match the required structure. Please follow the format: "
    "start each field on its own line with its bold label, from **HO**: to "
    "**Final object-centric paragraph caption**:.";

struct CaptionOptions {
  int retry_limit = 2;
  ParseOptions parse;
};

struct CaptionOutcome {
  StructuredCaption caption;
  int retries = 0;
  std::vector<std::string> warnings;
};

CaptionOutcome request_caption(std::span<const Frame> frames, std::string_view prompt, CaptionerBackend& backend,
                               std::span<const ChatTurn> history = {}, const CaptionOptions& options = {});

// Uniform sample of up to `budget` frame indices plus the anchor, ascending.
std::vector<int> sample_frame_indices(int frame_count, int budget, int anchor);

}  // namespace catv
