#pragma once

#include <string>
#include <vector>

#include "catv/captioner.hpp"
#include "catv/orchestrator.hpp"
#include "catv/segmenter.hpp"
#include "catv/temporal.hpp"

// Deterministic stand-ins for the neural backends, good enough to drive
// the pipeline end to end on synthetic clips.
namespace catv::gateway {

// Picks the prompted colour on the anchor frame (first positive point, or
// the most frequent colour inside the box/region) and masks every pixel of
// that colour, within `tolerance` per channel. Propagates the colour through
// the context token "rgb:R,G,B".
class ColorRegionSegmenter final : public SegmenterBackend {
 public:
  explicit ColorRegionSegmenter(int tolerance = 0) : tolerance_(tolerance) {}
  SegmenterCapabilities capabilities() const override { return {true, true, true, false}; }
  std::string identity() const override;
  SegmentResponse segment(const SegmentRequest& request) override;

 private:
  int tolerance_;
};

// Splits the clip into runs of moving and still frames by mean absolute
// frame difference.
class MotionTemporal final : public TemporalBackend {
 public:
  explicit MotionTemporal(double threshold = 1.0) : threshold_(threshold) {}
  std::string identity() const override;
  std::vector<RawEvent> analyze(const VideoClip& clip) override;

 private:
  double threshold_;
};

// Answers the chain-of-thought prompt with a filled-in structured caption
// built from the prompt's event lines and simple frame statistics; answers
// chat prompts by echoing the question.
class TemplateCaptioner final : public CaptionerBackend {
 public:
  std::string identity() const override { return "mock-template-captioner/1"; }
  std::string generate(const CaptionRequest& request) override;
};

Backends mock_backends();

}  // namespace catv::gateway
