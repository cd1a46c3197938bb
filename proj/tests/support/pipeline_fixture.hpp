#pragma once

#include <memory>
#include <string>
#include <vector>

#include "catv/captioner.hpp"
#include "catv/gateway/scripted.hpp"
#include "catv/gateway/synth.hpp"
#include "catv/orchestrator.hpp"

// Two moving objects, scripted backends that replay the ground truth.
namespace catv::testing_support {

inline gateway::ScriptedScene two_object_scene() {
  gateway::ScriptedScene s;
  s.height = 48;
  s.width = 64;
  s.background = {20, 30, 40};
  s.fps = 5.0;
  s.frames = 12;
  gateway::SceneObject block;
  block.x = 6, block.y = 10, block.width = 14, block.height = 12, block.vx = 3, block.vy = 1;
  block.color = {220, 40, 40};
  gateway::SceneObject disk;
  disk.shape = gateway::SceneObject::Shape::kDisk;
  disk.x = 52, disk.y = 32, disk.radius = 6, disk.vx = -2;
  disk.color = {40, 200, 60};
  s.objects = {block, disk};
  return s;
}

inline const std::vector<RawEvent>& fixture_events() {
  static const std::vector<RawEvent> events{{0.0, 1.4, "a red block slides to the right"},
                                            {1.0, 2.4, "a green disk rolls left past the block"}};
  return events;
}

inline const StructuredCaption& fixture_caption() {
  static const StructuredCaption c{"a red block",
                                   "rectangular, bright red, flat",
                                   "slides to the right and slightly down",
                                   "moving steadily",
                                   "a green disk passes beneath it",
                                   "a dark blue-grey background",
                                   "From 1.0s to 2.4s, the HO is passed by a green disk.",
                                   "The HO is a bright red block on a dark background. From 0.0s to 1.4s, the HO slides "
                                   "to the right. From 1.0s to 2.4s, the HO keeps moving while a green disk passes.",
                                   ""};
  return c;
}

// Point on the block's centre in frame 0.
inline GestureRecord fixture_gesture() {
  GestureRecord g;
  g.kind = GestureRecord::Kind::kPointSet;
  g.normalized = false;
  g.points = {{13.0, 16.0, true}};
  g.anchor_frame = 0;
  return g;
}

inline Backends fixture_backends(const gateway::SynthResult& synth) {
  Backends b;
  b.segmenter = gateway::ScriptedSegmenter::from_masklet(synth.ground_truth.at(0));
  b.temporal = std::make_shared<gateway::ScriptedTemporal>(fixture_events());
  const std::string reply = render_structured_caption(fixture_caption());
  b.captioner = gateway::ScriptedCaptioner::from_function([reply](const CaptionRequest&) { return reply; });
  return b;
}

}  // namespace catv::testing_support
