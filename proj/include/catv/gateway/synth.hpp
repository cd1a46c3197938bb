#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "catv/media.hpp"
#include "catv/segmenter.hpp"

namespace catv::gateway {

// Integer-only scene description for synthetic clips with exact masks.
struct SceneObject {
  enum class Shape { kRectangle, kDisk };
  Shape shape = Shape::kRectangle;
  int x = 0;  // rectangle: top-left; disk: centre
  int y = 0;
  int width = 10;  // rectangle only
  int height = 10;
  int radius = 5;  // disk only
  int vx = 0;      // pixels per frame
  int vy = 0;
  Rgb color{255, 0, 0};
};

struct ScriptedScene {
  int height = 64;
  int width = 64;
  Rgb background{0, 0, 0};
  double fps = 5.0;
  int frames = 5;
  std::vector<SceneObject> objects;  // painted in order; later objects occlude earlier ones
};

void to_json(nlohmann::json& j, const ScriptedScene& s);
void from_json(const nlohmann::json& j, ScriptedScene& s);

struct SynthResult {
  VideoClip clip;
  std::vector<Masklet> ground_truth;  // one per object, visible pixels only
};

SynthResult synth_clip(const ScriptedScene& scene);

// Video file, or a .json holding a scene ({"scene": ...} or bare) or a
// serialized clip ({"fps", "frames"}).
VideoClip load_clip(const std::filesystem::path& path, std::optional<double> target_fps = {});

}  // namespace catv::gateway
