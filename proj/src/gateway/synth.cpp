#include "catv/gateway/synth.hpp"

#include <fstream>

#include <fmt/format.h>

#include "catv/error.hpp"
#include "catv/gateway/wire.hpp"

namespace catv::gateway {

namespace {

nlohmann::json rgb_json(Rgb c) { return nlohmann::json::array({c.r, c.g, c.b}); }
Rgb rgb_from(const nlohmann::json& j) {
  return {j.at(0).get<std::uint8_t>(), j.at(1).get<std::uint8_t>(), j.at(2).get<std::uint8_t>()};
}

bool covers(const SceneObject& o, int t, int y, int x) {
  const int ox = o.x + o.vx * t, oy = o.y + o.vy * t;
  if (o.shape == SceneObject::Shape::kRectangle) {
    return ox <= x && x < ox + o.width && oy <= y && y < oy + o.height;
  }
  const long dx = x - ox, dy = y - oy;
  return dx * dx + dy * dy <= static_cast<long>(o.radius) * o.radius;
}

}  // namespace

void to_json(nlohmann::json& j, const ScriptedScene& s) {
  auto objects = nlohmann::json::array();
  for (const auto& o : s.objects) {
    nlohmann::json jo{{"shape", o.shape == SceneObject::Shape::kDisk ? "disk" : "rectangle"},
                      {"x", o.x},
                      {"y", o.y},
                      {"vx", o.vx},
                      {"vy", o.vy},
                      {"color", rgb_json(o.color)}};
    if (o.shape == SceneObject::Shape::kDisk) {
      jo["radius"] = o.radius;
    } else {
      jo["width"] = o.width;
      jo["height"] = o.height;
    }
    objects.push_back(std::move(jo));
  }
  j = nlohmann::json{{"height", s.height}, {"width", s.width}, {"background", rgb_json(s.background)},
                     {"fps", s.fps},       {"frames", s.frames}, {"objects", std::move(objects)}};
}

void from_json(const nlohmann::json& j, ScriptedScene& s) {
  s = ScriptedScene{};
  s.height = j.value("height", s.height);
  s.width = j.value("width", s.width);
  if (j.contains("background")) s.background = rgb_from(j["background"]);
  s.fps = j.value("fps", s.fps);
  s.frames = j.value("frames", s.frames);
  for (const auto& jo : j.value("objects", nlohmann::json::array())) {
    SceneObject o;
    const auto shape = jo.value("shape", std::string("rectangle"));
    if (shape == "disk") {
      o.shape = SceneObject::Shape::kDisk;
    } else if (shape != "rectangle") {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown scene shape '{}'", shape));
    }
    o.x = jo.value("x", 0);
    o.y = jo.value("y", 0);
    o.width = jo.value("width", o.width);
    o.height = jo.value("height", o.height);
    o.radius = jo.value("radius", o.radius);
    o.vx = jo.value("vx", 0);
    o.vy = jo.value("vy", 0);
    if (jo.contains("color")) o.color = rgb_from(jo["color"]);
    s.objects.push_back(o);
  }
}

SynthResult synth_clip(const ScriptedScene& scene) {
  if (scene.height < 1 || scene.width < 1 || scene.frames < 1 || !(scene.fps > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "scene needs positive dimensions, frame count and fps");
  }
  SynthResult out;
  out.ground_truth.resize(scene.objects.size());
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    out.ground_truth[k].object_id = fmt::format("object-{}", k);
    out.ground_truth[k].anchor_frame = 0;
  }
  std::vector<Frame> frames;
  std::vector<int> owner(static_cast<std::size_t>(scene.height) * scene.width);
  for (int t = 0; t < scene.frames; ++t) {
    std::fill(owner.begin(), owner.end(), -1);
    std::vector<std::uint8_t> px(owner.size() * 3);
    for (int y = 0; y < scene.height; ++y) {
      for (int x = 0; x < scene.width; ++x) {
        const auto i = static_cast<std::size_t>(y) * scene.width + x;
        Rgb c = scene.background;
        for (std::size_t k = 0; k < scene.objects.size(); ++k) {
          if (covers(scene.objects[k], t, y, x)) {
            owner[i] = static_cast<int>(k);
            c = scene.objects[k].color;
          }
        }
        px[i * 3] = c.r;
        px[i * 3 + 1] = c.g;
        px[i * 3 + 2] = c.b;
      }
    }
    for (std::size_t k = 0; k < scene.objects.size(); ++k) {
      BinaryMask m(scene.height, scene.width);
      for (std::size_t i = 0; i < owner.size(); ++i) {
        if (owner[i] == static_cast<int>(k)) m.set(static_cast<int>(i) / scene.width, static_cast<int>(i) % scene.width);
      }
      out.ground_truth[k].masks.push_back(std::move(m));
    }
    frames.emplace_back(t, scene.height, scene.width, std::move(px), t / scene.fps);
  }
  out.clip = VideoClip(std::move(frames), scene.fps);
  return out;
}

VideoClip load_clip(const std::filesystem::path& path, std::optional<double> target_fps) {
  if (path.extension() != ".json") return load_video(path, target_fps);
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kDecode, fmt::format("cannot open {}", path.string()), "ingest");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kDecode, fmt::format("{}: {}", path.string(), e.what()), "ingest");
  }
  VideoClip clip = j.contains("scene")     ? synth_clip(j.at("scene").get<ScriptedScene>()).clip
                   : j.contains("objects") ? synth_clip(j.get<ScriptedScene>()).clip
                                           : clip_from_json(j);
  return target_fps ? resample(clip, *target_fps) : clip;
}

}  // namespace catv::gateway
