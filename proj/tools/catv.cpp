#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include <fmt/format.h>

#include "catv/error.hpp"
#include "catv/gateway/http_backends.hpp"
#include "catv/gateway/mock_backends.hpp"
#include "catv/gateway/server.hpp"
#include "catv/gateway/synth.hpp"
#include "catv/gateway/trace.hpp"
#include "catv/gateway/wire.hpp"
#include "catv/injection.hpp"

using namespace catv;
using namespace catv::gateway;

namespace {

struct PromptArgs {
  std::vector<std::string> points;
  std::vector<std::string> negative_points;
  std::string box;
  std::string region;
  bool normalized = false;
  int anchor = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--point", points, "Positive click x,y (repeatable)");
    cmd->add_option("--neg-point", negative_points, "Negative click x,y (repeatable)");
    cmd->add_option("--box", box, "Box x0,y0,x1,y1");
    cmd->add_option("--region", region, "Region: RLE mask JSON or gesture JSON");
    cmd->add_flag("--normalized", normalized, "Coordinates are in [0,1]");
    cmd->add_option("--anchor", anchor, "Anchor frame")->default_val(0);
  }
};

std::vector<double> numbers(const std::string& text, std::size_t expected, const char* what) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto part = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("bad {} '{}'", what, text));
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.size() != expected) throw Error(ErrorCode::kInvalidArgument, fmt::format("bad {} '{}'", what, text));
  return out;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot read {}", path));
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("{}: {}", path, e.what()));
  }
}

GestureRecord gesture_from_args(const PromptArgs& a) {
  const int given = (!a.points.empty() || !a.negative_points.empty()) + !a.box.empty() + !a.region.empty();
  if (given != 1) throw Error(ErrorCode::kInvalidArgument, "give exactly one of --point, --box, --region");
  GestureRecord g;
  g.normalized = a.normalized;
  g.anchor_frame = a.anchor;
  if (!a.region.empty()) {
    const auto j = read_json(a.region);
    if (j.contains("kind")) return gesture_from_json(j);
    g.kind = GestureRecord::Kind::kMask;
    g.normalized = false;
    g.mask = j.get<RleMask>();
  } else if (!a.box.empty()) {
    const auto v = numbers(a.box, 4, "box");
    g.kind = GestureRecord::Kind::kBox;
    g.box = std::array<double, 4>{v[0], v[1], v[2], v[3]};
  } else {
    g.kind = GestureRecord::Kind::kPointSet;
    for (const auto& p : a.points) {
      const auto v = numbers(p, 2, "point");
      g.points.push_back({v[0], v[1], true});
    }
    for (const auto& p : a.negative_points) {
      const auto v = numbers(p, 2, "point");
      g.points.push_back({v[0], v[1], false});
    }
  }
  return g;
}

struct BackendArgs {
  std::string segmenter, temporal, captioner;
  bool stateless_segmenter = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--segmenter", segmenter, "Segmenter endpoint URL (default: built-in mock)");
    cmd->add_option("--temporal", temporal, "Temporal endpoint URL (default: built-in mock)");
    cmd->add_option("--captioner", captioner, "Captioner endpoint URL (default: built-in mock)");
    cmd->add_flag("--stateless-segmenter", stateless_segmenter, "Remote segmenter re-prompts every frame");
  }

  Backends build() const {
    auto b = mock_backends();
    if (!segmenter.empty()) {
      SegmenterCapabilities caps;
      caps.stateless = stateless_segmenter;
      b.segmenter = std::make_shared<HttpSegmenter>(segmenter, caps);
    }
    if (!temporal.empty()) b.temporal = std::make_shared<HttpTemporal>(temporal);
    if (!captioner.empty()) b.captioner = std::make_shared<HttpCaptioner>(captioner);
    return b;
  }
};

PipelineConfig config_from(const std::string& path, const std::string& style, bool no_stabilize) {
  PipelineConfig c;
  if (!path.empty()) c = read_json(path).get<PipelineConfig>();
  if (!style.empty()) c.injection_style.kind = style_kind_from_string(style);
  if (no_stabilize) c.stabilize = false;
  c.validate();
  return c;
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object-centric video captioning pipeline"};
  app.require_subcommand(1);

  double fps = 0.0;
  app.add_option("--fps", fps, "Resample input video to this frame rate");
  auto target_fps = [&]() -> std::optional<double> { return fps > 0.0 ? std::optional(fps) : std::nullopt; };

  // caption
  auto* caption = app.add_subcommand("caption", "Caption the prompted object");
  std::string video, style, trace_out, config_path;
  bool no_stabilize = false, timings = false;
  PromptArgs prompt_args;
  BackendArgs backend_args;
  caption->add_option("video", video, "Video file or clip/scene JSON")->required();
  prompt_args.add_to(caption);
  backend_args.add_to(caption);
  caption->add_option("--style", style, "Injection style");
  caption->add_option("--config", config_path, "Pipeline config JSON");
  caption->add_option("--trace", trace_out, "Record backend exchanges to this JSONL file");
  caption->add_flag("--no-stabilize", no_stabilize, "Skip motion smoothing of the masklet");
  caption->add_flag("--timings", timings, "Include stage wall times");

  // render-styles
  auto* render = app.add_subcommand("render-styles", "Side-by-side sheet of every injection style");
  int frame_index = 0;
  std::string mask_path, out_path = "styles.png";
  render->add_option("video", video)->required();
  render->add_option("frame", frame_index)->required();
  render->add_option("--mask", mask_path, "RLE mask JSON for the frame")->required();
  render->add_option("--out", out_path, "Output PNG")->default_val("styles.png");

  // events
  auto* events = app.add_subcommand("events", "Timed event captions of a video");
  events->add_option("video", video)->required();
  events->add_option("--temporal", backend_args.temporal, "Temporal endpoint URL");

  // chat
  auto* chat = app.add_subcommand("chat", "Caption the object, then answer questions about it (REPL)");
  chat->add_option("video", video)->required();
  prompt_args.add_to(chat);
  backend_args.add_to(chat);
  chat->add_option("--style", style, "Injection style");

  // replay
  auto* replay = app.add_subcommand("replay", "Re-run a recorded trace without live backends");
  std::string trace_in;
  bool lenient = false;
  replay->add_option("trace", trace_in)->required();
  replay->add_flag("--lenient", lenient, "Serve the nearest recorded exchange on a digest miss");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP gateway");
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--host", host)->default_val("127.0.0.1");
  serve->add_option("--port", port)->default_val(8080);
  backend_args.add_to(serve);

  // synth
  auto* synth = app.add_subcommand("synth", "Render a scripted scene to clip JSON plus ground-truth masks");
  std::string scene_path;
  synth->add_option("scene", scene_path)->required();
  synth->add_option("--out", out_path, "Output clip JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*caption) {
      const auto clip = load_clip(video, target_fps());
      const auto gesture = gesture_from_args(prompt_args);
      const auto config = config_from(config_path, style, no_stabilize);
      const auto live = with_endpoints(backend_args.build(), config.endpoints);
      if (!trace_out.empty()) {
        const auto run = record_run(clip, gesture, config.stabilize, config, live);
        run.trace.save(trace_out);
        print_json(to_json(run.result, timings));
      } else {
        SessionManager manager(live);
        auto session = manager.create_session(manager.add_clip(clip));
        session->select_object(gesture, config.stabilize);
        print_json(to_json(session->run_pipeline(config), timings));
      }
    } else if (*render) {
      const auto clip = load_clip(video, target_fps());
      const auto mask = rle_decode(read_json(mask_path).get<RleMask>());
      write_png(out_path, render_style_sheet(clip.frame(frame_index), mask));
      std::cerr << "wrote " << out_path << "\n";
    } else if (*events) {
      const auto clip = load_clip(video, target_fps());
      std::shared_ptr<TemporalBackend> backend = std::make_shared<MotionTemporal>();
      if (!backend_args.temporal.empty()) backend = std::make_shared<HttpTemporal>(backend_args.temporal);
      const auto r = analyze_timeline(clip, *backend, TemporalOptions{true});
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      for (const auto& e : r.timeline.events) std::cout << format_event_line(e) << "\n";
    } else if (*chat) {
      const auto clip = load_clip(video, target_fps());
      auto config = config_from("", style, false);
      SessionManager manager(backend_args.build());
      auto session = manager.create_session(manager.add_clip(clip));
      session->select_object(gesture_from_args(prompt_args), config.stabilize);
      const auto result = session->run_pipeline(config);
      std::cout << render_structured_caption(result.structured) << "\n";
      std::string line;
      while (std::cout << "> " << std::flush, std::getline(std::cin, line)) {
        if (line == "/quit" || line == "/exit") break;
        if (line.empty()) continue;
        try {
          std::cout << session->chat_turn(line) << "\n";
        } catch (const Error& e) {
          std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
        }
      }
    } else if (*replay) {
      const auto trace = TraceFile::load(trace_in);
      const auto report = replay_run(trace, lenient ? ReplayMode::kLenient : ReplayMode::kStrict);
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << report.replayed << "\n";
      std::cerr << (report.identical ? "replay matches the recorded result\n" : "replay DIFFERS from the recorded result\n");
      return report.identical ? 0 : 1;
    } else if (*serve) {
      GatewayServer server(backend_args.build());
      std::cerr << fmt::format("listening on http://{}:{}\n", host, port);
      server.run(host, port);
    } else if (*synth) {
      const auto j = read_json(scene_path);
      const auto scene = (j.contains("scene") ? j.at("scene") : j).get<ScriptedScene>();
      const auto result = synth_clip(scene);
      std::ofstream(out_path) << clip_json(result.clip).dump() << "\n";
      auto truth = nlohmann::json::array();
      for (const auto& m : result.ground_truth) truth.push_back(m);
      print_json(truth);
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << (e.stage().empty() ? "" : "@" + e.stage()) << "]: " << e.what()
              << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
