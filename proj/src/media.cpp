#include "catv/media.hpp"

#include <cmath>

#include <fmt/format.h>

#include "catv/error.hpp"

namespace catv {

namespace {

constexpr double kTimestampTolerance = 1e-9;

}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kPrecondition: return "precondition";
    case ErrorCode::kRange: return "range";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kDecode: return "decode";
    case ErrorCode::kEmptyVideo: return "empty_video";
    case ErrorCode::kMalformedRle: return "malformed_rle";
    case ErrorCode::kEmptyMask: return "empty_mask";
    case ErrorCode::kDegenerateInterior: return "degenerate_interior";
    case ErrorCode::kInvalidPrompt: return "invalid_prompt";
    case ErrorCode::kInvalidMeasurement: return "invalid_measurement";
    case ErrorCode::kEmptyTrack: return "empty_track";
    case ErrorCode::kSegmentationFailed: return "segmentation_failed";
    case ErrorCode::kTemporalBackend: return "temporal_backend";
    case ErrorCode::kCaptionerBackend: return "captioner_backend";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kScriptedExhausted: return "scripted_exhausted";
    case ErrorCode::kReplayMiss: return "replay_miss";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

Frame::Frame(int index, int height, int width, std::vector<std::uint8_t> pixels, double timestamp)
    : index_(index), height_(height), width_(width), pixels_(std::move(pixels)), timestamp_(timestamp) {
  if (index < 0) throw Error(ErrorCode::kInvalidArgument, "frame index must be non-negative");
  if (height < 1 || width < 1) throw Error(ErrorCode::kInvalidArgument, "frame dimensions must be positive");
  if (pixels_.size() != static_cast<std::size_t>(height) * width * 3) {
    throw Error(ErrorCode::kShape, fmt::format("frame pixel buffer has {} bytes, expected {}x{}x3",
                                               pixels_.size(), height, width));
  }
  if (!(timestamp >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "frame timestamp must be non-negative");
}

Frame::Frame(int index, int height, int width, Rgb fill, double timestamp)
    : Frame(index, height, width,
            [&] {
              std::vector<std::uint8_t> px(static_cast<std::size_t>(std::max(height, 0)) *
                                           std::max(width, 0) * 3);
              for (std::size_t i = 0; i < px.size(); i += 3) {
                px[i] = fill.r;
                px[i + 1] = fill.g;
                px[i + 2] = fill.b;
              }
              return px;
            }(),
            timestamp) {}

Frame Frame::reindexed(int index, double fps) const {
  return Frame(index, height_, width_, pixels_, index / fps);
}

Frame Frame::with_pixels(std::vector<std::uint8_t> pixels) const {
  return Frame(index_, height_, width_, std::move(pixels), timestamp_);
}

VideoClip::VideoClip(std::vector<Frame> frames, double fps) : frames_(std::move(frames)), fps_(fps) {
  if (!(fps > 0.0)) throw Error(ErrorCode::kInvalidArgument, "fps must be positive");
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    const auto& f = frames_[i];
    if (f.index() != static_cast<int>(i)) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("frame {} carries index {}", i, f.index()));
    }
    if (f.height() != frames_.front().height() || f.width() != frames_.front().width()) {
      throw Error(ErrorCode::kShape, fmt::format("frame {} dimensions differ from frame 0", i));
    }
    if (std::abs(f.timestamp() - f.index() / fps) > kTimestampTolerance) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("frame {} timestamp inconsistent with fps", i));
    }
  }
}

VideoClip VideoClip::from_frames(std::vector<Frame> frames, double fps) {
  if (!(fps > 0.0)) throw Error(ErrorCode::kInvalidArgument, "fps must be positive");
  for (std::size_t i = 0; i < frames.size(); ++i) frames[i] = frames[i].reindexed(static_cast<int>(i), fps);
  return VideoClip(std::move(frames), fps);
}

const Frame& VideoClip::frame(int index) const {
  if (index < 0 || index >= frame_count()) {
    throw Error(ErrorCode::kRange, fmt::format("frame {} outside clip of {} frames", index, frame_count()));
  }
  return frames_[static_cast<std::size_t>(index)];
}

VideoClip resample(const VideoClip& clip, double target_fps) {
  if (!(target_fps > 0.0)) throw Error(ErrorCode::kInvalidArgument, "target fps must be positive");
  if (target_fps > clip.fps() + 1e-12) {
    throw Error(ErrorCode::kPrecondition,
                fmt::format("target fps {} exceeds native fps {}", target_fps, clip.fps()));
  }
  if (clip.empty()) throw Error(ErrorCode::kEmptyVideo, "clip has no frames");
  const double stride = clip.fps() / target_fps;
  const int n = clip.frame_count();
  const int out_count = std::max(1, static_cast<int>(std::floor(n / stride + 1e-9)));
  std::vector<Frame> out;
  out.reserve(static_cast<std::size_t>(out_count));
  for (int k = 0; k < out_count; ++k) {
    const int src = std::min(n - 1, static_cast<int>(std::floor(k * stride + 0.5)));
    out.push_back(clip.frames()[static_cast<std::size_t>(src)].reindexed(k, target_fps));
  }
  return VideoClip(std::move(out), target_fps);
}

Frame hconcat(std::span<const Frame> panels, int gap, Rgb gap_color) {
  if (panels.empty()) throw Error(ErrorCode::kInvalidArgument, "no panels to concatenate");
  const int h = panels.front().height();
  int w = 0;
  for (const auto& p : panels) {
    if (p.height() != h) throw Error(ErrorCode::kShape, "panels differ in height");
    w += p.width();
  }
  w += gap * static_cast<int>(panels.size() - 1);
  Frame canvas(0, h, w, gap_color, 0.0);
  std::vector<std::uint8_t> px(canvas.pixels().begin(), canvas.pixels().end());
  int x0 = 0;
  for (const auto& p : panels) {
    for (int y = 0; y < h; ++y) {
      const auto src = p.pixels().subspan(static_cast<std::size_t>(y) * p.width() * 3,
                                          static_cast<std::size_t>(p.width()) * 3);
      std::copy(src.begin(), src.end(), px.begin() + (static_cast<std::ptrdiff_t>(y) * w + x0) * 3);
    }
    x0 += p.width() + gap;
  }
  return canvas.with_pixels(std::move(px));
}

}  // namespace catv
