#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace catv {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// One decoded RGB frame. Pixels are row-major, 3 bytes per pixel.
class Frame {
 public:
  Frame() = default;
  Frame(int index, int height, int width, std::vector<std::uint8_t> pixels, double timestamp);
  // Uniform frame filled with `fill`.
  Frame(int index, int height, int width, Rgb fill, double timestamp);

  int index() const noexcept { return index_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  double timestamp() const noexcept { return timestamp_; }
  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }

  Rgb at(int y, int x) const {
    const auto* p = &pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3];
    return {p[0], p[1], p[2]};
  }

  // Copy of this frame re-stamped as `index` of a clip running at `fps`.
  Frame reindexed(int index, double fps) const;
  // Copy of this frame with different pixel data (same geometry and time).
  Frame with_pixels(std::vector<std::uint8_t> pixels) const;

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  int index_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> pixels_;
  double timestamp_ = 0.0;
};

class VideoClip {
 public:
  VideoClip() = default;
  // Validates ordering, gap-free indices, shared dimensions and timestamps.
  VideoClip(std::vector<Frame> frames, double fps);

  // Builds a clip from frames in order, stamping index and timestamp.
  static VideoClip from_frames(std::vector<Frame> frames, double fps);

  const std::vector<Frame>& frames() const noexcept { return frames_; }
  const Frame& frame(int index) const;
  int frame_count() const noexcept { return static_cast<int>(frames_.size()); }
  double fps() const noexcept { return fps_; }
  double duration() const noexcept { return fps_ > 0 ? frame_count() / fps_ : 0.0; }
  int height() const noexcept { return frames_.empty() ? 0 : frames_.front().height(); }
  int width() const noexcept { return frames_.empty() ? 0 : frames_.front().width(); }
  bool empty() const noexcept { return frames_.empty(); }

  friend bool operator==(const VideoClip&, const VideoClip&) = default;

 private:
  std::vector<Frame> frames_;
  double fps_ = 0.0;
};

// Nearest-index stride resampling. target_fps must not exceed clip.fps().
VideoClip resample(const VideoClip& clip, double target_fps);

// Decodes a video container (anything the host OpenCV build reads).
VideoClip load_video(const std::filesystem::path& source, std::optional<double> target_fps = {});

// Lossless PNG round trip for frames.
std::vector<std::uint8_t> encode_png(const Frame& frame);
Frame decode_png(std::span<const std::uint8_t> png, int index = 0, double timestamp = 0.0);
void write_png(const std::filesystem::path& path, const Frame& frame);
Frame read_png(const std::filesystem::path& path);

// Writes an MJPG AVI. Lossy; meant for demos and upload tests.
void write_video(const std::filesystem::path& path, const VideoClip& clip);

// Horizontal concatenation of equally tall frames.
Frame hconcat(std::span<const Frame> panels, int gap = 0, Rgb gap_color = {255, 255, 255});

}  // namespace catv
