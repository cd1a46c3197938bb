// OpenCV-backed decode/encode. Kept out of the public headers.
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include "catv/error.hpp"
#include "catv/media.hpp"

namespace catv {

namespace {

std::vector<std::uint8_t> bgr_to_rgb_bytes(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  if (!rgb.isContinuous()) rgb = rgb.clone();
  return {rgb.data, rgb.data + rgb.total() * rgb.elemSize()};
}

cv::Mat frame_to_bgr(const Frame& frame) {
  cv::Mat rgb(frame.height(), frame.width(), CV_8UC3, const_cast<std::uint8_t*>(frame.pixels().data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

}  // namespace

VideoClip load_video(const std::filesystem::path& source, std::optional<double> target_fps) {
  if (!std::filesystem::is_regular_file(source)) {
    throw Error(ErrorCode::kDecode, fmt::format("cannot open video '{}'", source.string()));
  }
  cv::VideoCapture cap;
  try {
    cap.open(source.string(), cv::CAP_FFMPEG);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::kDecode, fmt::format("cannot decode '{}': {}", source.string(), e.what()));
  }
  if (!cap.isOpened()) {
    throw Error(ErrorCode::kDecode, fmt::format("cannot decode '{}'", source.string()));
  }
  double fps = cap.get(cv::CAP_PROP_FPS);
  if (!(fps > 0.0) || !std::isfinite(fps)) fps = 30.0;

  std::vector<Frame> frames;
  cv::Mat bgr;
  while (cap.read(bgr)) {
    if (bgr.empty()) break;
    if (bgr.channels() == 1) cv::cvtColor(bgr, bgr, cv::COLOR_GRAY2BGR);
    const int index = static_cast<int>(frames.size());
    frames.emplace_back(index, bgr.rows, bgr.cols, bgr_to_rgb_bytes(bgr), index / fps);
  }
  if (frames.empty()) {
    throw Error(ErrorCode::kEmptyVideo, fmt::format("'{}' contains no frames", source.string()));
  }
  VideoClip clip(std::move(frames), fps);
  if (target_fps) return resample(clip, *target_fps);
  return clip;
}

std::vector<std::uint8_t> encode_png(const Frame& frame) {
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", frame_to_bgr(frame), out)) throw Error(ErrorCode::kIo, "PNG encode failed");
  return out;
}

Frame decode_png(std::span<const std::uint8_t> png, int index, double timestamp) {
  const cv::Mat buf(1, static_cast<int>(png.size()), CV_8UC1, const_cast<std::uint8_t*>(png.data()));
  cv::Mat bgr;
  try {
    bgr = cv::imdecode(buf, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::kDecode, fmt::format("PNG decode failed: {}", e.what()));
  }
  if (bgr.empty()) throw Error(ErrorCode::kDecode, "PNG decode failed");
  return Frame(index, bgr.rows, bgr.cols, bgr_to_rgb_bytes(bgr), timestamp);
}

void write_png(const std::filesystem::path& path, const Frame& frame) {
  const auto bytes = encode_png(frame);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write '{}'", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Frame read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot read '{}'", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_png(bytes);
}

void write_video(const std::filesystem::path& path, const VideoClip& clip) {
  if (clip.empty()) throw Error(ErrorCode::kEmptyVideo, "cannot write an empty clip");
  cv::VideoWriter writer(path.string(), cv::VideoWriter::fourcc('M', 'J', 'P', 'G'), clip.fps(),
                         cv::Size(clip.width(), clip.height()));
  if (!writer.isOpened()) throw Error(ErrorCode::kIo, fmt::format("cannot open '{}' for writing", path.string()));
  for (const auto& f : clip.frames()) writer << frame_to_bgr(f);
}

}  // namespace catv
