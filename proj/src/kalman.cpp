#include "catv/kalman.hpp"

#include <algorithm>
#include <cmath>

#include "catv/error.hpp"

namespace catv {

TrackBox TrackBox::from_box(const Box& box) {
  return {(box.x_min + box.x_max + 1) / 2.0, (box.y_min + box.y_max + 1) / 2.0, static_cast<double>(box.width()),
          static_cast<double>(box.height())};
}

std::optional<Box> TrackBox::to_box(int frame_height, int frame_width) const {
  const int x0 = std::max(0, static_cast<int>(std::lround(cx - w / 2.0)));
  const int y0 = std::max(0, static_cast<int>(std::lround(cy - h / 2.0)));
  const int x1 = std::min(frame_width - 1, static_cast<int>(std::lround(cx + w / 2.0)) - 1);
  const int y1 = std::min(frame_height - 1, static_cast<int>(std::lround(cy + h / 2.0)) - 1);
  if (x1 < x0 || y1 < y0) return std::nullopt;
  return Box{x0, y0, x1, y1};
}

double box_iou(const TrackBox& a, const TrackBox& b) {
  const double ix = std::max(0.0, std::min(a.cx + a.w / 2, b.cx + b.w / 2) - std::max(a.cx - a.w / 2, b.cx - b.w / 2));
  const double iy = std::max(0.0, std::min(a.cy + a.h / 2, b.cy + b.h / 2) - std::max(a.cy - a.h / 2, b.cy - b.h / 2));
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0 ? inter / uni : 0.0;
}

namespace {

KfMatrix transition() {
  KfMatrix f = KfMatrix::Identity();
  f.topRightCorner<4, 4>() = Eigen::Matrix4d::Identity();
  return f;
}

Eigen::Matrix<double, 4, 8> observation() {
  Eigen::Matrix<double, 4, 8> h = Eigen::Matrix<double, 4, 8>::Zero();
  h.leftCols<4>() = Eigen::Matrix4d::Identity();
  return h;
}

KfMatrix process_noise(const KalmanParams& p) {
  KfVector q;
  q << p.process_noise_position, p.process_noise_position, p.process_noise_size, p.process_noise_size,
      p.process_noise_position, p.process_noise_position, p.process_noise_size, p.process_noise_size;
  return q.asDiagonal();
}

void validate(const TrackBox& m) {
  if (!(m.w > 0.0) || !(m.h > 0.0)) {
    throw Error(ErrorCode::kInvalidMeasurement, "measured box must have positive width and height");
  }
}

KfMatrix symmetrized(const KfMatrix& p) { return 0.5 * (p + p.transpose()); }

}  // namespace

KfState kalman_init(const TrackBox& measurement, const KalmanParams& params) {
  validate(measurement);
  KfState s;
  s.mean << measurement.cx, measurement.cy, measurement.w, measurement.h, 0, 0, 0, 0;
  KfVector var;
  var << KfVector::Constant(params.initial_position_variance).head<4>(),
      KfVector::Constant(params.initial_velocity_variance).head<4>();
  s.covariance = var.asDiagonal();
  return s;
}

KfState kalman_predict(const KfState& state, const KalmanParams& params) {
  static const KfMatrix f = transition();
  KfState out;
  out.mean = f * state.mean;
  out.covariance = symmetrized(f * state.covariance * f.transpose() + process_noise(params));
  return out;
}

KfState kalman_update(const KfState& predicted, const TrackBox& measurement, const KalmanParams& params) {
  validate(measurement);
  static const auto h = observation();
  const Eigen::Vector4d z(measurement.cx, measurement.cy, measurement.w, measurement.h);
  const Eigen::Matrix4d r = Eigen::Matrix4d::Identity() * params.measurement_noise;
  const Eigen::Matrix4d s = h * predicted.covariance * h.transpose() + r;
  // Pseudo-inverse keeps the zero-noise limit well defined.
  const Eigen::Matrix4d s_inv = s.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::Matrix<double, 8, 4> k = predicted.covariance * h.transpose() * s_inv;
  KfState out;
  out.mean = predicted.mean + k * (z - h * predicted.mean);
  // Joseph form.
  const KfMatrix i_kh = KfMatrix::Identity() - k * h;
  out.covariance = symmetrized(i_kh * predicted.covariance * i_kh.transpose() + k * r * k.transpose());
  return out;
}

KfState kalman_step(const KfState& state, const std::optional<TrackBox>& measurement, const KalmanParams& params) {
  if (measurement) validate(*measurement);
  auto predicted = kalman_predict(state, params);
  if (!measurement) return predicted;
  return kalman_update(predicted, *measurement, params);
}

StabilizedTrack stabilize_track(std::span<const std::optional<TrackBox>> boxes, const KalmanParams& params,
                                double gate_iou) {
  StabilizedTrack out;
  out.boxes.resize(boxes.size());
  out.outlier.assign(boxes.size(), false);
  std::optional<KfState> state;
  int misses = 0;
  for (std::size_t t = 0; t < boxes.size(); ++t) {
    const auto& z = boxes[t];
    if (!state) {
      if (!z) continue;
      state = kalman_init(*z, params);
      out.boxes[t] = state->box();
      continue;
    }
    auto predicted = kalman_predict(*state, params);
    if (!z) {
      state = predicted;
    } else if (box_iou(predicted.box(), *z) >= gate_iou) {
      misses = 0;
      state = kalman_update(predicted, *z, params);
    } else if (params.reacquire_after > 0 && ++misses >= params.reacquire_after) {
      misses = 0;
      state = kalman_init(*z, params);
    } else {
      out.outlier[t] = true;
      state = predicted;
    }
    out.boxes[t] = state->box();
  }
  if (!state) throw Error(ErrorCode::kEmptyTrack, "track has no present boxes");
  return out;
}

StabilizedTrack stabilize_track(std::span<const std::optional<Box>> boxes, const KalmanParams& params,
                                double gate_iou) {
  std::vector<std::optional<TrackBox>> converted;
  converted.reserve(boxes.size());
  for (const auto& b : boxes) converted.push_back(b ? std::optional(TrackBox::from_box(*b)) : std::nullopt);
  return stabilize_track(std::span<const std::optional<TrackBox>>(converted), params, gate_iou);
}

}  // namespace catv
