#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "catv/mask.hpp"

namespace catv {

// Continuous box in pixel-edge coordinates: an inclusive pixel Box(0,0,9,9)
// is centre (5,5), size 10x10.
struct TrackBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  static TrackBox from_box(const Box& box);
  // Rounds to an inclusive pixel box clipped to the frame; absent when the
  // clipped box is empty.
  std::optional<Box> to_box(int frame_height, int frame_width) const;

  friend bool operator==(const TrackBox&, const TrackBox&) = default;
};

double box_iou(const TrackBox& a, const TrackBox& b);

using KfVector = Eigen::Matrix<double, 8, 1>;
using KfMatrix = Eigen::Matrix<double, 8, 8>;

// Constant-velocity state (cx, cy, w, h, vcx, vcy, vw, vh), dt = 1 frame.
struct KfState {
  KfVector mean = KfVector::Zero();
  KfMatrix covariance = KfMatrix::Identity();

  TrackBox box() const { return {mean(0), mean(1), mean(2), mean(3)}; }
};

struct KalmanParams {
  double process_noise_position = 1e-2;
  double process_noise_size = 1e-4;
  double measurement_noise = 1e-1;
  // Covariance given to a freshly initialised track.
  double initial_position_variance = 10.0;
  double initial_velocity_variance = 10.0;
  // stabilize_track restarts the filter on the measurement after this many
  // consecutive gated measurements; 0 never restarts.
  int reacquire_after = 2;
};

KfState kalman_init(const TrackBox& measurement, const KalmanParams& params = {});
KfState kalman_predict(const KfState& state, const KalmanParams& params = {});
KfState kalman_update(const KfState& predicted, const TrackBox& measurement, const KalmanParams& params = {});

// Predict, then update when a measurement is present.
KfState kalman_step(const KfState& state, const std::optional<TrackBox>& measurement,
                    const KalmanParams& params = {});

struct StabilizedTrack {
  // Absent before the first present measurement.
  std::vector<std::optional<TrackBox>> boxes;
  std::vector<bool> outlier;
};

inline constexpr double kDefaultGateIou = 0.3;

// Kalman smoothing with IoU gating: a measurement whose IoU with the
// prediction falls below gate_iou is flagged and treated as missing, until
// params.reacquire_after consecutive misses re-initialise the filter there.
StabilizedTrack stabilize_track(std::span<const std::optional<TrackBox>> boxes, const KalmanParams& params = {},
                                double gate_iou = kDefaultGateIou);
StabilizedTrack stabilize_track(std::span<const std::optional<Box>> boxes, const KalmanParams& params = {},
                                double gate_iou = kDefaultGateIou);

}  // namespace catv
