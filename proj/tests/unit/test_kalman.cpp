#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "catv/error.hpp"
#include "catv/kalman.hpp"
#include "kalman_oracle.hpp"

using namespace catv;
namespace ts = catv::testing_support;

namespace {

KalmanParams zero_noise() {
  KalmanParams p;
  p.process_noise_position = 0.0;
  p.process_noise_size = 0.0;
  p.measurement_noise = 0.0;
  return p;
}

}  // namespace

TEST(TrackBox, PixelEdgeConvention) {
  const auto t = TrackBox::from_box({0, 0, 9, 9});
  EXPECT_EQ(t, (TrackBox{5, 5, 10, 10}));
  EXPECT_EQ(t.to_box(100, 100), (Box{0, 0, 9, 9}));
  EXPECT_EQ((TrackBox{5, 5, 10, 10}).to_box(6, 6), (Box{0, 0, 5, 5}));
  EXPECT_FALSE((TrackBox{-20, -20, 4, 4}).to_box(10, 10).has_value());
  EXPECT_DOUBLE_EQ(box_iou(t, t), 1.0);
  EXPECT_DOUBLE_EQ(box_iou(t, {25, 5, 10, 10}), 0.0);
}

TEST(Kalman, PurePredict) {
  KfState s;
  s.mean << 0, 0, 10, 10, 1, 0, 0, 0;
  const auto out = kalman_step(s, std::nullopt, zero_noise());
  KfVector expect;
  expect << 1, 0, 10, 10, 1, 0, 0, 0;
  EXPECT_EQ(out.mean, expect);
}

TEST(Kalman, ZeroNoiseUpdatePinsToMeasurement) {
  KfState s;
  s.mean << 1, 2, 8, 8, 0, 0, 0, 0;
  const auto out = kalman_step(s, TrackBox::from_box({0, 0, 9, 9}), zero_noise());
  EXPECT_NEAR(out.mean(0), 5.0, 1e-12);
  EXPECT_NEAR(out.mean(1), 5.0, 1e-12);
  EXPECT_NEAR(out.mean(2), 10.0, 1e-12);
  EXPECT_NEAR(out.mean(3), 10.0, 1e-12);
}

TEST(Kalman, ScalarUpdateExample) {
  KfState prior;
  prior.mean << 0, 0, 10, 10, 0, 0, 0, 0;
  prior.covariance = KfMatrix::Identity();
  KalmanParams p;
  p.measurement_noise = 1.0;
  const auto post = kalman_update(prior, {2, 0, 10, 10}, p);
  EXPECT_NEAR(post.mean(0), 1.0, 1e-12);
  EXPECT_NEAR(post.covariance(0, 0), 0.5, 1e-12);
}

TEST(Kalman, MatchesAxisOracle) {
  EXPECT_LT(ts::oracle_max_deviation(11, 50), 1e-9);
  KalmanParams tight;
  tight.measurement_noise = 0.25;
  tight.process_noise_position = 0.5;
  EXPECT_LT(ts::oracle_max_deviation(12, 20, tight), 1e-9);
}

TEST(Kalman, CovarianceStaysSymmetricPsd) {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> pos(0, 200), size(2, 60);
  std::bernoulli_distribution present(0.7);
  KalmanParams p;
  auto s = kalman_init({100, 100, 20, 20}, p);
  double worst_asym = 0, worst_eig = 0;
  for (int i = 0; i < 10000; ++i) {
    std::optional<TrackBox> z;
    if (present(rng)) z = TrackBox{pos(rng), pos(rng), size(rng), size(rng)};
    s = kalman_step(s, z, p);
    worst_asym = std::max(worst_asym, (s.covariance - s.covariance.transpose()).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<KfMatrix> eig(s.covariance);
    worst_eig = std::min(worst_eig, eig.eigenvalues().minCoeff());
  }
  EXPECT_LT(worst_asym, 1e-9);
  EXPECT_GE(worst_eig, -1e-9);
}

TEST(Kalman, RejectsDegenerateMeasurement) {
  const auto s = kalman_init({10, 10, 5, 5});
  try {
    kalman_step(s, TrackBox{10, 10, 0, 5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidMeasurement);
  }
  EXPECT_THROW(kalman_init({1, 1, 3, -1}), Error);
}

TEST(Stabilize, NoiselessTrackIsReproduced) {
  std::vector<std::optional<TrackBox>> in;
  for (int t = 0; t < 30; ++t) in.push_back(TrackBox{10.0 + 2 * t, 20.0 + 0.5 * t, 12, 8});
  KalmanParams p;
  p.measurement_noise = 0.0;
  const auto out = stabilize_track(std::span<const std::optional<TrackBox>>(in), p);
  for (int t = 0; t < 30; ++t) {
    ASSERT_TRUE(out.boxes[t]);
    EXPECT_FALSE(out.outlier[t]);
    EXPECT_NEAR(out.boxes[t]->cx, in[t]->cx, 1e-6);
    EXPECT_NEAR(out.boxes[t]->cy, in[t]->cy, 1e-6);
    EXPECT_NEAR(out.boxes[t]->w, in[t]->w, 1e-6);
    EXPECT_NEAR(out.boxes[t]->h, in[t]->h, 1e-6);
  }
}

TEST(Stabilize, TeleportIsGatedAndPredicted) {
  KalmanParams p;
  std::vector<std::optional<TrackBox>> in;
  for (int t = 0; t < 20; ++t) in.push_back(TrackBox{30.0 + 2 * t, 40.0, 16, 16});
  in[12] = TrackBox{200, 200, 16, 16};
  const auto out = stabilize_track(std::span<const std::optional<TrackBox>>(in), p);
  for (int t = 0; t < 20; ++t) EXPECT_EQ(out.outlier[t], t == 12) << t;

  auto s = kalman_init(*in[0], p);
  for (int t = 1; t < 12; ++t) s = kalman_step(s, in[t], p);
  const auto predicted = kalman_predict(s, p).box();
  EXPECT_NEAR(out.boxes[12]->cx, predicted.cx, 1e-12);
  EXPECT_NEAR(out.boxes[12]->cy, predicted.cy, 1e-12);
  EXPECT_NEAR(out.boxes[12]->w, predicted.w, 1e-12);
}

TEST(Stabilize, ReducesNoise) {
  EXPECT_GE(ts::noise_reduction_wins(5, 100), 95);
  EXPECT_GE(ts::noise_reduction_wins(6, 100), 95);
}

TEST(Stabilize, DeterministicAndEmptyTrack) {
  std::vector<std::optional<Box>> in{std::nullopt, Box{1, 1, 5, 5}, Box{2, 1, 6, 5}, std::nullopt, Box{4, 1, 8, 5}};
  const auto a = stabilize_track(std::span<const std::optional<Box>>(in));
  const auto b = stabilize_track(std::span<const std::optional<Box>>(in));
  EXPECT_EQ(a.boxes, b.boxes);
  EXPECT_EQ(a.outlier, b.outlier);
  EXPECT_FALSE(a.boxes[0].has_value());
  EXPECT_TRUE(a.boxes[3].has_value());

  std::vector<std::optional<Box>> none(4);
  try {
    stabilize_track(std::span<const std::optional<Box>>(none));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyTrack);
  }
}

// Runs agree until the first differing box, where the higher gate rejected.
TEST(Stabilize, GatingMonotoneUpToFirstDivergence) {
  std::mt19937 rng(31);
  std::normal_distribution<double> noise(0, 1.5);
  std::bernoulli_distribution jump(0.08);
  std::uniform_real_distribution<double> far(100, 300);
  const double gates[] = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::optional<TrackBox>> in;
    for (int t = 0; t < 30; ++t) {
      if (t > 0 && jump(rng)) {
        in.push_back(TrackBox{far(rng), far(rng), 20, 20});
      } else {
        in.push_back(TrackBox{40.0 + t + noise(rng), 40.0 + noise(rng), 20 + noise(rng), 20 + noise(rng)});
      }
    }
    std::optional<StabilizedTrack> prev;
    for (const double g : gates) {
      auto out = stabilize_track(std::span<const std::optional<TrackBox>>(in), {}, g);
      if (prev) {
        for (std::size_t t = 0; t < in.size(); ++t) {
          if (prev->boxes[t] == out.boxes[t]) {
            ASSERT_EQ(prev->outlier[t], out.outlier[t]) << "trial " << trial << " t " << t;
            continue;
          }
          // Rejected by the higher gate: flagged, or restarted on the measurement.
          EXPECT_FALSE(prev->outlier[t]) << "trial " << trial << " t " << t << " gate " << g;
          EXPECT_TRUE(out.outlier[t] || out.boxes[t] == in[t]) << "trial " << trial << " t " << t << " gate " << g;
          break;
        }
      }
      prev = std::move(out);
    }
  }
}

TEST(Stabilize, ReacquiresAfterConsecutiveMisses) {
  std::vector<std::optional<TrackBox>> in;
  for (int t = 0; t < 5; ++t) in.push_back(TrackBox{20.0 + t, 20, 10, 10});
  for (int t = 0; t < 5; ++t) in.push_back(TrackBox{200.0 + t, 200, 10, 10});
  const auto out = stabilize_track(std::span<const std::optional<TrackBox>>(in));
  EXPECT_TRUE(out.outlier[5]);
  EXPECT_FALSE(out.outlier[6]);
  EXPECT_EQ(*out.boxes[6], *in[6]);
  for (std::size_t t = 7; t < in.size(); ++t) {
    EXPECT_FALSE(out.outlier[t]);
    EXPECT_GT(box_iou(*out.boxes[t], *in[t]), 0.8);
  }

  KalmanParams never;
  never.reacquire_after = 0;
  const auto locked = stabilize_track(std::span<const std::optional<TrackBox>>(in), never);
  for (std::size_t t = 5; t < in.size(); ++t) EXPECT_TRUE(locked.outlier[t]);
}
