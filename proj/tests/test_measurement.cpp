#include <gtest/gtest.h>

#include "spectral_slam/measurement.hpp"
#include "spectral_slam/simulator.hpp"

using namespace spectral_slam;

namespace {

SimConfig exact(std::size_t landmarks, std::size_t steps, std::uint64_t seed) {
  SimConfig c;
  c.n_landmarks = landmarks;
  c.n_steps = steps;
  c.range_noise_frac = 0.0;
  c.seed = seed;
  return c;
}

double sigma_ratio(const Eigen::MatrixXd& y, int k) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(y);
  return svd.singularValues()(k) / svd.singularValues()(0);
}

}  // namespace

TEST(DeadReckon, StraightAndSquare) {
  auto p = dead_reckon({{0, 1, 0}, {1, 1, 0}, {2, 1, 0}});
  EXPECT_NEAR(p.back().x, 3.0, 1e-12);
  EXPECT_NEAR(p.back().y, 0.0, 1e-12);
  p = dead_reckon({{0, 1, kPi / 2}, {1, 1, kPi / 2}, {2, 1, kPi / 2}, {3, 1, kPi / 2}});
  EXPECT_NEAR(p.back().x, 0.0, 1e-9);
  EXPECT_NEAR(p.back().y, 0.0, 1e-9);
  const Pose start{1, 2, 3};
  p = dead_reckon({}, start);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].x, 1.0);
}

TEST(ObservedGrid, SnapsAndAverages) {
  const std::vector<RangeReading> r{{0.1, 2, 2.0}, {0.9, 2, 4.0}, {1.1, 2, 2.0}, {2.0, 5, 1.0}};
  const RangeGrid g = observed_grid(r, {0.0, 1.0, 2.0});
  ASSERT_EQ(g.landmark_ids, (std::vector<int>{2, 5}));
  EXPECT_DOUBLE_EQ(g.values(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(g.values(0, 1), 0.5 * (8.0 + 2.0));
  EXPECT_FALSE(g.mask(0, 2));
  EXPECT_TRUE(g.mask(1, 2));
  EXPECT_EQ(g.mask.count(), 3);
}

TEST(Rank4, HandColumn) {
  const std::vector<Landmark> ls{{1, 0, 0}, {2, 1, 0}, {3, 0, 1}, {4, 1, 1}};
  const RangeGrid g = exact_grid(ls, {{0.5, 0.5, 0}}, {0.0});
  const MeasurementMatrix y = build_rank4(g);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(y.Y(i, 0), 0.25, 1e-15);
}

TEST(Rank4, ZeroRanges) {
  std::vector<RangeReading> r;
  for (int k = 0; k < 3; ++k) r.push_back({static_cast<double>(k), 1, 0.0});
  EXPECT_EQ(build_rank4(observed_grid(r, {0, 1, 2})).Y.norm(), 0.0);
}

TEST(Rank4, ExactRankAndFactorIdentity) {
  const SimulatedRun run = simulate(exact(6, 500, 4));
  const MeasurementMatrix y = build_rank4(observed_grid(run.ranges, run.trajectory.times));
  EXPECT_LT(sigma_ratio(y.Y, 4), 1e-10);
  const Eigen::MatrixXd cx = landmarks_to_matrix(run.landmarks) * poses_to_matrix(run.trajectory.poses);
  EXPECT_LT(((y.Y - cx).array().abs() / cx.array().abs().max(1e-12)).maxCoeff(), 1e-10);
}

TEST(Rank7, HandBottomEntry) {
  const RangeGrid g = exact_grid({{1, 0, 0}}, {{1, 0, 0}, {2, 0, 0}}, {0, 1});
  const MeasurementMatrix y = build_rank7(g, {{0, 1.0, 0.0}});
  ASSERT_EQ(y.Y.rows(), 2);
  ASSERT_EQ(y.Y.cols(), 1);
  EXPECT_NEAR(y.Y(1, 0), 1.5, 1e-15);
}

TEST(Rank7, ExactRankAndFactorIdentity) {
  const SimulatedRun run = simulate(exact(6, 400, 8));
  const auto& tr = run.trajectory;
  const MeasurementMatrix y = build_rank7(observed_grid(run.ranges, tr.times), tr.odometry);
  ASSERT_EQ(y.Y.rows(), 12);
  ASSERT_EQ(y.Y.cols(), 399);
  EXPECT_LT(sigma_ratio(y.Y, 7), 1e-10);

  // Block landmark model [[C, 0], [0, m 1]] times the stacked state columns.
  const auto n = static_cast<Eigen::Index>(run.landmarks.size());
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2 * n, 7);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Landmark& l = run.landmarks[static_cast<std::size_t>(i)];
    c.block(i, 0, 1, 4) = landmark_to_row(l).transpose();
    c(n + i, 4) = l.x;
    c(n + i, 5) = l.y;
    c(n + i, 6) = 1.0;
  }
  Eigen::MatrixXd x(7, y.Y.cols());
  for (Eigen::Index k = 0; k < y.Y.cols(); ++k) {
    const auto s = static_cast<std::size_t>(k);
    x.col(k) = pose_to_col7(tr.poses[s], tr.poses[s + 1], tr.odometry[s].v);
  }
  const Eigen::MatrixXd cx = c * x;
  EXPECT_LT((y.Y - cx).norm() / cx.norm(), 1e-9);
}

TEST(Rank7, StationaryStepsDropped) {
  const SimulatedRun run = simulate(exact(4, 20, 2));
  auto odo = run.trajectory.odometry;
  odo[5].v = 0.0;
  const MeasurementMatrix y = build_rank7(observed_grid(run.ranges, run.trajectory.times), odo);
  EXPECT_EQ(y.Y.cols(), 20 - 2);
  for (auto k : y.col_indices) EXPECT_NE(k, 5u);
}

TEST(Interpolation, DenseInputUnchanged) {
  const SimulatedRun run = simulate(exact(5, 120, 6));
  const RangeGrid g = observed_grid(run.ranges, run.trajectory.times);
  const RangeGrid f = interpolate_grid(g, run.trajectory.odometry);
  EXPECT_EQ((f.values - g.values).norm(), 0.0);
}

TEST(Interpolation, HalfDropoutNoiseless) {
  SimConfig c = exact(6, 600, 13);
  c.dropout_prob = 0.5;
  const SimulatedRun run = simulate(c);
  const RangeGrid f = interpolate_missing(run.ranges, run.trajectory.odometry);
  const RangeGrid truth = exact_grid(run.landmarks, run.trajectory.poses, run.trajectory.times);
  EXPECT_LT(((f.values - truth.values).array().abs() / truth.values.array().max(1e-12)).maxCoeff(), 1e-6);
  EXPECT_LT(f.mask.count(), f.mask.size());
}

TEST(Interpolation, SparseLawnmowerLanes) {
  // Straight lanes give numerically collinear windows; fits must not extrapolate wildly.
  SimConfig c = plaza_like_config(1001);
  c.range_noise_frac = 0.0;
  c.sigma_v = c.sigma_omega = c.omega_bias = 0.0;
  const SimulatedRun run = simulate(c);
  const RangeGrid f = interpolate_missing(run.ranges, run.trajectory.odometry);
  const RangeGrid truth = exact_grid(run.landmarks, run.trajectory.poses, run.trajectory.times);
  EXPECT_LT(((f.values - truth.values).array().abs() / truth.values.array().max(1e-12)).maxCoeff(), 1e-6);
}

TEST(Interpolation, ThreeReadings) {
  const SimulatedRun run = simulate(exact(4, 50, 1));
  std::vector<RangeReading> r;
  int seen = 0;
  for (const auto& x : run.ranges)
    if (x.landmark_id != 1 || seen++ < 3) r.push_back(x);
  try {
    interpolate_missing(r, run.trajectory.odometry);
    FAIL();
  } catch (const SlamError& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
  }
}
