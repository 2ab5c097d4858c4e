#include <gtest/gtest.h>

#include "spectral_slam/core.hpp"

using namespace spectral_slam;

TEST(LandmarkRow, HandValues) {
  EXPECT_TRUE(landmark_to_row({0, 3, 4}).isApprox(LandmarkRow(12.5, 3, 4, 1)));
  EXPECT_EQ(landmark_to_row({0, 0, 0}), LandmarkRow(0, 0, 0, 1));
  EXPECT_TRUE(landmark_to_row({0, -1, 2}).isApprox(LandmarkRow(2.5, -1, 2, 1)));
}

TEST(LandmarkRow, RoundTrip) {
  const Landmark l = row_to_landmark(landmark_to_row({7, -2.5, 0.25}), 7);
  EXPECT_EQ(l.id, 7);
  EXPECT_DOUBLE_EQ(l.x, -2.5);
  EXPECT_DOUBLE_EQ(l.y, 0.25);
}

TEST(StateCol, Rank4) {
  const StateCol4 c = pose_to_col4({2, -1, 0.3});
  EXPECT_TRUE(c.isApprox(StateCol4(1, -2, 1, 2.5)));
}

TEST(StateCol, Rank7StraightStep) {
  StateCol7 expected;
  expected << 1, 0, 0, 0, -1, 0, 0.5;
  EXPECT_LT((pose_to_col7({0, 0, 0}, {1, 0, 0}, 1.0) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(StateCol, Rank7Heading) {
  StateCol7 expected;
  expected << 1, -1, -1, 1, 0, -1, 1.5;
  EXPECT_LT((pose_to_col7({1, 1, kPi / 2}, {1, 2, kPi / 2}, 1.0) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(StateCol, Rank7TinyVelocity) {
  try {
    pose_to_col7({0, 0, 0}, {0, 0, 0}, 1e-9);
    FAIL();
  } catch (const SlamError& e) {
    EXPECT_EQ(e.code(), ErrorCode::VelocityTooSmall);
  }
}

TEST(SquaredRange, HandValues) {
  EXPECT_DOUBLE_EQ(squared_range({0, 1, 0}, {0, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(squared_range({0, 1, 1}, {0.5, 0.5, 0}), 0.5);
  EXPECT_DOUBLE_EQ(squared_range({0, 0, 0}, {0, 0, 0}), 0.0);
}

// d^2 = 2 C.X for the canonical row/column pair.
TEST(SquaredRange, FactorIdentity) {
  const Landmark l{0, 2.5, -1.25};
  const Pose p{-0.75, 3.0, 1.0};
  EXPECT_NEAR(2.0 * landmark_to_row(l).dot(pose_to_col4(p)), squared_range(l, p), 1e-12);
}

TEST(Angles, Normalize) {
  EXPECT_NEAR(normalize_angle(3 * kPi), kPi, 1e-12);
  EXPECT_NEAR(normalize_angle(-kPi), kPi, 1e-12);
  EXPECT_NEAR(normalize_angle(-0.5), -0.5, 1e-15);
  EXPECT_NEAR((Pose{0, 0, 2 * kPi + 0.25}).heading(), 0.25, 1e-12);
}

TEST(Kinematics, SquareReturnsHome) {
  Pose p{};
  for (int k = 0; k < 4; ++k) p = kinematic_step(p, 1.0, kPi / 2);
  EXPECT_NEAR(p.x, 0.0, 1e-9);
  EXPECT_NEAR(p.y, 0.0, 1e-9);
}

TEST(PoseTimes, Boundaries) {
  EXPECT_EQ(pose_times({}), std::vector<double>{0.0});
  EXPECT_EQ(pose_times({{5.0, 1, 0}}), (std::vector<double>{5.0, 6.0}));
  EXPECT_EQ(pose_times({{0.0, 1, 0}, {0.5, 1, 0}}), (std::vector<double>{0.0, 0.5, 1.0}));
}

TEST(Matrices, Shapes) {
  const std::vector<Landmark> ls{{1, 1, 2}, {2, 3, 4}};
  EXPECT_EQ(landmarks_to_matrix(ls).rows(), 2);
  EXPECT_EQ(landmarks_to_matrix(ls).cols(), 4);
  EXPECT_EQ(landmark_positions(ls)(1, 1), 4.0);
  const std::vector<Pose> ps{{1, 2, 0}, {3, 4, 0}, {5, 6, 0}};
  EXPECT_EQ(poses_to_matrix(ps).rows(), 4);
  EXPECT_EQ(poses_to_matrix(ps).cols(), 3);
  EXPECT_EQ(pose_positions(ps)(2, 0), 5.0);
}

TEST(Errors, StageAndExitClass) {
  const SlamError e(ErrorCode::ParseError, "bad number", 7);
  const SlamError staged = e.with_stage("parse");
  EXPECT_EQ(staged.stage(), "parse");
  EXPECT_EQ(staged.detail(), "bad number");
  EXPECT_EQ(staged.line(), 7);
  EXPECT_NE(std::string(staged.what()).find("[parse]"), std::string::npos);
  EXPECT_TRUE(is_input_error(ErrorCode::ParseError));
  EXPECT_FALSE(is_input_error(ErrorCode::DegenerateInput));
  EXPECT_EQ(to_string(ErrorCode::TooFewAnchors), "TooFewAnchors");
}
