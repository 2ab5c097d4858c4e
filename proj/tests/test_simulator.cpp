#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "spectral_slam/simulator.hpp"

using namespace spectral_slam;

namespace {
ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const SlamError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::IoError;
}
}  // namespace

TEST(Environment, DeterministicForSeed) {
  SimConfig c;
  c.seed = 42;
  const auto a = generate_environment(c);
  const auto b = generate_environment(c);
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_EQ(a[i].x, b[i].x);
    EXPECT_EQ(a[i].y, b[i].y);
  }
}

TEST(Environment, ZeroLandmarks) {
  SimConfig c;
  c.n_landmarks = 0;
  EXPECT_EQ(code_of([&] { generate_environment(c); }), ErrorCode::InvalidConfig);
}

TEST(Environment, InsideArena) {
  SimConfig c;
  c.n_landmarks = 100;
  c.arena = 10.0;
  for (const auto& l : generate_environment(c)) {
    EXPECT_LE(std::abs(l.x), 10.0);
    EXPECT_LE(std::abs(l.y), 10.0);
  }
}

TEST(Trajectory, StraightLine) {
  SimConfig c;
  const std::vector<OdometryStep> u{{0, 1, 0}, {1, 1, 0}, {2, 1, 0}};
  const Trajectory t = simulate_from_controls({}, u, c);
  ASSERT_EQ(t.poses.size(), 4u);
  for (std::size_t k = 0; k < t.poses.size(); ++k) {
    EXPECT_NEAR(t.poses[k].x, static_cast<double>(k), 1e-12);
    EXPECT_NEAR(t.poses[k].y, 0.0, 1e-12);
    EXPECT_NEAR(t.poses[k].theta, 0.0, 1e-12);
  }
}

TEST(Trajectory, QuarterTurnsClose) {
  SimConfig c;
  std::vector<OdometryStep> u;
  for (int k = 0; k < 4; ++k) u.push_back({static_cast<double>(k), 1.0, kPi / 2});
  const Trajectory t = simulate_from_controls({}, u, c);
  EXPECT_NEAR(t.poses.back().x, 0.0, 1e-9);
  EXPECT_NEAR(t.poses.back().y, 0.0, 1e-9);
}

TEST(Trajectory, NoisyLogReproducible) {
  SimConfig c;
  c.sigma_v = 0.05;
  c.sigma_omega = 0.02;
  c.seed = 9;
  const Trajectory a = simulate_trajectory(c), b = simulate_trajectory(c);
  ASSERT_EQ(a.odometry.size(), c.n_steps - 1);
  for (std::size_t k = 0; k < a.odometry.size(); ++k) {
    EXPECT_EQ(a.odometry[k].v, b.odometry[k].v);
    EXPECT_EQ(a.odometry[k].omega, b.odometry[k].omega);
  }
  bool perturbed = false;
  for (std::size_t k = 0; k < a.odometry.size(); ++k) perturbed |= a.odometry[k].v != a.true_controls[k].v;
  EXPECT_TRUE(perturbed);
}

TEST(Ranges, NoiselessAreEuclidean) {
  SimConfig c;
  c.range_noise_frac = 0.0;
  const SimulatedRun run = simulate(c);
  ASSERT_EQ(run.ranges.size(), c.n_steps * c.n_landmarks);
  for (const auto& r : run.ranges) {
    const auto k = static_cast<std::size_t>(std::lround(r.time / c.dt));
    const Landmark& l = run.landmarks[static_cast<std::size_t>(r.landmark_id - 1)];
    ASSERT_EQ(l.id, r.landmark_id);
    EXPECT_NEAR(r.range, std::hypot(l.x - run.trajectory.poses[k].x, l.y - run.trajectory.poses[k].y), 1e-12);
  }
}

TEST(Ranges, FullDropout) {
  SimConfig c;
  c.dropout_prob = 1.0;
  EXPECT_TRUE(simulate(c).ranges.empty());
}

TEST(Ranges, NoiseScale) {
  SimConfig c;
  c.range_noise_frac = 0.01;
  c.seed = 3;
  const std::size_t n = 100000;
  const std::vector<Landmark> l{{1, 10.0, 0.0}};
  const std::vector<Pose> poses(n);
  std::vector<double> times(n);
  for (std::size_t k = 0; k < n; ++k) times[k] = static_cast<double>(k);
  const auto r = generate_ranges(l, poses, times, c);
  ASSERT_EQ(r.size(), n);
  double sum = 0, sum2 = 0;
  for (const auto& x : r) {
    sum += x.range - 10.0;
    sum2 += (x.range - 10.0) * (x.range - 10.0);
  }
  const double mean = sum / n, sd = std::sqrt(sum2 / n - mean * mean);
  EXPECT_GE(sd, 0.095);
  EXPECT_LE(sd, 0.105);
}

TEST(Ranges, UniformNoiseIsBounded) {
  SimConfig c;
  c.noise_kind = NoiseKind::Uniform;
  c.range_noise_frac = 0.01;
  const std::vector<Landmark> l{{1, 10.0, 0.0}};
  const std::vector<Pose> poses(5000);
  std::vector<double> times(poses.size());
  for (std::size_t k = 0; k < times.size(); ++k) times[k] = static_cast<double>(k);
  for (const auto& x : generate_ranges(l, poses, times, c)) EXPECT_LE(std::abs(x.range - 10.0), std::sqrt(3.0) * 0.1 + 1e-12);
}

TEST(Plaza, Calibration) {
  const SimConfig c = plaza_like_config(7);
  const SimulatedRun run = simulate(c);
  EXPECT_EQ(run.trajectory.poses.size(), 9658u);
  EXPECT_EQ(run.landmarks.size(), 4u);
  EXPECT_NEAR(static_cast<double>(run.ranges.size()), 3529.0, 200.0);
}
