#include "spectral_slam/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace spectral_slam {

namespace {

// Independent streams per purpose so that, e.g., changing the noise level
// does not change the landmark layout.
enum Stream : std::uint32_t { kEnvironment = 1, kPath = 2, kOdometry = 3, kRanges = 4 };

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

double anchor_condition(const std::vector<Landmark>& landmarks, std::size_t count, double scale) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(count), 4);
  for (std::size_t i = 0; i < count; ++i) {
    Landmark l{landmarks[i].id, landmarks[i].x / scale, landmarks[i].y / scale};
    rows.row(static_cast<Eigen::Index>(i)) = landmark_to_row(l).transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(rows);
  const auto& s = svd.singularValues();
  const double smallest = s(s.size() - 1);
  return smallest > 0.0 ? s(0) / smallest : std::numeric_limits<double>::infinity();
}

std::vector<OdometryStep> random_walk_controls(const SimConfig& config) {
  auto rng = make_rng(config.seed, kPath);
  std::uniform_real_distribution<double> speed(config.v_min, config.v_max);
  std::normal_distribution<double> turn(0.0, 1.0);

  std::vector<OdometryStep> controls;
  controls.reserve(config.n_steps - 1);
  Pose pose = config.start;
  double omega = 0.0;
  for (std::size_t t = 0; t + 1 < config.n_steps; ++t) {
    const double v = speed(rng);
    omega = 0.8 * omega + config.turn_sigma * turn(rng);
    if (std::hypot(pose.x, pose.y) > 0.8 * config.arena) {
      const double to_centre = normalize_angle(std::atan2(-pose.y, -pose.x) - pose.theta);
      omega = std::clamp(to_centre, -0.5, 0.5);
    }
    controls.push_back({static_cast<double>(t) * config.dt, v, omega});
    pose = kinematic_step(pose, v, omega);
  }
  return controls;
}

std::vector<OdometryStep> lawnmower_controls(const SimConfig& config) {
  const std::size_t total = config.n_steps - 1;
  const auto lane_steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(config.lane_length / config.lawn_speed)));
  const double lane_v = config.lane_length / static_cast<double>(lane_steps);
  const double radius = 0.5 * config.lane_spacing;
  const auto turn_steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(kPi * radius / config.lawn_speed)));
  const double turn_v = kPi * radius / static_cast<double>(turn_steps);
  const double turn_omega = kPi / static_cast<double>(turn_steps);

  std::vector<OdometryStep> controls;
  controls.reserve(total);
  auto push = [&](double v, double omega) {
    if (controls.size() < total) controls.push_back({static_cast<double>(controls.size()) * config.dt, v, omega});
  };

  bool heading_east = true;
  bool sweeping_up = true;
  std::size_t lanes_in_sweep = 1;
  while (controls.size() < total) {
    for (std::size_t i = 0; i < lane_steps; ++i) push(lane_v, 0.0);
    if (lanes_in_sweep == config.lanes_per_sweep) {
      sweeping_up = !sweeping_up;
      lanes_in_sweep = 1;
    } else {
      ++lanes_in_sweep;
    }
    // East and up, or west and down, is a left (counter-clockwise) turn.
    const double sign = (heading_east == sweeping_up) ? 1.0 : -1.0;
    for (std::size_t i = 0; i < turn_steps; ++i) push(turn_v, sign * turn_omega);
    heading_east = !heading_east;
  }
  return controls;
}

}  // namespace

void validate(const SimConfig& config) {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (config.n_landmarks < 1) fail(ErrorCode::InvalidConfig, "n_landmarks must be at least 1");
  if (config.n_steps < 2) fail(ErrorCode::InvalidConfig, "n_steps must be at least 2");
  if (!(config.arena > 0.0)) fail(ErrorCode::InvalidConfig, "arena must be positive");
  if (!in_unit(config.range_noise_frac) || !in_unit(config.dropout_prob))
    fail(ErrorCode::InvalidConfig, "noise fraction and dropout must lie in [0, 1]");
  if (config.sigma_v < 0.0 || config.sigma_omega < 0.0) fail(ErrorCode::InvalidConfig, "negative odometry noise");
  if (config.v_min > config.v_max) fail(ErrorCode::InvalidConfig, "v_min exceeds v_max");
  if (config.path == PathKind::Lawnmower && (config.lane_length <= 0.0 || config.lane_spacing <= 0.0 ||
                                             config.lawn_speed <= 0.0 || config.lanes_per_sweep < 1))
    fail(ErrorCode::InvalidConfig, "bad lawnmower geometry");
}

std::vector<Landmark> generate_environment(const SimConfig& config) {
  if (config.n_landmarks < 1) fail(ErrorCode::InvalidConfig, "n_landmarks must be at least 1");
  if (!(config.arena > 0.0)) fail(ErrorCode::InvalidConfig, "arena must be positive");
  auto rng = make_rng(config.seed, kEnvironment);
  std::uniform_real_distribution<double> coord(-config.arena, config.arena);

  const std::size_t n_check = std::min(config.n_anchor_check, config.n_landmarks);
  const bool check = config.max_anchor_condition > 0.0 && n_check >= 4;
  std::vector<Landmark> landmarks(config.n_landmarks);
  for (int attempt = 0;; ++attempt) {
    for (std::size_t i = 0; i < config.n_landmarks; ++i)
      landmarks[i] = {static_cast<int>(i) + 1, coord(rng), coord(rng)};
    if (!check || attempt >= 10000) break;
    if (anchor_condition(landmarks, n_check, config.arena) <= config.max_anchor_condition) break;
  }
  return landmarks;
}

Trajectory simulate_from_controls(const Pose& start, const std::vector<OdometryStep>& controls,
                                  const SimConfig& config) {
  Trajectory out;
  out.true_controls = controls;
  out.poses.reserve(controls.size() + 1);
  out.poses.push_back(start);
  for (const auto& c : controls) out.poses.push_back(kinematic_step(out.poses.back(), c.v, c.omega));

  auto rng = make_rng(config.seed, kOdometry);
  std::normal_distribution<double> unit(0.0, 1.0);
  out.odometry.reserve(controls.size());
  for (const auto& c : controls) {
    OdometryStep o = c;
    if (config.sigma_v > 0.0) o.v += config.sigma_v * unit(rng);
    if (config.sigma_omega > 0.0) o.omega += config.sigma_omega * unit(rng);
    o.omega += config.omega_bias;
    out.odometry.push_back(o);
  }

  out.times = pose_times(controls);
  return out;
}

Trajectory simulate_trajectory(const SimConfig& config) {
  validate(config);
  const auto controls = config.path == PathKind::Lawnmower ? lawnmower_controls(config) : random_walk_controls(config);
  return simulate_from_controls(config.start, controls, config);
}

std::vector<RangeReading> generate_ranges(const std::vector<Landmark>& landmarks,
                                          const std::vector<Pose>& poses,
                                          const std::vector<double>& times, const SimConfig& config) {
  if (times.size() != poses.size()) fail(ErrorCode::LengthMismatch, "one time per pose required");
  auto rng = make_rng(config.seed, kRanges);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-std::sqrt(3.0), std::sqrt(3.0));
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  std::vector<RangeReading> out;
  for (std::size_t t = 0; t < poses.size(); ++t) {
    for (const auto& l : landmarks) {
      // Draw both variates unconditionally so dropout does not shift the noise sequence.
      const double u = coin(rng);
      const double z = config.noise_kind == NoiseKind::Gaussian ? gauss(rng) : uniform(rng);
      if (config.dropout_prob > 0.0 && u < config.dropout_prob) continue;
      const double d = std::sqrt(squared_range(l, poses[t]));
      const double r = std::max(0.0, d + config.range_noise_frac * d * z);
      out.push_back({times[t], l.id, r});
    }
  }
  return out;
}

SimulatedRun simulate(const SimConfig& config) {
  SimulatedRun run;
  run.landmarks = generate_environment(config);
  run.trajectory = simulate_trajectory(config);
  run.ranges = generate_ranges(run.landmarks, run.trajectory.poses, run.trajectory.times, config);
  return run;
}

SimConfig plaza_like_config(std::uint64_t seed) {
  SimConfig c;
  c.seed = seed;
  c.path = PathKind::Lawnmower;
  c.n_steps = 9658;
  c.n_landmarks = 4;
  c.arena = 20.0;
  c.start = {-20.0, -9.0, 0.0};
  c.dropout_prob = 1.0 - 3529.0 / (9658.0 * 4.0);
  c.range_noise_frac = 0.01;
  c.sigma_v = 0.005;
  c.sigma_omega = 0.004;
  c.omega_bias = 2e-4;
  c.max_anchor_condition = 20.0;
  return c;
}

}  // namespace spectral_slam
