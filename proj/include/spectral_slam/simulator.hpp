#pragma once

#include <cstdint>
#include <vector>

#include "spectral_slam/core.hpp"

namespace spectral_slam {

enum class NoiseKind { Gaussian, Uniform };
enum class PathKind { RandomWalk, Lawnmower };

struct SimConfig {
  std::size_t n_landmarks = 6;
  std::size_t n_steps = 500;  // number of poses; odometry has n_steps - 1 entries
  double arena = 10.0;        // landmarks uniform in [-arena, arena]^2
  double dt = 1.0;

  // Range noise sigma = range_noise_frac * true range. Uniform noise uses the
  // same sigma (half-width sqrt(3) sigma) and is therefore bounded.
  double range_noise_frac = 0.01;
  NoiseKind noise_kind = NoiseKind::Gaussian;
  double dropout_prob = 0.0;

  // Odometry corruption: reported = true + N(0, sigma) (+ bias for omega).
  double sigma_v = 0.0;
  double sigma_omega = 0.0;
  double omega_bias = 0.0;

  std::uint64_t seed = 1;

  PathKind path = PathKind::RandomWalk;
  Pose start{};

  // Random walk: v ~ U[v_min, v_max], omega_t = 0.8 omega_{t-1} + N(0, turn_sigma),
  // steering back toward the centre beyond 0.8 * arena.
  double v_min = 0.3;
  double v_max = 0.7;
  double turn_sigma = 0.15;

  // Lawnmower: lanes along x joined by alternating half-circle turns; the
  // sweep reverses direction after `lanes_per_sweep` lanes.
  double lane_length = 40.0;
  double lane_spacing = 2.0;
  double lawn_speed = 0.197;
  std::size_t lanes_per_sweep = 10;

  // Landmarks 1..n_anchor_check are resampled until their rows, built from
  // coordinates divided by `arena`, have condition number at most this value.
  // 0 disables the check.
  double max_anchor_condition = 20.0;
  std::size_t n_anchor_check = 4;
};

void validate(const SimConfig& config);

std::vector<Landmark> generate_environment(const SimConfig& config);

struct Trajectory {
  std::vector<Pose> poses;                   // true poses, one per step
  std::vector<OdometryStep> true_controls;   // noiseless actions
  std::vector<OdometryStep> odometry;        // reported (noisy) actions
  std::vector<double> times;                 // pose times
};

Trajectory simulate_trajectory(const SimConfig& config);

// Integrates the given noiseless controls from `start` and corrupts them
// into an odometry log per the config noise settings.
Trajectory simulate_from_controls(const Pose& start, const std::vector<OdometryStep>& controls,
                                  const SimConfig& config);

std::vector<RangeReading> generate_ranges(const std::vector<Landmark>& landmarks,
                                          const std::vector<Pose>& poses,
                                          const std::vector<double>& times, const SimConfig& config);

struct SimulatedRun {
  std::vector<Landmark> landmarks;
  Trajectory trajectory;
  std::vector<RangeReading> ranges;
};

SimulatedRun simulate(const SimConfig& config);

// Defaults resembling the first Plaza log: 9,658 poses, 4 landmarks, about
// 3,529 range readings along a lawnmower path.
SimConfig plaza_like_config(std::uint64_t seed);

}  // namespace spectral_slam
