#pragma once

#include <cstdint>
#include <vector>

#include "spectral_slam/simulator.hpp"
#include "spectral_slam/spectral.hpp"

namespace spectral_slam {

struct ProcrustesResult {
  Eigen::MatrixXd rotation;  // d x d, orthogonal
  Eigen::VectorXd translation;
  double residual = 0.0;     // RMS distance after alignment
  Eigen::MatrixXd aligned;   // estimate mapped onto the reference
};

// Rigid (optionally reflective) map est -> ref minimising RMS distance; rows are points.
ProcrustesResult procrustes_align(const Eigen::MatrixXd& estimated, const Eigen::MatrixXd& reference,
                                  bool allow_reflection);

struct SegmentRmse {
  double full = 0.0;
  double best10 = 0.0;
  double worst10 = 0.0;
  double last10 = 0.0;
};

// Position RMSE over the whole path and over contiguous windows of 10% of its length.
SegmentRmse rmse_segments(const std::vector<Pose>& estimated, const std::vector<Pose>& truth);

// Frobenius norm of the landmark-row differences, skipping the given ids.
double map_error(const Eigen::MatrixXd& c_hat, const Eigen::MatrixXd& c_true, const std::vector<int>& ids,
                 const std::vector<int>& exclude_ids);

struct ConvergenceConfig {
  SimConfig base;                  // landmarks, noise, motion settings
  std::vector<std::size_t> t_grid{125, 250, 500, 1000, 2000, 4000};
  std::size_t trials = 100;
  std::size_t n_anchors = 4;       // landmarks 1..n_anchors anchor the map
  int rank = 4;
  std::uint64_t seed = 1;
};

struct ConvergencePoint {
  std::size_t T = 0;
  double mean = 0.0;
  double median = 0.0;
  double ci95 = 0.0;  // half-width of the normal-approximation interval
  std::size_t failures = 0;
  std::vector<double> errors;
};

struct ConvergenceResult {
  std::vector<ConvergencePoint> points;
  double slope = 0.0;  // OLS slope of log(mean) on log(T)
  double slope_ci95 = 0.0;
  bool floor_limited = false;
  bool strictly_decreasing = false;
};

// Each trial simulates one path of max(t_grid) steps and evaluates every
// prefix length on it, so the grid points share their random draws.
ConvergenceResult convergence_study(const ConvergenceConfig& config);

struct BoundValue {
  double bound = 0.0;
  double failure_probability = 0.0;
};

BoundValue theoretical_bound(double n_landmarks, double c, double gamma, double T);

// Largest principal-angle sine between the column spaces of a and b.
double subspace_sin(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct BoundTrial {
  double sin_psi = 0.0;
  double bound = 0.0;
  double c = 0.0;
  double gamma = 0.0;
};

struct BoundCheckResult {
  std::vector<BoundTrial> trials;
  double violation_fraction = 0.0;
  double failure_probability = 0.0;  // 8 N^2 / T
};

// Rank-4 range matrices (needs more than 4 landmarks) without dropout;
// c is measured as the largest deviation of the per-column
// products y_a y_b from their noiseless values.
BoundCheckResult empirical_bound_check(const SimConfig& config, std::size_t trials, std::uint64_t seed);

}  // namespace spectral_slam
