#pragma once

#include <vector>

#include "spectral_slam/measurement.hpp"

namespace spectral_slam {

std::vector<Pose> dead_reckoning_baseline(const std::vector<OdometryStep>& odometry, const Pose& start = {});

struct RangeNoise {
  double frac = 0.01;  // sigma proportional to the measured range
  double abs = 0.05;   // floor, metres
  double sigma(double range) const;
};

struct LandmarkPrior {
  Landmark landmark;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();
};

struct EkfOptions {
  RangeNoise range;
  double sigma_v = 0.01;
  double sigma_omega = 0.01;
  Eigen::Matrix3d initial_pose_covariance = Eigen::Matrix3d::Identity() * 1e-6;
};

struct EkfResult {
  std::vector<double> times;
  std::vector<Pose> trajectory;
  std::vector<Landmark> landmarks;
  Eigen::MatrixXd covariance;  // final joint covariance
};

// Joint state [x, y, theta, m1x, m1y, ...]. At each pose the readings
// snapped to it are applied as scalar updates, then odometry predicts the next pose.
EkfResult cartesian_ekf(const std::vector<RangeReading>& readings, const std::vector<OdometryStep>& odometry,
                        const Pose& initial_pose, const std::vector<LandmarkPrior>& priors,
                        const EkfOptions& options = {});

// d range / d [x, y, theta, mx, my].
Eigen::Matrix<double, 1, 5> range_jacobian(const Pose& pose, const Landmark& landmark);

struct GaussNewtonOptions {
  RangeNoise range;
  double sigma_v = 0.01;
  double sigma_omega = 0.01;
  int max_iters = 200;
  double rel_tol = 1e-9;
  // Landmarks with these ids stay fixed (gauge). When empty, a tight prior
  // on the first pose fixes the gauge instead.
  std::vector<int> fixed_landmarks;
  double first_pose_sigma = 1e-3;
};

struct GaussNewtonResult {
  std::vector<Pose> poses;
  std::vector<Landmark> landmarks;
  std::vector<double> cost_history;  // cost before the first and after every accepted step
  int iterations = 0;
  bool converged = false;
};

// Minimises squared range residuals plus odometry residuals over all poses and free landmarks.
GaussNewtonResult batch_gauss_newton(const std::vector<Pose>& initial_poses,
                                     const std::vector<Landmark>& initial_landmarks,
                                     const std::vector<RangeReading>& readings,
                                     const std::vector<OdometryStep>& odometry,
                                     const GaussNewtonOptions& options = {});

double gauss_newton_cost(const std::vector<Pose>& poses, const std::vector<Landmark>& landmarks,
                         const std::vector<RangeReading>& readings, const std::vector<OdometryStep>& odometry,
                         const GaussNewtonOptions& options);

// Landmark positions fit to a given path by linear least squares on the
// squared-range model; a starting point for batch optimisation.
std::vector<Landmark> landmarks_from_path(const std::vector<Pose>& path, const std::vector<double>& times,
                                          const std::vector<RangeReading>& readings);

}  // namespace spectral_slam
