#pragma once

#include <Eigen/Dense>

#include <vector>

#include "spectral_slam/error.hpp"

namespace spectral_slam {

// Squared-range bookkeeping
// -------------------------
// Measurement matrices store half squared ranges, Y[n,t] = d(n,t)^2 / 2.
// Landmark rows and state columns carry no extra factor:
//
//   C_n = [ (mx^2 + my^2)/2, mx, my, 1 ]
//   X_t = [ 1, -x, -y, (x^2 + y^2)/2 ]
//
// so that d^2 = 2 * C_n . X_t and therefore Y = C X exactly. The heading
// augmented variant appends [-cos(theta), -sin(theta), (|p_{t+1}|^2 - |p_t|^2)/(2 v)]
// to X_t and [mx, my, 1] (in a separate block of rows) to C_n; its lower
// block of Y holds (d_{t+1}^2 - d_t^2) / (2 v_t). Everything in this library
// uses this canonical ordering; the metric upgrade works internally in a
// permuted order and converts back before returning.

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDefaultVelocityFloor = 1e-3;

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // radians, stored raw; use heading() for (-pi, pi]

  double heading() const;
};

struct Landmark {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
};

struct RangeReading {
  double time = 0.0;
  int landmark_id = 0;
  double range = 0.0;
};

// Displacement over the interval starting at `time`.
struct OdometryStep {
  double time = 0.0;
  double v = 0.0;
  double omega = 0.0;
};

struct TimedPose {
  double time = 0.0;
  Pose pose;
};

using LandmarkRow = Eigen::Vector4d;
using StateCol4 = Eigen::Vector4d;
using StateCol7 = Eigen::Matrix<double, 7, 1>;

// Maps an angle to (-pi, pi].
double normalize_angle(double angle);

LandmarkRow landmark_to_row(const Landmark& landmark);
Landmark row_to_landmark(const LandmarkRow& row, int id);

StateCol4 pose_to_col4(const Pose& pose);
StateCol7 pose_to_col7(const Pose& pose, const Pose& next_pose, double v,
                       double velocity_floor = kDefaultVelocityFloor);

double squared_range(const Landmark& landmark, const Pose& pose);

// Pose timeline of an odometry log: every step's start time plus the end of
// the last interval (its predecessor's spacing, or 1 s for a single step).
// An empty log yields the single time 0.
std::vector<double> pose_times(const std::vector<OdometryStep>& odometry);

// Unicycle update: x += v cos(theta), y += v sin(theta), theta += omega.
Pose kinematic_step(const Pose& pose, double v, double omega);

Eigen::MatrixXd landmarks_to_matrix(const std::vector<Landmark>& landmarks);
Eigen::MatrixXd poses_to_matrix(const std::vector<Pose>& poses);

// N x 2 / T x 2 position matrices.
Eigen::MatrixXd landmark_positions(const std::vector<Landmark>& landmarks);
Eigen::MatrixXd pose_positions(const std::vector<Pose>& poses);

}  // namespace spectral_slam
