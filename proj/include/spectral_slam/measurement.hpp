#pragma once

#include <vector>

#include "spectral_slam/core.hpp"

namespace spectral_slam {

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Half squared ranges on the pose timeline, one row per landmark.
struct RangeGrid {
  Eigen::MatrixXd values;  // d^2 / 2
  BoolMatrix mask;         // true where a reading was observed
  std::vector<double> timesteps;
  std::vector<int> landmark_ids;

  Eigen::Index landmarks() const { return values.rows(); }
  Eigen::Index steps() const { return values.cols(); }
};

enum class MatrixKind { Rank4, Rank7 };

struct MeasurementMatrix {
  Eigen::MatrixXd Y;
  MatrixKind kind = MatrixKind::Rank4;
  std::vector<double> col_times;
  std::vector<double> velocities;        // Rank7 only
  std::vector<std::size_t> col_indices;  // source pose index of each column
  std::vector<int> landmark_ids;

  Eigen::Index n_landmarks() const { return kind == MatrixKind::Rank7 ? Y.rows() / 2 : Y.rows(); }
};

std::vector<Pose> dead_reckon(const std::vector<OdometryStep>& odometry, const Pose& start = {});

// Readings snapped to the nearest time in `times`; several readings landing
// on one cell are averaged. Landmark ids default to the sorted ids present.
RangeGrid observed_grid(const std::vector<RangeReading>& readings, const std::vector<double>& times,
                        std::vector<int> landmark_ids = {});

struct InterpolationOptions {
  std::size_t window = 100;
  std::size_t overlap = 50;
  std::size_t min_readings = 5;
  double min_design_ratio = 1e-4;  // sigma_4 / sigma_1 of the column-scaled local design
};

// Fills unobserved cells by local regression of d^2/2 on dead-reckoned
// features [1, -x, -y, (x^2+y^2)/2] within overlapping windows.
RangeGrid interpolate_missing(const std::vector<RangeReading>& readings,
                              const std::vector<OdometryStep>& odometry,
                              const InterpolationOptions& options = {});
RangeGrid interpolate_grid(const RangeGrid& observed, const std::vector<OdometryStep>& odometry,
                           const InterpolationOptions& options = {});

MeasurementMatrix build_rank4(const RangeGrid& grid);
MeasurementMatrix build_rank7(const RangeGrid& grid, const std::vector<OdometryStep>& odometry,
                              double velocity_floor = kDefaultVelocityFloor);

// Noiseless matrices straight from geometry, useful as oracles.
RangeGrid exact_grid(const std::vector<Landmark>& landmarks, const std::vector<Pose>& poses,
                     const std::vector<double>& times);

}  // namespace spectral_slam
