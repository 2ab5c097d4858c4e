#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spectral_slam/core.hpp"

namespace spectral_slam {

// On-disk layout of a dataset directory. Only ranges.csv is required.
inline constexpr const char* kRangesFile = "ranges.csv";
inline constexpr const char* kOdometryFile = "odometry.csv";
inline constexpr const char* kGroundTruthFile = "groundtruth.csv";
inline constexpr const char* kAnchorsFile = "anchors.csv";
inline constexpr const char* kLandmarksFile = "landmarks.csv";

inline constexpr const char* kRangesHeader = "time_s,landmark_id,range_m";
inline constexpr const char* kOdometryHeader = "time_s,v_m,omega_rad";
inline constexpr const char* kGroundTruthHeader = "time_s,x_m,y_m,theta_rad";
inline constexpr const char* kLandmarksHeader = "landmark_id,x_m,y_m";

struct DatasetBundle {
  std::vector<RangeReading> ranges;
  std::vector<OdometryStep> odometry;
  std::optional<std::vector<TimedPose>> ground_truth;
  std::optional<std::vector<Landmark>> anchors;
  std::optional<std::vector<Landmark>> landmarks;  // true map, when known
};

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

std::vector<RangeReading> read_ranges(std::istream& in);
std::vector<OdometryStep> read_odometry(std::istream& in);
std::vector<TimedPose> read_ground_truth(std::istream& in);
std::vector<Landmark> read_landmarks(std::istream& in);

void write_ranges(std::ostream& out, const std::vector<RangeReading>& ranges);
void write_odometry(std::ostream& out, const std::vector<OdometryStep>& odometry);
void write_ground_truth(std::ostream& out, const std::vector<TimedPose>& poses);
void write_landmarks(std::ostream& out, const std::vector<Landmark>& landmarks);

// Single-file helpers; IoError when the file cannot be opened.
std::vector<RangeReading> read_ranges_file(const std::filesystem::path& path);
std::vector<OdometryStep> read_odometry_file(const std::filesystem::path& path);
std::vector<TimedPose> read_ground_truth_file(const std::filesystem::path& path);
std::vector<Landmark> read_landmarks_file(const std::filesystem::path& path);

// Sorts by time (stably) and checks id consistency: anchors must be observed
// in the ranges, and ranges may only refer to landmarks of the true map.
void validate_bundle(DatasetBundle& bundle);

DatasetBundle parse_dataset(const std::filesystem::path& directory);
void write_dataset(const std::filesystem::path& directory, const DatasetBundle& bundle);

struct LandmarkGaps {
  std::size_t readings = 0;
  double mean_gap_s = 0.0;
  double max_gap_s = 0.0;
  double mean_gap_steps = 0.0;  // in odometry intervals, 0 without odometry
};

struct DatasetSummary {
  std::size_t range_readings = 0;
  std::size_t odometry_steps = 0;
  std::size_t ground_truth_poses = 0;
  std::size_t anchors = 0;
  std::map<int, LandmarkGaps> per_landmark;
};

DatasetSummary summarize(const DatasetBundle& bundle);

}  // namespace spectral_slam
