#pragma once

#include <optional>
#include <vector>

#include "spectral_slam/measurement.hpp"

namespace spectral_slam {

struct FactoredModel {
  Eigen::MatrixXd U;                // rows x r
  Eigen::VectorXd singular_values;  // descending
  Eigen::MatrixXd V;                // cols x r
  int rank = 0;
  MatrixKind kind = MatrixKind::Rank4;
  std::vector<int> landmark_ids;
  std::vector<double> col_times;
  std::vector<double> velocities;
  std::vector<std::size_t> col_indices;
  std::optional<Eigen::MatrixXd> S;  // latent = S * physical, once known

  Eigen::MatrixXd reconstruct() const { return U * singular_values.asDiagonal() * V.transpose(); }
  Eigen::Index n_landmarks() const { return kind == MatrixKind::Rank7 ? U.rows() / 2 : U.rows(); }
};

enum class Frame { Anchored, UpToOrthogonal };

struct SlamSolution {
  Eigen::MatrixXd C;  // landmark model, canonical column order
  Eigen::MatrixXd X;  // state matrix, canonical row order
  std::vector<Landmark> map;
  std::vector<Pose> trajectory;
  std::vector<double> times;
  std::vector<std::size_t> col_indices;
  Frame frame = Frame::Anchored;
  std::optional<Eigen::MatrixXd> S;
};

FactoredModel factorize(const MeasurementMatrix& y, int rank);

struct NullspaceReduction {
  Eigen::MatrixXd basis;        // N x 4, top block of U restricted to its row space
  Eigen::MatrixXd restriction;  // 7 x 4 orthonormal
  Eigen::VectorXd singular_values;  // of the top block
};

// Top N x 7 block of a rank-7 U has a 3-dimensional nullspace in exact data.
NullspaceReduction eliminate_nullspace(const FactoredModel& model, Eigen::Index n_landmarks);

struct AlignmentOptions {
  double max_condition = 1e8;
};

SlamSolution align_with_anchors(const FactoredModel& model, const std::vector<Landmark>& anchors,
                                const AlignmentOptions& options = {});

// theta_t = atan2 of the step to the next position; the last copies its
// predecessor and coincident positions carry the previous heading forward.
std::vector<double> recover_headings(const Eigen::MatrixXd& positions);

// Positions (T x 2) from canonical state rows 1 and 2.
Eigen::MatrixXd decode_positions(const Eigen::MatrixXd& X);
std::vector<Landmark> decode_map(const Eigen::MatrixXd& C, const std::vector<int>& ids);
std::vector<Pose> assemble_trajectory(const Eigen::MatrixXd& positions);

// Heading-augmented state matrix from decoded positions and headings; the
// last element uses x cos(theta) + y sin(theta) + v/2.
Eigen::MatrixXd build_state7(const std::vector<Pose>& trajectory, const std::vector<double>& velocities);

}  // namespace spectral_slam
