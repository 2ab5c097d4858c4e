#pragma once

#include "spectral_slam/spectral.hpp"

namespace spectral_slam {

// Column-by-column thin SVD (Brand-style rank-one updates). The right factor
// is kept as V = V0 * W so that each update costs O(m k + k^3) regardless of
// how many columns have been seen.
class IncrementalSvd {
 public:
  IncrementalSvd(Eigen::Index rows, int max_rank, double tolerance = 1e-12);

  void update(const Eigen::VectorXd& column);

  int rank() const { return static_cast<int>(s_.size()); }
  Eigen::Index columns_seen() const { return n_; }
  const Eigen::MatrixXd& U() const { return u_; }
  const Eigen::VectorXd& singular_values() const { return s_; }
  Eigen::MatrixXd V() const;

  // Packages the current factors; metadata comes from the matrix that was streamed.
  FactoredModel to_factored_model(const MeasurementMatrix& source) const;

 private:
  void materialize();
  void append_v_row(const Eigen::RowVectorXd& row);

  Eigen::Index m_;
  int max_rank_;
  double tol_;
  Eigen::MatrixXd u_;
  Eigen::VectorXd s_;
  Eigen::MatrixXd v0_;  // capacity rows, first n_ used
  Eigen::MatrixXd w_;
  Eigen::Index n_ = 0;
  int since_refresh_ = 0;
};

// Streams every column of `y` through an IncrementalSvd. A few extra
// directions are tracked while streaming so that energy discarded by early
// truncation is not lost from the leading `rank`.
FactoredModel online_factorize(const MeasurementMatrix& y, int rank, int oversample = 4);

}  // namespace spectral_slam
