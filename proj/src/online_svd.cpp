#include "spectral_slam/online_svd.hpp"

#include <algorithm>
#include <sstream>

namespace spectral_slam {

namespace {
constexpr int kRefreshInterval = 256;
}

IncrementalSvd::IncrementalSvd(Eigen::Index rows, int max_rank, double tolerance)
    : m_(rows), max_rank_(max_rank), tol_(tolerance), u_(rows, 0), s_(0), v0_(0, 0), w_(0, 0) {
  if (rows < 1 || max_rank < 1) fail(ErrorCode::InvalidConfig, "rows and max_rank must be positive");
}

void IncrementalSvd::append_v_row(const Eigen::RowVectorXd& row) {
  if (n_ >= v0_.rows()) v0_.conservativeResize(std::max<Eigen::Index>(16, 2 * v0_.rows()), v0_.cols());
  v0_.row(n_) = row;
  ++n_;
}

void IncrementalSvd::materialize() {
  Eigen::MatrixXd v = V();
  const Eigen::Index cap = std::max<Eigen::Index>(16, v0_.rows());
  v0_.resize(cap, v.cols());
  v0_.topRows(n_) = v;
  w_ = Eigen::MatrixXd::Identity(v.cols(), v.cols());
}

Eigen::MatrixXd IncrementalSvd::V() const {
  if (s_.size() == 0) return Eigen::MatrixXd::Zero(n_, 0);
  return v0_.topRows(n_) * w_;
}

void IncrementalSvd::update(const Eigen::VectorXd& column) {
  if (column.size() != m_) {
    std::ostringstream msg;
    msg << "column has " << column.size() << " entries, expected " << m_;
    fail(ErrorCode::DimensionMismatch, msg.str());
  }
  const Eigen::Index k = s_.size();
  const double norm = column.norm();

  if (k == 0) {
    if (!(norm > 0.0)) {
      append_v_row(Eigen::RowVectorXd::Zero(0));
      return;
    }
    u_ = column / norm;
    s_ = Eigen::VectorXd::Constant(1, norm);
    v0_ = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(16, 2 * (n_ + 1)), 1);
    v0_(n_, 0) = 1.0;
    ++n_;
    w_ = Eigen::MatrixXd::Identity(1, 1);
    return;
  }

  // Two Gram-Schmidt passes keep the residual orthogonal to U.
  Eigen::VectorXd p = u_.transpose() * column;
  Eigen::VectorXd e = column - u_ * p;
  const Eigen::VectorXd q = u_.transpose() * e;
  e -= u_ * q;
  p += q;
  const double rho = e.norm();
  const double scale = std::max(s_(0), norm);

  if (rho > tol_ * scale) {
    Eigen::MatrixXd kmat = Eigen::MatrixXd::Zero(k + 1, k + 1);
    kmat.topLeftCorner(k, k) = s_.asDiagonal();
    kmat.col(k).head(k) = p;
    kmat(k, k) = rho;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(kmat, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::MatrixXd basis(m_, k + 1);
    basis.leftCols(k) = u_;
    basis.col(k) = e / rho;

    if (k < max_rank_) {
      materialize();
      v0_.conservativeResize(v0_.rows(), k + 1);
      v0_.col(k).setZero();
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(k + 1);
      row(k) = 1.0;
      append_v_row(row);
      u_ = basis * svd.matrixU();
      s_ = svd.singularValues();
      w_ = svd.matrixV();
      if (s_(k) <= tol_ * s_(0)) {
        u_.conservativeResize(m_, k);
        s_.conservativeResize(k);
        w_.conservativeResize(k + 1, k);
        materialize();
      }
    } else {
      u_ = (basis * svd.matrixU()).leftCols(k);
      s_ = svd.singularValues().head(k);
      const Eigen::MatrixXd wn = w_ * svd.matrixV().topLeftCorner(k, k);
      const Eigen::RowVectorXd tail = svd.matrixV().block(k, 0, 1, k);
      w_ = wn;
      append_v_row(wn.transpose().partialPivLu().solve(tail.transpose()).transpose());
    }
  } else {
    Eigen::MatrixXd kmat(k, k + 1);
    kmat.leftCols(k) = s_.asDiagonal();
    kmat.col(k) = p;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(kmat, Eigen::ComputeFullU | Eigen::ComputeFullV);
    u_ = u_ * svd.matrixU();
    s_ = svd.singularValues();
    const Eigen::MatrixXd wn = w_ * svd.matrixV().topLeftCorner(k, k);
    const Eigen::RowVectorXd tail = svd.matrixV().block(k, 0, 1, k);
    w_ = wn;
    append_v_row(wn.transpose().partialPivLu().solve(tail.transpose()).transpose());
  }

  if (++since_refresh_ >= kRefreshInterval) {
    since_refresh_ = 0;
    // Re-orthogonalize both factors: U S V^T = Qu (Ru S Rv^T) Qv^T.
    materialize();
    const Eigen::Index r = s_.size();
    Eigen::HouseholderQR<Eigen::MatrixXd> qu(u_);
    Eigen::HouseholderQR<Eigen::MatrixXd> qv(v0_.topRows(n_));
    const Eigen::MatrixXd ru = qu.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd rv = qv.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Eigen::MatrixXd> core(ru * s_.asDiagonal() * rv.transpose(),
                                           Eigen::ComputeFullU | Eigen::ComputeFullV);
    u_ = (qu.householderQ() * Eigen::MatrixXd::Identity(m_, r)) * core.matrixU();
    v0_.topRows(n_) = (qv.householderQ() * Eigen::MatrixXd::Identity(n_, r)) * core.matrixV();
    s_ = core.singularValues();
  }
}

FactoredModel IncrementalSvd::to_factored_model(const MeasurementMatrix& source) const {
  if (source.Y.cols() != n_ || source.Y.rows() != m_)
    fail(ErrorCode::DimensionMismatch, "source matrix does not match the streamed columns");
  FactoredModel m;
  m.U = u_;
  m.singular_values = s_;
  m.V = V();
  m.rank = rank();
  m.kind = source.kind;
  m.landmark_ids = source.landmark_ids;
  m.col_times = source.col_times;
  m.velocities = source.velocities;
  m.col_indices = source.col_indices;
  return m;
}

FactoredModel online_factorize(const MeasurementMatrix& y, int rank, int oversample) {
  if (rank < 1 || oversample < 0) fail(ErrorCode::InvalidConfig, "rank must be positive and oversample non-negative");
  const int tracked = static_cast<int>(std::min<Eigen::Index>(y.Y.rows(), rank + oversample));
  IncrementalSvd inc(y.Y.rows(), tracked);
  for (Eigen::Index c = 0; c < y.Y.cols(); ++c) inc.update(y.Y.col(c));
  FactoredModel m = inc.to_factored_model(y);
  if (m.rank > rank) {
    m.U.conservativeResize(Eigen::NoChange, rank);
    m.V.conservativeResize(Eigen::NoChange, rank);
    m.singular_values.conservativeResize(rank);
    m.rank = rank;
  }
  return m;
}

}  // namespace spectral_slam
