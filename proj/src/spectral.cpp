#include "spectral_slam/spectral.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace spectral_slam {

FactoredModel factorize(const MeasurementMatrix& y, int rank) {
  const Eigen::Index max_rank = std::min(y.Y.rows(), y.Y.cols());
  if (rank < 1 || rank > max_rank) {
    std::ostringstream msg;
    msg << "rank " << rank << " not in [1, " << max_rank << "]";
    fail(ErrorCode::InvalidConfig, msg.str());
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(y.Y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (!(s(0) > 0.0)) fail(ErrorCode::DegenerateInput, "measurement matrix is zero");
  if (s(rank - 1) / s(0) < 1e-13) {
    std::ostringstream msg;
    msg << "sigma_" << rank << "/sigma_1 = " << s(rank - 1) / s(0) << " below 1e-13";
    fail(ErrorCode::DegenerateInput, msg.str());
  }

  FactoredModel m;
  m.U = svd.matrixU().leftCols(rank);
  m.singular_values = s.head(rank);
  m.V = svd.matrixV().leftCols(rank);
  m.rank = rank;
  m.kind = y.kind;
  m.landmark_ids = y.landmark_ids;
  m.col_times = y.col_times;
  m.velocities = y.velocities;
  m.col_indices = y.col_indices;
  return m;
}

namespace detail {

NullspaceReduction reduce_top_block(const Eigen::MatrixXd& top, ErrorCode code, double min_gap) {
  if (top.cols() != 7) fail(ErrorCode::DimensionMismatch, "expected a 7-column basis");
  if (top.rows() < 4) fail(code, "at least 4 landmarks are required");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(top, Eigen::ComputeFullV);
  const Eigen::VectorXd s = svd.singularValues();
  // With exactly four rows sigma_5 is structurally zero.
  const double s5 = s.size() > 4 ? s(4) : 0.0;
  if (!(s(3) > min_gap * s5) || !(s(3) > 0.0)) {
    std::ostringstream msg;
    msg << "no clear 3-dimensional nullspace (sigma_4/sigma_5 = " << (s5 > 0 ? s(3) / s5 : 0.0) << ")";
    fail(code, msg.str());
  }
  NullspaceReduction r;
  r.restriction = svd.matrixV().leftCols(4);
  r.basis = top * r.restriction;
  r.singular_values = s;
  return r;
}

}  // namespace detail

NullspaceReduction eliminate_nullspace(const FactoredModel& model, Eigen::Index n_landmarks) {
  if (model.rank != 7 || model.U.cols() != 7) fail(ErrorCode::DimensionMismatch, "rank-7 model required");
  if (n_landmarks < 4) fail(ErrorCode::SingularLandmarks, "at least 4 landmarks are required");
  return detail::reduce_top_block(model.U.topRows(n_landmarks), ErrorCode::SingularLandmarks, 10.0);
}

std::vector<double> recover_headings(const Eigen::MatrixXd& positions) {
  const auto t = static_cast<std::size_t>(positions.rows());
  std::vector<double> theta(t, 0.0);
  if (t < 2) return theta;
  std::vector<bool> valid(t, false);
  for (std::size_t k = 0; k + 1 < t; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double dx = positions(i + 1, 0) - positions(i, 0);
    const double dy = positions(i + 1, 1) - positions(i, 1);
    if (dx != 0.0 || dy != 0.0) {
      theta[k] = std::atan2(dy, dx);
      valid[k] = true;
    }
  }
  std::size_t first = 0;
  while (first + 1 < t && !valid[first]) ++first;
  for (std::size_t k = 0; k + 1 < t; ++k) {
    if (valid[k]) continue;
    theta[k] = k < first ? theta[first] : theta[k - 1];
  }
  theta[t - 1] = theta[t - 2];
  return theta;
}

Eigen::MatrixXd decode_positions(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd p(X.cols(), 2);
  p.col(0) = -X.row(1).transpose();
  p.col(1) = -X.row(2).transpose();
  return p;
}

std::vector<Landmark> decode_map(const Eigen::MatrixXd& C, const std::vector<int>& ids) {
  std::vector<Landmark> map;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    map.push_back({ids[i], C(r, 1), C(r, 2)});
  }
  return map;
}

std::vector<Pose> assemble_trajectory(const Eigen::MatrixXd& positions) {
  const auto headings = recover_headings(positions);
  std::vector<Pose> out;
  out.reserve(headings.size());
  for (Eigen::Index k = 0; k < positions.rows(); ++k)
    out.push_back({positions(k, 0), positions(k, 1), headings[static_cast<std::size_t>(k)]});
  return out;
}

Eigen::MatrixXd build_state7(const std::vector<Pose>& trajectory, const std::vector<double>& velocities) {
  if (trajectory.size() != velocities.size()) fail(ErrorCode::LengthMismatch, "one velocity per pose required");
  Eigen::MatrixXd x(7, static_cast<Eigen::Index>(trajectory.size()));
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    const Pose& p = trajectory[k];
    const double c = std::cos(p.theta), s = std::sin(p.theta);
    x.col(static_cast<Eigen::Index>(k)) << 1.0, -p.x, -p.y, 0.5 * (p.x * p.x + p.y * p.y), -c, -s,
        p.x * c + p.y * s + 0.5 * velocities[k];
  }
  return x;
}

namespace {

struct AnchorSystem {
  Eigen::MatrixXd rows;     // anchor rows of the basis
  Eigen::MatrixXd targets;  // their canonical landmark rows
};

AnchorSystem gather_anchors(const Eigen::MatrixXd& basis, const std::vector<int>& ids,
                            const std::vector<Landmark>& anchors) {
  std::map<int, Eigen::Index> row_of;
  for (std::size_t i = 0; i < ids.size(); ++i) row_of[ids[i]] = static_cast<Eigen::Index>(i);
  AnchorSystem sys;
  std::vector<std::pair<Eigen::Index, Landmark>> used;
  for (const auto& a : anchors) {
    auto it = row_of.find(a.id);
    if (it != row_of.end()) used.emplace_back(it->second, a);
  }
  if (used.size() < 4) {
    std::ostringstream msg;
    msg << used.size() << " usable anchors, need at least 4";
    fail(ErrorCode::TooFewAnchors, msg.str());
  }
  sys.rows.resize(static_cast<Eigen::Index>(used.size()), basis.cols());
  sys.targets.resize(static_cast<Eigen::Index>(used.size()), 4);
  for (std::size_t k = 0; k < used.size(); ++k) {
    sys.rows.row(static_cast<Eigen::Index>(k)) = basis.row(used[k].first);
    sys.targets.row(static_cast<Eigen::Index>(k)) = landmark_to_row(used[k].second).transpose();
  }
  return sys;
}

Eigen::MatrixXd solve_alignment(const AnchorSystem& sys, double max_condition) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.rows, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cond = s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
  if (!(cond < max_condition)) {
    std::ostringstream msg;
    msg << "anchor rows have condition number " << cond;
    fail(ErrorCode::IllConditionedAnchors, msg.str());
  }
  return svd.solve(sys.targets);
}

}  // namespace

SlamSolution align_with_anchors(const FactoredModel& model, const std::vector<Landmark>& anchors,
                                const AlignmentOptions& options) {
  if (anchors.size() < 4) fail(ErrorCode::TooFewAnchors, "at least 4 anchors are required");
  const Eigen::MatrixXd latent = model.singular_values.asDiagonal() * model.V.transpose();
  const Eigen::Index n = model.n_landmarks();

  SlamSolution sol;
  sol.frame = Frame::Anchored;
  sol.times = model.col_times;
  sol.col_indices = model.col_indices;

  if (model.kind == MatrixKind::Rank4) {
    if (model.rank != 4) fail(ErrorCode::DimensionMismatch, "rank-4 matrix needs a rank-4 model");
    const AnchorSystem sys = gather_anchors(model.U, model.landmark_ids, anchors);
    const Eigen::Matrix4d s = solve_alignment(sys, options.max_condition);
    sol.C = model.U * s;
    sol.X = s.partialPivLu().solve(latent);
    sol.S = s;
    sol.map = decode_map(sol.C, model.landmark_ids);
    sol.trajectory = assemble_trajectory(decode_positions(sol.X));
    return sol;
  }

  const NullspaceReduction red = eliminate_nullspace(model, n);
  const AnchorSystem sys = gather_anchors(red.basis, model.landmark_ids, anchors);
  const Eigen::Matrix4d w = solve_alignment(sys, options.max_condition);
  const Eigen::MatrixXd c4 = red.basis * w;
  const Eigen::MatrixXd x4 = w.partialPivLu().solve(red.restriction.transpose() * latent);

  sol.map = decode_map(c4, model.landmark_ids);
  sol.trajectory = assemble_trajectory(decode_positions(x4));
  Eigen::MatrixXd x7 = build_state7(sol.trajectory, model.velocities);
  // latent ~= S7 * x7, least squares over all columns. The 7x7 normal
  // equations are much cheaper than a tall QR here; rows are scaled first.
  const Eigen::VectorXd rs = x7.rowwise().norm().cwiseMax(1e-300).cwiseInverse();
  const Eigen::MatrixXd xs = rs.asDiagonal() * x7;
  const Eigen::MatrixXd gram = xs * xs.transpose();
  const Eigen::MatrixXd s7 =
      (gram.ldlt().solve(xs * latent.transpose())).transpose() * rs.asDiagonal();
  sol.C = model.U * s7;
  sol.X = std::move(x7);
  sol.S = s7;
  return sol;
}

}  // namespace spectral_slam
