#include "spectral_slam/dynamics.hpp"

#include <cmath>
#include <sstream>

namespace spectral_slam {

ControlVector ControlVector::from_odometry(double v, double omega) { return {v, std::cos(omega), std::sin(omega)}; }

namespace {

int pair_index(int i, int j, int n) {
  if (i > j) std::swap(i, j);
  if (i < 0 || j >= n) fail(ErrorCode::InvalidConfig, "pair index out of range");
  return i * n - i * (i - 1) / 2 + (j - i);
}

}  // namespace

int state_pair_index(int i, int j) { return pair_index(i, j, 7); }
int control_pair_index(int k, int l) { return pair_index(k, l, 4); }
int feature_index(int i, int j, int k, int l) { return state_pair_index(i, j) * kControlPairs + control_pair_index(k, l); }

Eigen::VectorXd feature_map(const State7& s, const ControlVector& a) {
  const Eigen::Vector4d ab = a.augmented();
  Eigen::Matrix<double, kControlPairs, 1> cp;
  int c = 0;
  for (int k = 0; k < 4; ++k)
    for (int l = k; l < 4; ++l) cp(c++) = ab(k) * ab(l);
  Eigen::VectorXd phi(kFeatures);
  int f = 0;
  for (int i = 0; i < 7; ++i)
    for (int j = i; j < 7; ++j) {
      phi.segment<kControlPairs>(f) = s(i) * s(j) * cp;
      f += kControlPairs;
    }
  return phi;
}

Eigen::MatrixXd feature_jacobian(const State7& s, const ControlVector& a) {
  const Eigen::Vector4d ab = a.augmented();
  Eigen::Matrix<double, kControlPairs, 1> cp;
  int c = 0;
  for (int k = 0; k < 4; ++k)
    for (int l = k; l < 4; ++l) cp(c++) = ab(k) * ab(l);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(kFeatures, 7);
  int f = 0;
  for (int i = 0; i < 7; ++i)
    for (int j = i; j < 7; ++j) {
      d.block<kControlPairs, 1>(f, i) += s(j) * cp;
      d.block<kControlPairs, 1>(f, j) += s(i) * cp;
      f += kControlPairs;
    }
  return d;
}

State7 nominal_dynamics(const State7& s, const ControlVector& a) {
  // s = [1, -x, -y, q, -cos(theta), -sin(theta), h]
  const double v = a.v, cw = a.cos_omega, sw = a.sin_omega;
  State7 n;
  n(0) = s(0) * s(0);
  n(1) = s(0) * s(1) + v * s(0) * s(4);
  n(2) = s(0) * s(2) + v * s(0) * s(5);
  n(3) = s(0) * s(3) + v * (s(1) * s(4) + s(2) * s(5)) + 0.5 * v * v * s(0) * s(0);
  n(4) = cw * s(0) * s(4) - sw * s(0) * s(5);
  n(5) = cw * s(0) * s(5) + sw * s(0) * s(4);
  n(6) = cw * (s(1) * s(4) + s(2) * s(5)) + sw * (s(2) * s(4) - s(1) * s(5)) + v * cw * s(0) * s(0) +
         0.5 * v * s(0) * s(0);
  return n;
}

Eigen::MatrixXd nominal_model() {
  // Indices: state 0..6, augmented control 0..3 = [1, v, cos w, sin w].
  Eigen::MatrixXd n = Eigen::MatrixXd::Zero(7, kFeatures);
  n(0, feature_index(0, 0, 0, 0)) = 1.0;
  n(1, feature_index(0, 1, 0, 0)) = 1.0;
  n(1, feature_index(0, 4, 0, 1)) = 1.0;
  n(2, feature_index(0, 2, 0, 0)) = 1.0;
  n(2, feature_index(0, 5, 0, 1)) = 1.0;
  n(3, feature_index(0, 3, 0, 0)) = 1.0;
  n(3, feature_index(1, 4, 0, 1)) = 1.0;
  n(3, feature_index(2, 5, 0, 1)) = 1.0;
  n(3, feature_index(0, 0, 1, 1)) = 0.5;
  n(4, feature_index(0, 4, 0, 2)) = 1.0;
  n(4, feature_index(0, 5, 0, 3)) = -1.0;
  n(5, feature_index(0, 5, 0, 2)) = 1.0;
  n(5, feature_index(0, 4, 0, 3)) = 1.0;
  n(6, feature_index(1, 4, 0, 2)) = 1.0;
  n(6, feature_index(2, 5, 0, 2)) = 1.0;
  n(6, feature_index(2, 4, 0, 3)) = 1.0;
  n(6, feature_index(1, 5, 0, 3)) = -1.0;
  n(6, feature_index(0, 0, 1, 2)) = 1.0;
  n(6, feature_index(0, 0, 0, 1)) = 0.5;
  return n;
}

Eigen::MatrixXd lift_state_transform(const Matrix7& S) {
  Eigen::Matrix<double, kStatePairs, kStatePairs> s2;
  for (int i = 0; i < 7; ++i)
    for (int j = i; j < 7; ++j)
      for (int p = 0; p < 7; ++p)
        for (int q = p; q < 7; ++q) {
          const double v = p == q ? S(i, p) * S(j, p) : S(i, p) * S(j, q) + S(i, q) * S(j, p);
          s2(state_pair_index(i, j), state_pair_index(p, q)) = v;
        }
  Eigen::MatrixXd lift = Eigen::MatrixXd::Zero(kFeatures, kFeatures);
  for (int r = 0; r < kStatePairs; ++r)
    for (int c = 0; c < kStatePairs; ++c)
      if (s2(r, c) != 0.0)
        lift.block<kControlPairs, kControlPairs>(r * kControlPairs, c * kControlPairs).diagonal().setConstant(s2(r, c));
  return lift;
}

void lag_speed_term(Eigen::MatrixXd& states, const std::vector<double>& v_out, const std::vector<double>& v_in) {
  const auto n = static_cast<std::size_t>(states.cols());
  if (states.rows() != 7 || v_out.size() != n || v_in.size() != n)
    fail(ErrorCode::DimensionMismatch, "one outgoing and one incoming speed per state column");
  for (std::size_t k = 0; k < n; ++k) states(6, static_cast<Eigen::Index>(k)) += 0.5 * (v_in[k] - v_out[k]);
}

DynamicsModel learn_dynamics(const Eigen::MatrixXd& states, const std::vector<ControlVector>& controls,
                             const LearnOptions& options) {
  if (states.rows() != 7) fail(ErrorCode::DimensionMismatch, "states must have 7 rows");
  if (states.cols() < 2 || static_cast<Eigen::Index>(controls.size()) != states.cols() - 1)
    fail(ErrorCode::DimensionMismatch, "need T >= 2 states and T - 1 controls");
  const Eigen::Index m = states.cols() - 1;

  Eigen::MatrixXd phi(m, kFeatures);
  for (Eigen::Index t = 0; t < m; ++t)
    phi.row(t) = feature_map(states.col(t), controls[static_cast<std::size_t>(t)]).transpose();
  const Eigen::MatrixXd target = states.rightCols(m).transpose();

  Eigen::VectorXd scale(kFeatures);
  for (int f = 0; f < kFeatures; ++f) {
    const double rms = std::sqrt(phi.col(f).squaredNorm() / static_cast<double>(m));
    scale(f) = rms > 0.0 ? rms : 1.0;
  }
  const Eigen::MatrixXd phis = phi * scale.cwiseInverse().asDiagonal();

  DynamicsModel model;
  model.frame = options.frame;
  Eigen::MatrixXd w;
  if (options.ridge > 0.0) {
    Eigen::MatrixXd gram = phis.transpose() * phis;
    const double lambda = options.ridge * gram.trace() / kFeatures;
    gram.diagonal().array() += lambda;
    w = gram.ldlt().solve(phis.transpose() * target);
    model.effective_rank = kFeatures;
  } else {
    // The data manifold (s0 = 1, unit heading, q = |p|^2 / 2) makes features collinear; an SVD
    // separates those directions more cleanly than pivoted QR once the state is mixed.
    Eigen::BDCSVD<Eigen::MatrixXd> svd(phis, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(options.rank_tolerance);
    model.effective_rank = svd.rank();
    if (m < kFeatures) {
      std::ostringstream msg;
      msg << m << " samples for " << kFeatures << " features (effective rank " << svd.rank()
          << "); enable ridge or supply more data";
      fail(ErrorCode::RankDeficientFeatures, msg.str());
    }
    w = svd.solve(target);
  }
  model.N = (scale.cwiseInverse().asDiagonal() * w).transpose();
  return model;
}

DynamicsModel interpretable_model(const DynamicsModel& latent, const Matrix7& S) {
  DynamicsModel out;
  out.N = S.partialPivLu().solve(latent.N * lift_state_transform(S));
  out.frame = DynamicsFrame::Physical;
  out.effective_rank = latent.effective_rank;
  return out;
}

Belief ekf_predict(const Belief& belief, const ControlVector& a, const DynamicsModel& model,
                   const Matrix7& process_noise) {
  const Matrix7 j = model.jacobian(belief.mean, a);
  Belief out;
  out.mean = model.predict(belief.mean, a);
  out.covariance = j * belief.covariance * j.transpose() + process_noise;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

Belief ekf_update(const Belief& belief, const Eigen::VectorXd& observation, const Eigen::MatrixXd& C,
                  const Eigen::MatrixXd& R) {
  const Eigen::Index m = observation.size();
  if (C.rows() != m || C.cols() != 7 || R.rows() != m || R.cols() != m)
    fail(ErrorCode::DimensionMismatch, "observation, C and R disagree in size");
  const Eigen::MatrixXd s = C * belief.covariance * C.transpose() + R;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-15)
    fail(ErrorCode::SingularInnovationCovariance, "innovation covariance is not positive definite");
  const Eigen::MatrixXd k = ldlt.solve(C * belief.covariance).transpose();  // 7 x m
  Belief out;
  out.mean = belief.mean + k * (observation - C * belief.mean);
  const Matrix7 ikc = Matrix7::Identity() - k * C;
  out.covariance = ikc * belief.covariance * ikc.transpose() + k * R * k.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

Eigen::MatrixXd observation_matrix7(const std::vector<Landmark>& landmarks) {
  const auto n = static_cast<Eigen::Index>(landmarks.size());
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2 * n, 7);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Landmark& l = landmarks[static_cast<std::size_t>(i)];
    c.row(i).head(4) = landmark_to_row(l).transpose();
    c(n + i, 4) = l.x;
    c(n + i, 5) = l.y;
    c(n + i, 6) = 1.0;
  }
  return c;
}

}  // namespace spectral_slam
