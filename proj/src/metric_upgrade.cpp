#include "spectral_slam/metric_upgrade.hpp"

#include <cmath>
#include <sstream>

namespace spectral_slam {

namespace detail {
NullspaceReduction reduce_top_block(const Eigen::MatrixXd& top, ErrorCode code, double min_gap);
}

namespace {

Eigen::MatrixXd second_order_monomials(const Eigen::MatrixXd& p) {
  Eigen::MatrixXd m(p.rows(), 10);
  int col = 0;
  for (int j = 0; j < 4; ++j)
    for (int k = j; k < 4; ++k) m.col(col++) = p.col(j).cwiseProduct(p.col(k));
  return m;
}

double relative_deviation(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v, const Eigen::MatrixXd& ref) {
  return (u * v - ref).norm() / ref.norm();
}

// Swaps coordinates 0 and 3, converting between the internal and canonical orders.
Eigen::Matrix4d swap_first_last() {
  Eigen::Matrix4d p = Eigen::Matrix4d::Zero();
  p(0, 3) = p(3, 0) = p(1, 1) = p(2, 2) = 1.0;
  return p;
}

}  // namespace

NonsingularityReport check_nonsingular(const Eigen::MatrixXd& points, const UpgradeTolerances& tol) {
  if (points.cols() != 4) fail(ErrorCode::DimensionMismatch, "points must have 4 coordinates");
  if (points.rows() < 9) fail(ErrorCode::TooFewPoints, "at least 9 points are required");
  Eigen::MatrixXd scaled = points;
  for (Eigen::Index j = 0; j < 4; ++j) {
    const double rms = std::sqrt(scaled.col(j).squaredNorm() / static_cast<double>(scaled.rows()));
    if (rms > 0.0) scaled.col(j) /= rms;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(second_order_monomials(scaled));
  Eigen::VectorXd s = Eigen::VectorXd::Zero(10);
  s.head(svd.singularValues().size()) = svd.singularValues();

  NonsingularityReport r;
  if (!(s(0) > 0.0)) return r;
  r.sigma9_over_sigma1 = s(8) / s(0);
  r.sigma10_over_sigma1 = s(9) / s(0);
  for (int i = 0; i < 10; ++i)
    if (s(i) / s(0) > tol.sigma10_max) ++r.rank_estimate;
  r.ok = r.rank_estimate == 9 && r.sigma9_over_sigma1 > tol.sigma9_min;
  return r;
}

NullspaceReduction reduce_7_to_4(const Eigen::MatrixXd& U, const UpgradeTolerances& tol) {
  return detail::reduce_top_block(U, ErrorCode::NoNullspace, tol.nullspace_gap);
}

StepOne step_i_normalize_first_coordinate(const Eigen::MatrixXd& U, const UpgradeTolerances& tol) {
  if (U.cols() != 4) fail(ErrorCode::DimensionMismatch, "U must have 4 columns");
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(U.rows());
  StepOne out;
  out.a = U.completeOrthogonalDecomposition().solve(ones);
  out.residual = (U * out.a - ones).norm() / ones.norm();
  if (!(out.residual <= tol.constant_residual)) {
    std::ostringstream msg;
    msg << "relative residual of U a = 1 is " << out.residual;
    fail(ErrorCode::NoConstantDirection, msg.str());
  }
  Eigen::HouseholderQR<Eigen::Vector4d> qr(out.a);
  const Eigen::Matrix4d full = qr.householderQ();
  const Eigen::Matrix<double, 4, 3> q = full.rightCols(3);
  out.T1.col(0) = out.a;
  out.T1.rightCols(3) = q;
  out.R = U * q;
  return out;
}

QuadricFit step_ii_fit_quadric(const Eigen::MatrixXd& R) {
  if (R.cols() != 3) fail(ErrorCode::DimensionMismatch, "R must have 3 columns");
  if (R.rows() < 9) fail(ErrorCode::TooFewPoints, "at least 9 rows are required");
  Eigen::MatrixXd p(R.rows(), 4);
  p.col(0).setOnes();
  p.rightCols(3) = R;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(second_order_monomials(p), Eigen::ComputeFullV);

  QuadricFit fit;
  fit.b = svd.matrixV().col(9);
  const auto& sv = svd.singularValues();
  fit.residual = sv.size() == 10 ? sv(9) : 0.0;
  const auto& b = fit.b;
  fit.H << 2 * b(4), b(5), b(6),
           b(5), 2 * b(7), b(8),
           b(6), b(8), 2 * b(9);
  if (fit.H.trace() < 0.0) {
    fit.b = -fit.b;
    fit.H = -fit.H;
  }
  fit.ell = fit.b.segment<3>(1);
  fit.b00 = fit.b(0);
  return fit;
}

StepThree step_iii_diagonalize(const QuadricFit& fit, const Eigen::MatrixXd& R) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(fit.H);
  StepThree out;
  out.M = es.eigenvectors();
  // Deterministic signs: the largest-magnitude entry of each column is positive.
  for (int c = 0; c < 3; ++c) {
    Eigen::Index i = 0;
    out.M.col(c).cwiseAbs().maxCoeff(&i);
    if (out.M(i, c) < 0.0) out.M.col(c) = -out.M.col(c);
  }
  out.h = es.eigenvalues();
  out.R = R * out.M;
  out.ell = out.M.transpose() * fit.ell;
  out.T2.setIdentity();
  out.T2.bottomRightCorner(3, 3) = out.M;
  return out;
}

StepFourFive step_iv_v_explicit_and_normalize(const Eigen::MatrixXd& u2, const Eigen::Vector3d& h,
                                              const Eigen::Vector3d& ell, double b00,
                                              const UpgradeTolerances& tol) {
  if (u2.cols() != 4) fail(ErrorCode::DimensionMismatch, "expected 4 columns");
  int j = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(h(i)) < std::abs(h(j))) j = i;
  int a = -1, b = -1;
  for (int i = 0; i < 3; ++i) {
    if (i == j) continue;
    (a < 0 ? a : b) = i;
  }
  const double lj = ell(j);
  if (!(std::abs(lj) > tol.degenerate_axis)) {
    std::ostringstream msg;
    msg << "linear coefficient of axis " << j << " is " << lj;
    fail(ErrorCode::DegenerateAxis, msg.str());
  }
  const double hmax = h.cwiseAbs().maxCoeff();
  if (!(std::abs(h(a)) > 1e-12 * hmax) || !(std::abs(h(b)) > 1e-12 * hmax))
    fail(ErrorCode::DegenerateAxis, "quadric has fewer than two curved axes");

  // Completing the square: r_j + c_j = (k_a (r_a + c_a)^2 + k_b (r_b + c_b)^2) / 2.
  const double ca = ell(a) / h(a);
  const double cb = ell(b) / h(b);
  const double cj = (b00 - 0.5 * ell(a) * ell(a) / h(a) - 0.5 * ell(b) * ell(b) / h(b)) / lj;
  const double ka = -h(a) / lj;
  const double kb = -h(b) / lj;
  const double sigma = ka < 0.0 ? -1.0 : 1.0;
  const double sa = std::sqrt(std::abs(ka));
  const double sb = std::sqrt(std::abs(kb));

  StepFourFive out;
  out.T3.setZero();
  out.T3(0, 0) = 1.0;
  out.T3(0, 1) = sa * ca;
  out.T3(1 + a, 1) = sa;
  out.T3(0, 2) = sb * cb;
  out.T3(1 + b, 2) = sb;
  out.T3(0, 3) = sigma * cj;
  out.T3(1 + j, 3) = sigma;
  out.eliminated_axis = j;
  out.U = u2 * out.T3;
  const Eigen::ArrayXd form =
      out.U.col(3).array() - 0.5 * (out.U.col(1).array().square() + out.U.col(2).array().square());
  out.max_row_residual = form.abs().maxCoeff();
  return out;
}

StepSix step_vi_scale_mu(const Eigen::MatrixXd& u_prime, const Eigen::MatrixXd& v_prime) {
  if (u_prime.cols() != 4 || v_prime.rows() != 4) fail(ErrorCode::DimensionMismatch, "expected rank-4 factors");
  Eigen::MatrixXd u = u_prime;
  Eigen::MatrixXd v = v_prime;
  StepSix out;
  double mean = v.row(3).mean();
  if (!(mean > 0.0)) {
    u.col(3) = -u.col(3);
    v.row(3) = -v.row(3);
    mean = v.row(3).mean();
    out.sign_flipped = true;
    if (!(mean > 0.0)) fail(ErrorCode::NegativeScale, "mean of the scale row is not positive");
  }
  out.mu = std::sqrt(mean);
  out.T4 = Eigen::Vector4d(1.0, out.mu, out.mu, out.mu * out.mu).asDiagonal();
  const Eigen::Matrix4d p = swap_first_last();
  out.C = u * out.T4 * p;
  out.X = p * out.T4.inverse() * v;
  return out;
}

UpgradeResult metric_upgrade_factors(const Eigen::MatrixXd& U, const Eigen::MatrixXd& V,
                                     const UpgradeTolerances& tol) {
  if (U.cols() != 4 || V.rows() != 4) fail(ErrorCode::DimensionMismatch, "expected rank-4 factors");
  if (U.rows() < 9 || V.cols() < 9) {
    std::ostringstream msg;
    msg << "need at least 9 landmarks and 9 time steps, have " << U.rows() << " and " << V.cols();
    fail(ErrorCode::SingularConfiguration, msg.str());
  }
  UpgradeResult res;
  auto& diag = res.diagnostics;
  diag.landmarks = check_nonsingular(U, tol);
  diag.states = check_nonsingular(V.transpose(), tol);
  // Noise lifts sigma_10 off zero, so only the lower rank bound is enforced here.
  if (!(diag.landmarks.sigma9_over_sigma1 > tol.sigma9_min) || !(diag.states.sigma9_over_sigma1 > tol.sigma9_min))
    fail(ErrorCode::SingularConfiguration, "landmarks or states lie on a common quadric");

  const Eigen::MatrixXd product = U * V;

  // Step i, followed by centring and scaling R (another linear change of the
  // homogeneous coordinates) so the quadric fit is well conditioned.
  const StepOne s1 = step_i_normalize_first_coordinate(U, tol);
  Eigen::MatrixXd u1 = U * s1.T1;
  Eigen::Matrix4d cond = Eigen::Matrix4d::Identity();
  for (int c = 1; c < 4; ++c) {
    const double mean = u1.col(c).mean();
    const double rms = std::sqrt((u1.col(c).array() - mean).square().mean());
    const double scale = rms > 0.0 ? rms : 1.0;
    cond(0, c) = -mean / scale;
    cond(c, c) = 1.0 / scale;
  }
  diag.T[0] = s1.T1 * cond;
  diag.step_i_residual = s1.residual;
  u1 = U * diag.T[0];
  Eigen::MatrixXd v1 = diag.T[0].partialPivLu().solve(V);
  diag.product_deviation[0] = relative_deviation(u1, v1, product);

  const QuadricFit fit = step_ii_fit_quadric(u1.rightCols(3));
  diag.quadric_residual = fit.residual;
  const StepThree s3 = step_iii_diagonalize(fit, u1.rightCols(3));
  diag.T[1] = s3.T2;
  const Eigen::MatrixXd u2 = u1 * s3.T2;
  const Eigen::MatrixXd v2 = s3.T2.transpose() * v1;  // T2 is orthogonal
  diag.product_deviation[1] = relative_deviation(u2, v2, product);

  const StepFourFive s45 = step_iv_v_explicit_and_normalize(u2, s3.h, s3.ell, fit.b00, tol);
  diag.T[2] = s45.T3;
  diag.eliminated_axis = s45.eliminated_axis;
  const Eigen::MatrixXd v3 = s45.T3.partialPivLu().solve(v2);
  diag.product_deviation[2] = relative_deviation(s45.U, v3, product);

  const StepSix s6 = step_vi_scale_mu(s45.U, v3);
  diag.T[3] = s6.T4;
  diag.sign_flipped = s6.sign_flipped;
  diag.product_deviation[3] = relative_deviation(s6.C, s6.X, product);

  const Eigen::ArrayXd c_quad =
      s6.C.col(0).array() - 0.5 * (s6.C.col(1).array().square() + s6.C.col(2).array().square());
  diag.form_residual = std::max({(s6.C.col(3).array() - 1.0).abs().maxCoeff(), c_quad.abs().maxCoeff(),
                                 std::abs(s6.X.row(0).mean() - 1.0)});

  res.solution.C = s6.C;
  res.solution.X = s6.X;
  res.solution.frame = Frame::UpToOrthogonal;
  return res;
}

UpgradeResult metric_upgrade(const FactoredModel& model, const UpgradeTolerances& tol) {
  const Eigen::MatrixXd latent = model.singular_values.asDiagonal() * model.V.transpose();
  Eigen::MatrixXd u, v;
  if (model.kind == MatrixKind::Rank7) {
    if (model.rank != 7) fail(ErrorCode::DimensionMismatch, "rank-7 matrix needs a rank-7 model");
    const Eigen::Index n = model.n_landmarks();
    if (n < 9) fail(ErrorCode::SingularConfiguration, "at least 9 landmarks are required");
    const NullspaceReduction red = reduce_7_to_4(model.U.topRows(n), tol);
    u = red.basis;
    v = red.restriction.transpose() * latent;
  } else {
    if (model.rank != 4) fail(ErrorCode::DimensionMismatch, "rank-4 matrix needs a rank-4 model");
    u = model.U;
    v = latent;
  }
  UpgradeResult res = metric_upgrade_factors(u, v, tol);
  auto& sol = res.solution;
  sol.map = decode_map(sol.C, model.landmark_ids);
  sol.trajectory = assemble_trajectory(decode_positions(sol.X));
  sol.times = model.col_times;
  sol.col_indices = model.col_indices;
  return res;
}

}  // namespace spectral_slam
