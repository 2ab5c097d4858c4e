#pragma once

#include <array>
#include <vector>

#include "spectral_slam/spectral.hpp"

namespace spectral_slam {

// Internally the upgrade works in the permuted convention where a landmark row
// is [1, mx, my, (mx^2+my^2)/2] and a state column is [(x^2+y^2)/2, -x, -y, 1].
// Results are converted back to the canonical order before returning.

struct UpgradeTolerances {
  double constant_residual = 0.05;  // step i: relative residual of U a = 1
  double degenerate_axis = 1e-10;   // step iv: |l'_j| of the eliminated axis
  double sigma9_min = 1e-6;         // nonsingularity: sigma_9 / sigma_1
  double sigma10_max = 1e-8;        // nonsingularity: sigma_10 / sigma_1
  double nullspace_gap = 10.0;      // 7 -> 4 reduction: sigma_4 / sigma_5
};

struct NonsingularityReport {
  int rank_estimate = 0;
  double sigma9_over_sigma1 = 0.0;
  double sigma10_over_sigma1 = 0.0;
  bool ok = false;
};

// Rows are 4-coordinate points; the 10 second-order monomials c_j c_k (j <= k)
// are formed after scaling each coordinate to unit RMS, which leaves the rank unchanged.
NonsingularityReport check_nonsingular(const Eigen::MatrixXd& points, const UpgradeTolerances& tol = {});

NullspaceReduction reduce_7_to_4(const Eigen::MatrixXd& U, const UpgradeTolerances& tol = {});

struct StepOne {
  Eigen::MatrixXd R;   // N x 3
  Eigen::Matrix4d T1;  // (a Q)
  Eigen::Vector4d a;
  double residual = 0.0;
};
StepOne step_i_normalize_first_coordinate(const Eigen::MatrixXd& U, const UpgradeTolerances& tol = {});

struct QuadricFit {
  Eigen::Matrix3d H;  // 0 = r^T H r / 2 + ell^T r + b00
  Eigen::Vector3d ell;
  double b00 = 0.0;
  double residual = 0.0;  // smallest singular value of the monomial matrix
  Eigen::Matrix<double, 10, 1> b;  // b00 b01 b02 b03 b11 b12 b13 b22 b23 b33

  double evaluate(const Eigen::Vector3d& r) const { return 0.5 * r.dot(H * r) + ell.dot(r) + b00; }
};
// The sign of b is fixed so that trace(H) >= 0.
QuadricFit step_ii_fit_quadric(const Eigen::MatrixXd& R);

struct StepThree {
  Eigen::MatrixXd R;    // R M
  Eigen::Vector3d ell;  // M^T ell
  Eigen::Vector3d h;    // diagonal of H', ascending
  Eigen::Matrix3d M;
  Eigen::Matrix4d T2;
};
StepThree step_iii_diagonalize(const QuadricFit& fit, const Eigen::MatrixXd& R);

struct StepFourFive {
  Eigen::MatrixXd U;  // N x 4: [~1, r_a, r_b, r_j] with r_j = (r_a^2 + r_b^2) / 2
  Eigen::Matrix4d T3;
  int eliminated_axis = 0;
  double max_row_residual = 0.0;
};
// `u2` is U T1 T2 (first column close to 1). The axis with the smallest
// |H'_jj| is eliminated, lowest index first on ties.
StepFourFive step_iv_v_explicit_and_normalize(const Eigen::MatrixXd& u2, const Eigen::Vector3d& h,
                                              const Eigen::Vector3d& ell, double b00,
                                              const UpgradeTolerances& tol = {});

struct StepSix {
  Eigen::MatrixXd C;  // canonical order
  Eigen::MatrixXd X;  // canonical order
  Eigen::Matrix4d T4;
  double mu = 0.0;
  bool sign_flipped = false;
};
StepSix step_vi_scale_mu(const Eigen::MatrixXd& u_prime, const Eigen::MatrixXd& v_prime);

struct UpgradeDiagnostics {
  std::array<Eigen::Matrix4d, 4> T;
  std::array<double, 4> product_deviation{};  // ||U_k V_k - U V|| / ||U V|| after each step
  NonsingularityReport landmarks;
  NonsingularityReport states;
  double quadric_residual = 0.0;
  double step_i_residual = 0.0;
  double form_residual = 0.0;
  int eliminated_axis = 0;
  bool sign_flipped = false;
};

struct UpgradeResult {
  SlamSolution solution;
  UpgradeDiagnostics diagnostics;
};

// Runs steps i-vi on an explicit factorization U (N x 4) V (4 x T).
UpgradeResult metric_upgrade_factors(const Eigen::MatrixXd& U, const Eigen::MatrixXd& V,
                                     const UpgradeTolerances& tol = {});

UpgradeResult metric_upgrade(const FactoredModel& model, const UpgradeTolerances& tol = {});

}  // namespace spectral_slam
