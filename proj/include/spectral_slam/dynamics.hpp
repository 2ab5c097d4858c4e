#pragma once

#include <vector>

#include "spectral_slam/core.hpp"

namespace spectral_slam {

using State7 = Eigen::Matrix<double, 7, 1>;
using Matrix7 = Eigen::Matrix<double, 7, 7>;

// a = [v, cos(omega), sin(omega)]; the augmented form prepends a 1.
struct ControlVector {
  double v = 0.0;
  double cos_omega = 1.0;
  double sin_omega = 0.0;

  static ControlVector from_odometry(double v, double omega);
  Eigen::Vector4d augmented() const { return {1.0, v, cos_omega, sin_omega}; }
};

// Features are the distinct monomials s_i s_j abar_k abar_l with i <= j and
// k <= l: 28 state pairs times 10 control pairs.
inline constexpr int kStatePairs = 28;
inline constexpr int kControlPairs = 10;
inline constexpr int kFeatures = kStatePairs * kControlPairs;

int state_pair_index(int i, int j);    // 0-based, order-insensitive
int control_pair_index(int k, int l);  // 0-based, order-insensitive
int feature_index(int i, int j, int k, int l);

Eigen::VectorXd feature_map(const State7& s, const ControlVector& a);
// kFeatures x 7 derivative of feature_map with respect to s.
Eigen::MatrixXd feature_jacobian(const State7& s, const ControlVector& a);

// One unicycle step in state space. The last element assumes the next
// interval repeats the current translation v.
State7 nominal_dynamics(const State7& s, const ControlVector& a);

// The 7 x kFeatures coefficient matrix with nominal_model() * feature_map(s, a) == nominal_dynamics(s, a).
Eigen::MatrixXd nominal_model();

// Linear map L(S) on features with feature_map(S s, a) = L(S) feature_map(s, a).
Eigen::MatrixXd lift_state_transform(const Matrix7& S);

enum class DynamicsFrame { Physical, Latent };

struct DynamicsModel {
  Eigen::MatrixXd N;  // 7 x kFeatures
  DynamicsFrame frame = DynamicsFrame::Physical;
  Eigen::Index effective_rank = 0;

  State7 predict(const State7& s, const ControlVector& a) const { return N * feature_map(s, a); }
  Matrix7 jacobian(const State7& s, const ControlVector& a) const { return N * feature_jacobian(s, a); }
};

struct LearnOptions {
  // Ridge weight relative to the mean squared feature scale; 0 gives plain
  // minimum-norm least squares.
  double ridge = 0.0;
  double rank_tolerance = 1e-10;
  DynamicsFrame frame = DynamicsFrame::Physical;
};

// Heading-augmented columns carry v/2 of the step leaving each pose, while the
// one-step map can only predict the step that led into it. Moves the speed
// term of column k from v_out[k] to v_in[k].
void lag_speed_term(Eigen::MatrixXd& states, const std::vector<double>& v_out, const std::vector<double>& v_in);

// states: 7 x T, controls: T - 1 actions with controls[t] taking state t to t + 1.
DynamicsModel learn_dynamics(const Eigen::MatrixXd& states, const std::vector<ControlVector>& controls,
                             const LearnOptions& options = {});

// Conjugates a model learned on latent states z = S s back to physical
// coordinates: N = S^-1 N_latent L(S).
DynamicsModel interpretable_model(const DynamicsModel& latent, const Matrix7& S);

struct Belief {
  State7 mean = State7::Zero();
  Matrix7 covariance = Matrix7::Zero();
};

Belief ekf_predict(const Belief& belief, const ControlVector& a, const DynamicsModel& model,
                   const Matrix7& process_noise = Matrix7::Zero());

Belief ekf_update(const Belief& belief, const Eigen::VectorXd& observation, const Eigen::MatrixXd& C,
                  const Eigen::MatrixXd& R);

// Observation matrix of the heading-augmented model, 2N x 7.
Eigen::MatrixXd observation_matrix7(const std::vector<Landmark>& landmarks);

}  // namespace spectral_slam
