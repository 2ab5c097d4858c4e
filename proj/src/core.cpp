#include "spectral_slam/core.hpp"

#include <cmath>
#include <sstream>

namespace spectral_slam {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::VelocityTooSmall: return "VelocityTooSmall";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::AllColumnsDropped: return "AllColumnsDropped";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::SingularLandmarks: return "SingularLandmarks";
    case ErrorCode::IllConditionedAnchors: return "IllConditionedAnchors";
    case ErrorCode::TooFewAnchors: return "TooFewAnchors";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::NoNullspace: return "NoNullspace";
    case ErrorCode::NoConstantDirection: return "NoConstantDirection";
    case ErrorCode::DegenerateAxis: return "DegenerateAxis";
    case ErrorCode::NegativeScale: return "NegativeScale";
    case ErrorCode::SingularConfiguration: return "SingularConfiguration";
    case ErrorCode::RankDeficientFeatures: return "RankDeficientFeatures";
    case ErrorCode::SingularInnovationCovariance: return "SingularInnovationCovariance";
    case ErrorCode::NonFiniteCost: return "NonFiniteCost";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_input_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InsufficientData:
    case ErrorCode::TooFewAnchors:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::LengthMismatch:
    case ErrorCode::ParseError:
    case ErrorCode::SchemaError:
    case ErrorCode::IoError:
      return true;
    default:
      return false;
  }
}

namespace {

std::string format_message(ErrorCode code, const std::string& message, std::optional<int> line) {
  std::ostringstream out;
  out << to_string(code);
  if (line) out << " (line " << *line << ")";
  if (!message.empty()) out << ": " << message;
  return out.str();
}

}  // namespace

SlamError::SlamError(ErrorCode code, const std::string& message, std::optional<int> line)
    : std::runtime_error(format_message(code, message, line)), code_(code), line_(line), detail_(message) {}

SlamError SlamError::with_stage(std::string stage) const {
  SlamError copy(code_, "[" + stage + "] " + detail_, line_);
  copy.detail_ = detail_;
  copy.stage_ = std::move(stage);
  return copy;
}

void fail(ErrorCode code, const std::string& message) { throw SlamError(code, message); }

double normalize_angle(double angle) {
  double a = std::remainder(angle, 2.0 * kPi);  // [-pi, pi]
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

double Pose::heading() const { return normalize_angle(theta); }

LandmarkRow landmark_to_row(const Landmark& landmark) {
  return {0.5 * (landmark.x * landmark.x + landmark.y * landmark.y), landmark.x, landmark.y, 1.0};
}

Landmark row_to_landmark(const LandmarkRow& row, int id) { return {id, row(1), row(2)}; }

StateCol4 pose_to_col4(const Pose& pose) {
  return {1.0, -pose.x, -pose.y, 0.5 * (pose.x * pose.x + pose.y * pose.y)};
}

StateCol7 pose_to_col7(const Pose& pose, const Pose& next_pose, double v, double velocity_floor) {
  if (!(std::abs(v) >= velocity_floor)) {
    std::ostringstream msg;
    msg << "|v| = " << std::abs(v) << " below floor " << velocity_floor;
    fail(ErrorCode::VelocityTooSmall, msg.str());
  }
  const double sq = pose.x * pose.x + pose.y * pose.y;
  const double sq_next = next_pose.x * next_pose.x + next_pose.y * next_pose.y;
  StateCol7 col;
  col << 1.0, -pose.x, -pose.y, 0.5 * sq, -std::cos(pose.theta), -std::sin(pose.theta),
      (sq_next - sq) / (2.0 * v);
  return col;
}

double squared_range(const Landmark& landmark, const Pose& pose) {
  const double dx = landmark.x - pose.x;
  const double dy = landmark.y - pose.y;
  return dx * dx + dy * dy;
}

Pose kinematic_step(const Pose& pose, double v, double omega) {
  return {pose.x + v * std::cos(pose.theta), pose.y + v * std::sin(pose.theta), pose.theta + omega};
}

std::vector<double> pose_times(const std::vector<OdometryStep>& odometry) {
  std::vector<double> times;
  times.reserve(odometry.size() + 1);
  for (const auto& o : odometry) times.push_back(o.time);
  if (odometry.empty()) {
    times.push_back(0.0);
  } else {
    const std::size_t n = odometry.size();
    const double dt = n > 1 ? odometry[n - 1].time - odometry[n - 2].time : 1.0;
    times.push_back(odometry.back().time + dt);
  }
  return times;
}

Eigen::MatrixXd landmarks_to_matrix(const std::vector<Landmark>& landmarks) {
  Eigen::MatrixXd c(static_cast<Eigen::Index>(landmarks.size()), 4);
  for (std::size_t i = 0; i < landmarks.size(); ++i) c.row(static_cast<Eigen::Index>(i)) = landmark_to_row(landmarks[i]).transpose();
  return c;
}

Eigen::MatrixXd poses_to_matrix(const std::vector<Pose>& poses) {
  Eigen::MatrixXd x(4, static_cast<Eigen::Index>(poses.size()));
  for (std::size_t t = 0; t < poses.size(); ++t) x.col(static_cast<Eigen::Index>(t)) = pose_to_col4(poses[t]);
  return x;
}

Eigen::MatrixXd landmark_positions(const std::vector<Landmark>& landmarks) {
  Eigen::MatrixXd p(static_cast<Eigen::Index>(landmarks.size()), 2);
  for (std::size_t i = 0; i < landmarks.size(); ++i) p.row(static_cast<Eigen::Index>(i)) << landmarks[i].x, landmarks[i].y;
  return p;
}

Eigen::MatrixXd pose_positions(const std::vector<Pose>& poses) {
  Eigen::MatrixXd p(static_cast<Eigen::Index>(poses.size()), 2);
  for (std::size_t i = 0; i < poses.size(); ++i) p.row(static_cast<Eigen::Index>(i)) << poses[i].x, poses[i].y;
  return p;
}

}  // namespace spectral_slam
