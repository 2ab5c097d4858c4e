#include "spectral_slam/baselines.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace spectral_slam {

std::vector<Pose> dead_reckoning_baseline(const std::vector<OdometryStep>& odometry, const Pose& start) {
  return dead_reckon(odometry, start);
}

double RangeNoise::sigma(double range) const { return std::hypot(frac * range, abs); }

namespace {

struct SnappedReading {
  std::size_t pose = 0;
  std::size_t landmark = 0;
  double range = 0.0;
};

std::size_t nearest(const std::vector<double>& times, double t) {
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0;
  if (it == times.end()) return times.size() - 1;
  const auto hi = static_cast<std::size_t>(it - times.begin());
  return (t - times[hi - 1] <= times[hi] - t) ? hi - 1 : hi;
}

std::vector<SnappedReading> snap(const std::vector<RangeReading>& readings, const std::vector<double>& times,
                                 const std::map<int, std::size_t>& index_of) {
  std::vector<SnappedReading> out;
  out.reserve(readings.size());
  for (const auto& r : readings) {
    auto it = index_of.find(r.landmark_id);
    if (it == index_of.end()) continue;
    out.push_back({nearest(times, r.time), it->second, r.range});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.pose < b.pose; });
  return out;
}

}  // namespace

Eigen::Matrix<double, 1, 5> range_jacobian(const Pose& pose, const Landmark& landmark) {
  const double dx = landmark.x - pose.x;
  const double dy = landmark.y - pose.y;
  const double d = std::max(std::hypot(dx, dy), 1e-12);
  Eigen::Matrix<double, 1, 5> j;
  j << -dx / d, -dy / d, 0.0, dx / d, dy / d;
  return j;
}

EkfResult cartesian_ekf(const std::vector<RangeReading>& readings, const std::vector<OdometryStep>& odometry,
                        const Pose& initial_pose, const std::vector<LandmarkPrior>& priors,
                        const EkfOptions& options) {
  const auto n_land = static_cast<Eigen::Index>(priors.size());
  const Eigen::Index dim = 3 + 2 * n_land;
  std::map<int, std::size_t> index_of;
  Eigen::VectorXd x(dim);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(dim, dim);
  x.head(3) << initial_pose.x, initial_pose.y, initial_pose.theta;
  p.topLeftCorner(3, 3) = options.initial_pose_covariance;
  for (Eigen::Index i = 0; i < n_land; ++i) {
    const auto& pr = priors[static_cast<std::size_t>(i)];
    index_of[pr.landmark.id] = static_cast<std::size_t>(i);
    x.segment<2>(3 + 2 * i) << pr.landmark.x, pr.landmark.y;
    p.block<2, 2>(3 + 2 * i, 3 + 2 * i) = pr.covariance;
  }

  EkfResult out;
  out.times = pose_times(odometry);
  const auto snapped = snap(readings, out.times, index_of);
  std::size_t next = 0;
  for (std::size_t t = 0; t < out.times.size(); ++t) {
    for (; next < snapped.size() && snapped[next].pose == t; ++next) {
      const auto li = static_cast<Eigen::Index>(snapped[next].landmark);
      const Pose pose{x(0), x(1), x(2)};
      const Landmark lm{0, x(3 + 2 * li), x(4 + 2 * li)};
      const auto j5 = range_jacobian(pose, lm);
      Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(dim);
      h.head(3) = j5.head(3);
      h.segment<2>(3 + 2 * li) = j5.tail(2);
      const double predicted = std::sqrt(squared_range(lm, pose));
      const double sigma = options.range.sigma(snapped[next].range);
      const double s = h.dot(p * h.transpose()) + sigma * sigma;
      const Eigen::VectorXd k = p * h.transpose() / s;
      x += k * (snapped[next].range - predicted);
      const Eigen::MatrixXd ikh = Eigen::MatrixXd::Identity(dim, dim) - k * h;
      p = ikh * p * ikh.transpose() + (sigma * sigma) * k * k.transpose();
    }
    out.trajectory.push_back({x(0), x(1), x(2)});
    if (t < odometry.size()) {
      const double v = odometry[t].v, w = odometry[t].omega, th = x(2);
      Eigen::Matrix3d f = Eigen::Matrix3d::Identity();
      f(0, 2) = -v * std::sin(th);
      f(1, 2) = v * std::cos(th);
      Eigen::Matrix<double, 3, 2> g;
      g << std::cos(th), 0.0, std::sin(th), 0.0, 0.0, 1.0;
      const Eigen::Matrix2d qa = Eigen::Vector2d(options.sigma_v * options.sigma_v,
                                                 options.sigma_omega * options.sigma_omega).asDiagonal();
      x(0) += v * std::cos(th);
      x(1) += v * std::sin(th);
      x(2) += w;
      // Only pose rows and columns change.
      p.topRows(3) = (f * p.topRows(3)).eval();
      p.leftCols(3) = (p.leftCols(3) * f.transpose()).eval();
      p.topLeftCorner(3, 3) += g * qa * g.transpose();
    }
    p = 0.5 * (p + p.transpose()).eval();
  }
  for (const auto& [id, i] : index_of) {
    const auto li = static_cast<Eigen::Index>(i);
    out.landmarks.push_back({id, x(3 + 2 * li), x(4 + 2 * li)});
  }
  out.covariance = p;
  return out;
}

namespace {

struct GnProblem {
  const std::vector<OdometryStep>& odometry;
  const GaussNewtonOptions& options;
  std::vector<SnappedReading> readings;
  std::vector<int> ids;
  std::vector<bool> fixed;
  std::vector<Eigen::Index> land_col;  // parameter offset of each free landmark, -1 if fixed
  std::size_t n_poses = 0;
  Eigen::Index n_params = 0;
  Pose prior_pose;
  bool use_prior = false;

  void residuals(const Eigen::VectorXd& params, const std::vector<Landmark>& landmarks, Eigen::VectorXd& r,
                 std::vector<Eigen::Triplet<double>>* jac) const;
};

Eigen::Vector2d landmark_position(const Eigen::VectorXd& params, const GnProblem& pb,
                                  const std::vector<Landmark>& landmarks, std::size_t i) {
  if (pb.land_col[i] < 0) return {landmarks[i].x, landmarks[i].y};
  return params.segment<2>(pb.land_col[i]);
}

void GnProblem::residuals(const Eigen::VectorXd& params, const std::vector<Landmark>& landmarks,
                          Eigen::VectorXd& r, std::vector<Eigen::Triplet<double>>* jac) const {
  const std::size_t n_odo = std::min(odometry.size(), n_poses - 1);
  const Eigen::Index rows = static_cast<Eigen::Index>(readings.size() + 3 * n_odo + (use_prior ? 3 : 0));
  r.resize(rows);
  if (jac) jac->clear();
  Eigen::Index row = 0;

  for (const auto& rd : readings) {
    const Eigen::Index pc = static_cast<Eigen::Index>(3 * rd.pose);
    const Eigen::Vector2d m = landmark_position(params, *this, landmarks, rd.landmark);
    const double dx = m(0) - params(pc), dy = m(1) - params(pc + 1);
    const double d = std::max(std::hypot(dx, dy), 1e-12);
    const double sigma = options.range.sigma(rd.range);
    r(row) = (d - rd.range) / sigma;
    if (jac) {
      jac->emplace_back(row, pc, -dx / d / sigma);
      jac->emplace_back(row, pc + 1, -dy / d / sigma);
      if (land_col[rd.landmark] >= 0) {
        jac->emplace_back(row, land_col[rd.landmark], dx / d / sigma);
        jac->emplace_back(row, land_col[rd.landmark] + 1, dy / d / sigma);
      }
    }
    ++row;
  }

  const double sv = options.sigma_v, sw = options.sigma_omega;
  for (std::size_t t = 0; t < n_odo; ++t) {
    const Eigen::Index a = static_cast<Eigen::Index>(3 * t), b = a + 3;
    const double v = odometry[t].v, w = odometry[t].omega;
    const double th = params(a + 2), c = std::cos(th), s = std::sin(th);
    r(row) = (params(b) - params(a) - v * c) / sv;
    r(row + 1) = (params(b + 1) - params(a + 1) - v * s) / sv;
    r(row + 2) = normalize_angle(params(b + 2) - params(a + 2) - w) / sw;
    if (jac) {
      jac->emplace_back(row, b, 1.0 / sv);
      jac->emplace_back(row, a, -1.0 / sv);
      jac->emplace_back(row, a + 2, v * s / sv);
      jac->emplace_back(row + 1, b + 1, 1.0 / sv);
      jac->emplace_back(row + 1, a + 1, -1.0 / sv);
      jac->emplace_back(row + 1, a + 2, -v * c / sv);
      jac->emplace_back(row + 2, b + 2, 1.0 / sw);
      jac->emplace_back(row + 2, a + 2, -1.0 / sw);
    }
    row += 3;
  }

  if (use_prior) {
    const double sp = options.first_pose_sigma;
    r(row) = (params(0) - prior_pose.x) / sp;
    r(row + 1) = (params(1) - prior_pose.y) / sp;
    r(row + 2) = normalize_angle(params(2) - prior_pose.theta) / sp;
    if (jac)
      for (int k = 0; k < 3; ++k) jac->emplace_back(row + k, k, 1.0 / sp);
  }
}

GnProblem make_problem(const std::vector<Pose>& poses, const std::vector<Landmark>& landmarks,
                       const std::vector<RangeReading>& readings, const std::vector<OdometryStep>& odometry,
                       const GaussNewtonOptions& options) {
  if (poses.empty()) fail(ErrorCode::InvalidConfig, "no poses to optimise");
  if (odometry.size() + 1 != poses.size())
    fail(ErrorCode::DimensionMismatch, "odometry must have one step fewer than there are poses");
  GnProblem pb{odometry, options, {}, {}, {}, {}, poses.size(), 0, poses.front(), false};
  std::map<int, std::size_t> index_of;
  Eigen::Index col = static_cast<Eigen::Index>(3 * poses.size());
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    index_of[landmarks[i].id] = i;
    pb.ids.push_back(landmarks[i].id);
    const bool is_fixed = std::find(options.fixed_landmarks.begin(), options.fixed_landmarks.end(),
                                    landmarks[i].id) != options.fixed_landmarks.end();
    pb.fixed.push_back(is_fixed);
    pb.land_col.push_back(is_fixed ? -1 : col);
    if (!is_fixed) col += 2;
  }
  pb.n_params = col;
  pb.use_prior = options.fixed_landmarks.empty();
  pb.readings = snap(readings, pose_times(odometry), index_of);
  return pb;
}

Eigen::VectorXd pack(const std::vector<Pose>& poses, const std::vector<Landmark>& landmarks, const GnProblem& pb) {
  Eigen::VectorXd p(pb.n_params);
  for (std::size_t t = 0; t < poses.size(); ++t)
    p.segment<3>(static_cast<Eigen::Index>(3 * t)) << poses[t].x, poses[t].y, poses[t].theta;
  for (std::size_t i = 0; i < landmarks.size(); ++i)
    if (pb.land_col[i] >= 0) p.segment<2>(pb.land_col[i]) << landmarks[i].x, landmarks[i].y;
  return p;
}

}  // namespace

double gauss_newton_cost(const std::vector<Pose>& poses, const std::vector<Landmark>& landmarks,
                         const std::vector<RangeReading>& readings, const std::vector<OdometryStep>& odometry,
                         const GaussNewtonOptions& options) {
  const GnProblem pb = make_problem(poses, landmarks, readings, odometry, options);
  Eigen::VectorXd r;
  pb.residuals(pack(poses, landmarks, pb), landmarks, r, nullptr);
  return r.squaredNorm();
}

GaussNewtonResult batch_gauss_newton(const std::vector<Pose>& initial_poses,
                                     const std::vector<Landmark>& initial_landmarks,
                                     const std::vector<RangeReading>& readings,
                                     const std::vector<OdometryStep>& odometry,
                                     const GaussNewtonOptions& options) {
  const GnProblem pb = make_problem(initial_poses, initial_landmarks, readings, odometry, options);
  Eigen::VectorXd params = pack(initial_poses, initial_landmarks, pb);
  if (!params.allFinite()) fail(ErrorCode::NonFiniteCost, "initial parameters are not finite");

  Eigen::VectorXd r;
  std::vector<Eigen::Triplet<double>> triplets;
  pb.residuals(params, initial_landmarks, r, &triplets);
  double cost = r.squaredNorm();
  if (!std::isfinite(cost)) fail(ErrorCode::NonFiniteCost, "initial cost is not finite");

  GaussNewtonResult res;
  res.cost_history.push_back(cost);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  bool pattern_ready = false;

  while (res.iterations < options.max_iters) {
    if (cost < 1e-20) {
      res.converged = true;
      break;
    }
    Eigen::SparseMatrix<double> j(r.size(), pb.n_params);
    j.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::SparseMatrix<double> a = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * r;
    const double damping = 1e-12 * std::max(1.0, a.diagonal().mean());
    for (Eigen::Index k = 0; k < a.rows(); ++k) a.coeffRef(k, k) += damping;
    if (!pattern_ready) {
      solver.analyzePattern(a);
      pattern_ready = true;
    }
    solver.factorize(a);
    if (solver.info() != Eigen::Success) fail(ErrorCode::NonFiniteCost, "normal equations could not be factorised");
    const Eigen::VectorXd step = solver.solve(-g);
    if (!step.allFinite()) fail(ErrorCode::NonFiniteCost, "non-finite Gauss-Newton step");

    double alpha = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial, r_trial;
    double trial_cost = cost;
    for (int k = 0; k < 40; ++k, alpha *= 0.5) {
      trial = params + alpha * step;
      pb.residuals(trial, initial_landmarks, r_trial, nullptr);
      trial_cost = r_trial.squaredNorm();
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.converged = true;
      break;
    }
    ++res.iterations;
    const double decrease = (cost - trial_cost) / cost;
    params = trial;
    cost = trial_cost;
    res.cost_history.push_back(cost);
    pb.residuals(params, initial_landmarks, r, &triplets);
    if (decrease < options.rel_tol) {
      res.converged = true;
      break;
    }
  }

  res.poses.resize(initial_poses.size());
  for (std::size_t t = 0; t < initial_poses.size(); ++t) {
    const auto c = static_cast<Eigen::Index>(3 * t);
    res.poses[t] = {params(c), params(c + 1), params(c + 2)};
  }
  res.landmarks = initial_landmarks;
  for (std::size_t i = 0; i < initial_landmarks.size(); ++i)
    if (pb.land_col[i] >= 0) {
      res.landmarks[i].x = params(pb.land_col[i]);
      res.landmarks[i].y = params(pb.land_col[i] + 1);
    }
  return res;
}

std::vector<Landmark> landmarks_from_path(const std::vector<Pose>& path, const std::vector<double>& times,
                                          const std::vector<RangeReading>& readings) {
  if (path.size() != times.size()) fail(ErrorCode::LengthMismatch, "one time per pose required");
  std::map<int, std::vector<std::pair<std::size_t, double>>> by_id;
  for (const auto& r : readings) by_id[r.landmark_id].emplace_back(nearest(times, r.time), r.range);
  std::vector<Landmark> out;
  for (const auto& [id, obs] : by_id) {
    if (obs.size() < 3) {
      std::ostringstream msg;
      msg << "landmark " << id << " has only " << obs.size() << " readings";
      fail(ErrorCode::InsufficientData, msg.str());
    }
    Eigen::MatrixXd a(static_cast<Eigen::Index>(obs.size()), 3);
    Eigen::VectorXd b(static_cast<Eigen::Index>(obs.size()));
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const Pose& p = path[obs[k].first];
      const auto row = static_cast<Eigen::Index>(k);
      a.row(row) << 1.0, -p.x, -p.y;
      b(row) = 0.5 * (obs[k].second * obs[k].second - p.x * p.x - p.y * p.y);
    }
    const Eigen::Vector3d sol = a.colPivHouseholderQr().solve(b);
    out.push_back({id, sol(1), sol(2)});
  }
  return out;
}

}  // namespace spectral_slam
