#include "spectral_slam/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spectral_slam/parallel.hpp"

namespace spectral_slam {

ProcrustesResult procrustes_align(const Eigen::MatrixXd& estimated, const Eigen::MatrixXd& reference,
                                  bool allow_reflection) {
  if (estimated.rows() != reference.rows() || estimated.cols() != reference.cols())
    fail(ErrorCode::LengthMismatch, "point sets differ in shape");
  if (estimated.rows() < 2) fail(ErrorCode::TooFewPoints, "at least 2 points are required");
  const Eigen::RowVectorXd me = estimated.colwise().mean();
  const Eigen::RowVectorXd mr = reference.colwise().mean();
  const Eigen::MatrixXd e = estimated.rowwise() - me;
  const Eigen::MatrixXd r = reference.rowwise() - mr;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(e.transpose() * r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::VectorXd d = Eigen::VectorXd::Ones(estimated.cols());
  if (!allow_reflection && (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(d.size() - 1) = -1.0;

  ProcrustesResult out;
  out.rotation = svd.matrixV() * d.asDiagonal() * svd.matrixU().transpose();
  out.translation = mr.transpose() - out.rotation * me.transpose();
  out.aligned = (estimated * out.rotation.transpose()).rowwise() + out.translation.transpose();
  out.residual = std::sqrt((out.aligned - reference).rowwise().squaredNorm().mean());
  return out;
}

SegmentRmse rmse_segments(const std::vector<Pose>& estimated, const std::vector<Pose>& truth) {
  if (estimated.size() != truth.size() || estimated.empty())
    fail(ErrorCode::LengthMismatch, "trajectories must be non-empty and equally long");
  const std::size_t n = estimated.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = estimated[i].x - truth[i].x, dy = estimated[i].y - truth[i].y;
    prefix[i + 1] = prefix[i] + dx * dx + dy * dy;
  }
  const auto w = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(n))));
  auto window = [&](std::size_t lo) { return std::sqrt(std::max(0.0, prefix[lo + w] - prefix[lo]) / static_cast<double>(w)); };

  SegmentRmse out;
  out.full = std::sqrt(prefix[n] / static_cast<double>(n));
  out.best10 = std::numeric_limits<double>::infinity();
  out.worst10 = 0.0;
  for (std::size_t lo = 0; lo + w <= n; ++lo) {
    const double v = window(lo);
    out.best10 = std::min(out.best10, v);
    out.worst10 = std::max(out.worst10, v);
  }
  out.last10 = window(n - w);
  return out;
}

double map_error(const Eigen::MatrixXd& c_hat, const Eigen::MatrixXd& c_true, const std::vector<int>& ids,
                 const std::vector<int>& exclude_ids) {
  if (c_hat.rows() != c_true.rows() || c_hat.cols() != c_true.cols() ||
      static_cast<Eigen::Index>(ids.size()) != c_hat.rows())
    fail(ErrorCode::LengthMismatch, "landmark matrices differ in shape");
  double sum = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (std::find(exclude_ids.begin(), exclude_ids.end(), ids[i]) != exclude_ids.end()) continue;
    const auto r = static_cast<Eigen::Index>(i);
    sum += (c_hat.row(r) - c_true.row(r)).squaredNorm();
  }
  return std::sqrt(sum);
}

namespace {

// Two-sided 97.5% Student t quantiles for 1..30 degrees of freedom.
double t_quantile_975(std::size_t df) {
  static const double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                                 2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
                                 2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
  if (df == 0) return std::numeric_limits<double>::infinity();
  return df <= 30 ? table[df - 1] : 1.96;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t trial) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (trial + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

ConvergenceResult convergence_study(const ConvergenceConfig& config) {
  if (config.t_grid.empty() || config.trials == 0) fail(ErrorCode::InvalidConfig, "empty grid or no trials");
  if (config.rank != 4 && config.rank != 7) fail(ErrorCode::InvalidConfig, "rank must be 4 or 7");
  const std::size_t t_max = *std::max_element(config.t_grid.begin(), config.t_grid.end());
  const std::size_t g = config.t_grid.size();
  std::vector<std::vector<double>> errors(g, std::vector<double>(config.trials, std::nan("")));

  parallel_for(config.trials, [&](std::size_t trial) {
    SimConfig sim = config.base;
    sim.n_steps = t_max;
    sim.seed = mix_seed(config.seed, trial);
    const SimulatedRun run = simulate(sim);
    std::vector<Landmark> anchors(run.landmarks.begin(),
                                  run.landmarks.begin() + static_cast<std::ptrdiff_t>(std::min(config.n_anchors, run.landmarks.size())));
    std::vector<int> anchor_ids;
    for (const auto& a : anchors) anchor_ids.push_back(a.id);
    const Eigen::MatrixXd c_true = landmarks_to_matrix(run.landmarks);
    const RangeGrid full = observed_grid(run.ranges, run.trajectory.times);

    for (std::size_t k = 0; k < g; ++k) {
      const auto T = static_cast<Eigen::Index>(config.t_grid[k]);
      try {
        RangeGrid grid;
        grid.values = full.values.leftCols(T);
        grid.mask = full.mask.leftCols(T);
        grid.timesteps.assign(full.timesteps.begin(), full.timesteps.begin() + T);
        grid.landmark_ids = full.landmark_ids;
        MeasurementMatrix y;
        if (config.rank == 4) {
          y = build_rank4(grid);
        } else {
          std::vector<OdometryStep> odo(run.trajectory.odometry.begin(), run.trajectory.odometry.begin() + (T - 1));
          y = build_rank7(grid, odo);
        }
        const SlamSolution sol = align_with_anchors(factorize(y, config.rank), anchors);
        const auto n = static_cast<Eigen::Index>(run.landmarks.size());
        errors[k][trial] = map_error(sol.C.topLeftCorner(n, 4), c_true, full.landmark_ids, anchor_ids);
      } catch (const SlamError&) {
        // Counted as a failure below.
      }
    }
  });

  ConvergenceResult res;
  for (std::size_t k = 0; k < g; ++k) {
    ConvergencePoint p;
    p.T = config.t_grid[k];
    for (double e : errors[k]) {
      if (std::isnan(e)) ++p.failures;
      else p.errors.push_back(e);
    }
    if (!p.errors.empty()) {
      const double n = static_cast<double>(p.errors.size());
      p.mean = std::accumulate(p.errors.begin(), p.errors.end(), 0.0) / n;
      double var = 0.0;
      for (double e : p.errors) var += (e - p.mean) * (e - p.mean);
      var = p.errors.size() > 1 ? var / (n - 1.0) : 0.0;
      p.ci95 = 1.96 * std::sqrt(var / n);
      std::vector<double> sorted = p.errors;
      std::sort(sorted.begin(), sorted.end());
      const std::size_t m = sorted.size();
      p.median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    }
    res.points.push_back(std::move(p));
  }

  res.strictly_decreasing = true;
  for (std::size_t k = 1; k < g; ++k)
    if (!(res.points[k].mean < res.points[k - 1].mean)) res.strictly_decreasing = false;
  res.floor_limited = std::all_of(res.points.begin(), res.points.end(), [](const auto& p) { return p.mean < 1e-8; });

  if (!res.floor_limited && g >= 2) {
    std::vector<double> xs, ys;
    for (const auto& p : res.points) {
      if (!(p.mean > 0.0)) continue;
      xs.push_back(std::log(static_cast<double>(p.T)));
      ys.push_back(std::log(p.mean));
    }
    const double n = static_cast<double>(xs.size());
    if (xs.size() >= 2) {
      const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
      const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
      double sxx = 0.0, sxy = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
      }
      res.slope = sxy / sxx;
      if (xs.size() > 2) {
        double ssr = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
          const double fit = my + res.slope * (xs[i] - mx);
          ssr += (ys[i] - fit) * (ys[i] - fit);
        }
        res.slope_ci95 = t_quantile_975(xs.size() - 2) * std::sqrt(ssr / (n - 2.0) / sxx);
      }
    }
  }
  return res;
}

BoundValue theoretical_bound(double n_landmarks, double c, double gamma, double T) {
  if (!(n_landmarks > 0) || !(c > 0) || !(gamma > 0) || !(T > 1))
    fail(ErrorCode::InvalidConfig, "bound inputs must be positive and T > 1");
  return {n_landmarks * c * std::sqrt(2.0 * std::log(T) / T) / gamma, 8.0 * n_landmarks * n_landmarks / T};
}

double subspace_sin(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows()) fail(ErrorCode::DimensionMismatch, "subspaces live in different spaces");
  if (a.cols() > a.rows() || b.cols() > b.rows()) fail(ErrorCode::DimensionMismatch, "basis wider than its space");
  Eigen::JacobiSVD<Eigen::MatrixXd> sa(a, Eigen::ComputeThinU);
  Eigen::JacobiSVD<Eigen::MatrixXd> sb(b, Eigen::ComputeThinU);
  const Eigen::MatrixXd qa = sa.matrixU().leftCols(a.cols());
  const Eigen::MatrixXd qb = sb.matrixU().leftCols(b.cols());
  const Eigen::MatrixXd resid = qa - qb * (qb.transpose() * qa);
  Eigen::JacobiSVD<Eigen::MatrixXd> sr(resid);
  return std::min(1.0, sr.singularValues()(0));
}

BoundCheckResult empirical_bound_check(const SimConfig& config, std::size_t trials, std::uint64_t seed) {
  if (trials == 0) fail(ErrorCode::InvalidConfig, "no trials");
  BoundCheckResult res;
  res.trials.resize(trials);
  constexpr int r = 4;
  if (config.n_landmarks <= static_cast<std::size_t>(r))
    fail(ErrorCode::InvalidConfig, "subspace check needs more than 4 landmarks");

  parallel_for(trials, [&](std::size_t trial) {
    SimConfig sim = config;
    sim.seed = mix_seed(seed, trial);
    sim.dropout_prob = 0.0;
    const SimulatedRun run = simulate(sim);
    const auto& traj = run.trajectory;
    const MeasurementMatrix y0 = build_rank4(exact_grid(run.landmarks, traj.poses, traj.times));
    const MeasurementMatrix yh = build_rank4(observed_grid(run.ranges, traj.times));
    const double T = static_cast<double>(y0.Y.cols());

    double c = 0.0;
    for (Eigen::Index t = 0; t < y0.Y.cols(); ++t) {
      const Eigen::VectorXd a = yh.Y.col(t), b = y0.Y.col(t);
      c = std::max(c, (a * a.transpose() - b * b.transpose()).cwiseAbs().maxCoeff());
    }
    const Eigen::MatrixXd m = y0.Y * y0.Y.transpose() / T;
    const Eigen::MatrixXd mh = yh.Y * yh.Y.transpose() / T;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m), esh(mh);
    const Eigen::Index dim = m.rows();
    const double gamma = es.eigenvalues()(dim - r);  // ascending order
    BoundTrial bt;
    bt.c = c;
    bt.gamma = gamma;
    bt.sin_psi = subspace_sin(esh.eigenvectors().rightCols(r), es.eigenvectors().rightCols(r));
    bt.bound = c > 0.0 ? theoretical_bound(static_cast<double>(run.landmarks.size()), c, gamma, T).bound : 0.0;
    res.trials[trial] = bt;
  });

  std::size_t violations = 0;
  for (const auto& t : res.trials)
    if (t.sin_psi > t.bound) ++violations;
  res.violation_fraction = static_cast<double>(violations) / static_cast<double>(trials);
  const double T = static_cast<double>(config.n_steps - 1);
  const double n = static_cast<double>(config.n_landmarks);
  res.failure_probability = 8.0 * n * n / T;
  return res;
}

}  // namespace spectral_slam
