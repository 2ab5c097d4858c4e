#include "spectral_slam/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace spectral_slam {

std::vector<Pose> dead_reckon(const std::vector<OdometryStep>& odometry, const Pose& start) {
  std::vector<Pose> poses;
  poses.reserve(odometry.size() + 1);
  poses.push_back(start);
  for (const auto& o : odometry) poses.push_back(kinematic_step(poses.back(), o.v, o.omega));
  return poses;
}

namespace {

std::size_t nearest_index(const std::vector<double>& times, double t) {
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0;
  if (it == times.end()) return times.size() - 1;
  const auto hi = static_cast<std::size_t>(it - times.begin());
  return (t - times[hi - 1] <= times[hi] - t) ? hi - 1 : hi;
}

}  // namespace

RangeGrid observed_grid(const std::vector<RangeReading>& readings, const std::vector<double>& times,
                        std::vector<int> landmark_ids) {
  if (times.empty()) fail(ErrorCode::InsufficientData, "empty pose timeline");
  if (landmark_ids.empty()) {
    std::set<int> ids;
    for (const auto& r : readings) ids.insert(r.landmark_id);
    landmark_ids.assign(ids.begin(), ids.end());
  }
  std::map<int, Eigen::Index> row_of;
  for (std::size_t i = 0; i < landmark_ids.size(); ++i) row_of[landmark_ids[i]] = static_cast<Eigen::Index>(i);

  const auto n = static_cast<Eigen::Index>(landmark_ids.size());
  const auto t = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, t);
  Eigen::MatrixXi count = Eigen::MatrixXi::Zero(n, t);
  for (const auto& r : readings) {
    auto it = row_of.find(r.landmark_id);
    if (it == row_of.end()) continue;
    const auto col = static_cast<Eigen::Index>(nearest_index(times, r.time));
    sum(it->second, col) += 0.5 * r.range * r.range;
    count(it->second, col) += 1;
  }

  RangeGrid grid;
  grid.values = Eigen::MatrixXd::Zero(n, t);
  grid.mask = count.array() > 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < t; ++j)
      if (count(i, j) > 0) grid.values(i, j) = sum(i, j) / count(i, j);
  grid.timesteps = times;
  grid.landmark_ids = std::move(landmark_ids);
  return grid;
}

RangeGrid interpolate_missing(const std::vector<RangeReading>& readings,
                              const std::vector<OdometryStep>& odometry,
                              const InterpolationOptions& options) {
  return interpolate_grid(observed_grid(readings, pose_times(odometry)), odometry, options);
}

namespace {

struct LocalFit {
  Eigen::Index lo = 0;
  Eigen::Index hi = 0;  // exclusive
};

// Design rows [1, -x, -y, q] for poses [lo, hi), expressed in the frame of pose lo.
Eigen::MatrixXd local_design(const std::vector<Pose>& dr, Eigen::Index lo, Eigen::Index hi) {
  const Pose& origin = dr[static_cast<std::size_t>(lo)];
  const double c = std::cos(origin.theta), s = std::sin(origin.theta);
  Eigen::MatrixXd d(hi - lo, 4);
  for (Eigen::Index k = lo; k < hi; ++k) {
    const double dx = dr[static_cast<std::size_t>(k)].x - origin.x;
    const double dy = dr[static_cast<std::size_t>(k)].y - origin.y;
    const double x = c * dx + s * dy;
    const double y = -s * dx + c * dy;
    d.row(k - lo) << 1.0, -x, -y, 0.5 * (x * x + y * y);
  }
  return d;
}

// Common scaling (1, L, L, L^2) with L the RMS distance of the window's
// positions from its origin. A per-column scaling would blow a numerically
// zero coordinate (straight lanes) up to unit size and hide the degeneracy.
Eigen::Vector4d design_scale(const Eigen::MatrixXd& design) {
  const double l = std::sqrt(design.rightCols(3).leftCols(2).squaredNorm() / static_cast<double>(design.rows()));
  if (!(l > 0.0)) return Eigen::Vector4d::Ones();
  return {1.0, l, l, l * l};
}

// Thin SVD of the scaled fit rows; serves the conditioning test and the
// minimum-norm solve.
Eigen::JacobiSVD<Eigen::MatrixXd> scaled_svd(const Eigen::MatrixXd& rows, const Eigen::Vector4d& scale) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(rows * scale.cwiseInverse().asDiagonal(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  return svd;
}

double design_ratio(const Eigen::JacobiSVD<Eigen::MatrixXd>& svd) {
  const auto& sv = svd.singularValues();
  if (sv.size() < 4 || !(sv(0) > 0.0)) return 0.0;
  return sv(3) / sv(0);
}

}  // namespace

RangeGrid interpolate_grid(const RangeGrid& observed, const std::vector<OdometryStep>& odometry,
                           const InterpolationOptions& options) {
  const Eigen::Index n = observed.landmarks();
  const Eigen::Index t = observed.steps();
  if (static_cast<Eigen::Index>(odometry.size()) + 1 != t)
    fail(ErrorCode::DimensionMismatch, "odometry must have one step fewer than the grid has columns");
  if (options.window < 2 || options.overlap >= options.window)
    fail(ErrorCode::InvalidConfig, "window must be at least 2 and exceed the overlap");
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = observed.mask.row(i).count();
    if (c < 4) {
      std::ostringstream msg;
      msg << "landmark " << observed.landmark_ids[static_cast<std::size_t>(i)] << " has " << c << " readings";
      fail(ErrorCode::InsufficientData, msg.str());
    }
  }
  if (observed.mask.all()) return observed;

  const auto dr = dead_reckon(odometry);
  const auto window = static_cast<Eigen::Index>(options.window);
  const auto stride = window - static_cast<Eigen::Index>(options.overlap);
  const Eigen::Index grow = std::max<Eigen::Index>(1, window / 2);

  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, t);
  Eigen::MatrixXd weight = Eigen::MatrixXd::Zero(n, t);

  for (Eigen::Index start = 0;; start += stride) {
    const Eigen::Index end = std::min(start + window, t);
    const Eigen::MatrixXd base = local_design(dr, start, end);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index lo = start, hi = end;
      Eigen::MatrixXd widened;
      const Eigen::MatrixXd* design = &base;
      std::vector<Eigen::Index> cols;
      Eigen::MatrixXd rows;
      Eigen::Vector4d scale;
      Eigen::JacobiSVD<Eigen::MatrixXd> svd;
      for (;;) {
        cols.clear();
        for (Eigen::Index k = lo; k < hi; ++k)
          if (observed.mask(i, k)) cols.push_back(k);
        const bool whole = lo == 0 && hi == t;
        if (cols.size() >= options.min_readings || whole) {
          rows.resize(static_cast<Eigen::Index>(cols.size()), 4);
          for (std::size_t r = 0; r < cols.size(); ++r) rows.row(static_cast<Eigen::Index>(r)) = design->row(cols[r] - lo);
          scale = design_scale(*design);
          svd = scaled_svd(rows, scale);
          if (whole || design_ratio(svd) > options.min_design_ratio) break;
        }
        lo = std::max<Eigen::Index>(0, lo - grow);
        hi = std::min(t, hi + grow);
        widened = local_design(dr, lo, hi);
        design = &widened;
      }

      Eigen::VectorXd b(static_cast<Eigen::Index>(cols.size()));
      for (std::size_t r = 0; r < cols.size(); ++r) b(static_cast<Eigen::Index>(r)) = observed.values(i, cols[r]);
      // Rank-deficient windows that never recovered get the minimum-norm fit.
      const Eigen::Vector4d coef = scale.cwiseInverse().asDiagonal() * svd.solve(b);

      for (Eigen::Index k = start; k < end; ++k) {
        sum(i, k) += design->row(k - lo).dot(coef);
        weight(i, k) += 1.0;
      }
    }
    if (end == t) break;
  }

  RangeGrid out = observed;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < t; ++k)
      if (!observed.mask(i, k)) out.values(i, k) = std::max(0.0, sum(i, k) / weight(i, k));
  return out;
}

MeasurementMatrix build_rank4(const RangeGrid& grid) {
  MeasurementMatrix m;
  m.Y = grid.values;
  m.kind = MatrixKind::Rank4;
  m.col_times = grid.timesteps;
  m.col_indices.resize(grid.timesteps.size());
  for (std::size_t k = 0; k < m.col_indices.size(); ++k) m.col_indices[k] = k;
  m.landmark_ids = grid.landmark_ids;
  return m;
}

MeasurementMatrix build_rank7(const RangeGrid& grid, const std::vector<OdometryStep>& odometry,
                              double velocity_floor) {
  const Eigen::Index n = grid.landmarks();
  const Eigen::Index t = grid.steps();
  if (static_cast<Eigen::Index>(odometry.size()) + 1 != t)
    fail(ErrorCode::DimensionMismatch, "odometry must have one step fewer than the grid has columns");

  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < odometry.size(); ++k)
    if (std::abs(odometry[k].v) >= velocity_floor) keep.push_back(k);
  if (keep.empty()) fail(ErrorCode::AllColumnsDropped, "every step is below the velocity floor");

  MeasurementMatrix m;
  m.kind = MatrixKind::Rank7;
  m.Y.resize(2 * n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const auto k = static_cast<Eigen::Index>(keep[c]);
    const double v = odometry[keep[c]].v;
    const auto col = static_cast<Eigen::Index>(c);
    m.Y.col(col).head(n) = grid.values.col(k);
    m.Y.col(col).tail(n) = (grid.values.col(k + 1) - grid.values.col(k)) / v;
    m.col_times.push_back(grid.timesteps[keep[c]]);
    m.velocities.push_back(v);
    m.col_indices.push_back(keep[c]);
  }
  m.landmark_ids = grid.landmark_ids;
  return m;
}

RangeGrid exact_grid(const std::vector<Landmark>& landmarks, const std::vector<Pose>& poses,
                     const std::vector<double>& times) {
  RangeGrid g;
  const auto n = static_cast<Eigen::Index>(landmarks.size());
  const auto t = static_cast<Eigen::Index>(poses.size());
  g.values.resize(n, t);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < t; ++k)
      g.values(i, k) = 0.5 * squared_range(landmarks[static_cast<std::size_t>(i)], poses[static_cast<std::size_t>(k)]);
  g.mask = BoolMatrix::Constant(n, t, true);
  g.timesteps = times;
  for (const auto& l : landmarks) g.landmark_ids.push_back(l.id);
  return g;
}

}  // namespace spectral_slam
