#include "spectral_slam/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>

#include "spectral_slam/svg.hpp"

namespace spectral_slam {

double PipelineResult::spectral_seconds() const {
  double s = 0.0;
  for (const auto& t : timings)
    if (t.stage != "refine" && t.stage != "evaluate") s += t.seconds;
  return s;
}

namespace {

template <class Fn>
auto timed(std::vector<StageTiming>& timings, const std::string& stage, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  auto record = [&] {
    timings.push_back({stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
  };
  try {
    auto out = fn();
    record();
    return out;
  } catch (const SlamError& e) {
    throw e.with_stage(stage);
  }
}

std::vector<double> reading_times(const std::vector<RangeReading>& readings) {
  std::vector<double> t;
  for (const auto& r : readings) t.push_back(r.time);
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

// Index of the ground-truth pose at time t, if one lies within a tight tolerance.
std::optional<std::size_t> match_time(const std::vector<TimedPose>& gt, double t) {
  auto it = std::lower_bound(gt.begin(), gt.end(), t, [](const TimedPose& p, double v) { return p.time < v; });
  std::optional<std::size_t> best;
  double best_d = 1e-6 * std::max(1.0, std::abs(t));
  for (auto c : {it, it == gt.begin() ? it : it - 1}) {
    if (c == gt.end()) continue;
    const double d = std::abs(c->time - t);
    if (d <= best_d) best_d = d, best = static_cast<std::size_t>(c - gt.begin());
  }
  return best;
}

Pose rigid(const ProcrustesResult& pr, const Pose& p) {
  const Eigen::Vector2d q = pr.rotation * Eigen::Vector2d(p.x, p.y) + pr.translation;
  return {q.x(), q.y(), p.theta};
}

std::vector<Pose> rigid_all(const ProcrustesResult& pr, const std::vector<Pose>& poses) {
  std::vector<Pose> out;
  for (const auto& p : poses) out.push_back(rigid(pr, p));
  const auto headings = recover_headings(pose_positions(out));
  for (std::size_t i = 0; i < out.size(); ++i) out[i].theta = headings[i];
  return out;
}

std::optional<double> landmark_rmse(const std::vector<Landmark>& estimate, const std::vector<Landmark>& truth,
                                    const std::set<int>& skip, const ProcrustesResult* transform) {
  std::map<int, Landmark> by_id;
  for (const auto& l : truth) by_id[l.id] = l;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& l : estimate) {
    if (skip.count(l.id) || !by_id.count(l.id)) continue;
    Eigen::Vector2d p(l.x, l.y);
    if (transform) p = transform->rotation * p + transform->translation;
    sum += (p - Eigen::Vector2d(by_id[l.id].x, by_id[l.id].y)).squaredNorm();
    ++n;
  }
  if (n == 0) return std::nullopt;
  return std::sqrt(sum / static_cast<double>(n));
}

// A metric upgrade fixes the frame only up to reflection; odometry turn rates
// pick the handedness. Mirrors y when recovered heading changes disagree with them.
void resolve_handedness(SlamSolution& sol, const std::vector<OdometryStep>& odometry) {
  double agreement = 0.0;
  for (std::size_t i = 0; i + 1 < sol.trajectory.size(); ++i) {
    const std::size_t a = sol.col_indices[i], b = sol.col_indices[i + 1];
    if (b != a + 1 || a >= odometry.size()) continue;
    agreement += normalize_angle(sol.trajectory[i + 1].theta - sol.trajectory[i].theta) * odometry[a].omega;
  }
  if (agreement >= 0.0) return;
  for (auto& l : sol.map) l.y = -l.y;
  for (auto& p : sol.trajectory) p.y = -p.y, p.theta = -p.theta;
  sol.C.col(2) *= -1.0;
  sol.X.row(2) *= -1.0;
  if (sol.X.rows() == 7) sol.X.row(5) *= -1.0;
  if (sol.C.cols() == 7) sol.C.col(5) *= -1.0;
}

}  // namespace

DatasetBundle bundle_from_run(const SimulatedRun& run, std::size_t n_anchors) {
  DatasetBundle b;
  b.ranges = run.ranges;
  b.odometry = run.trajectory.odometry;
  std::vector<TimedPose> gt;
  for (std::size_t i = 0; i < run.trajectory.poses.size(); ++i) gt.push_back({run.trajectory.times[i], run.trajectory.poses[i]});
  b.ground_truth = std::move(gt);
  b.landmarks = run.landmarks;
  const auto k = static_cast<std::ptrdiff_t>(std::min(n_anchors, run.landmarks.size()));
  b.anchors = std::vector<Landmark>(run.landmarks.begin(), run.landmarks.begin() + k);
  validate_bundle(b);
  return b;
}

std::vector<Pose> fill_pose_timeline(const SlamSolution& solution, const std::vector<OdometryStep>& odometry) {
  const std::size_t n = odometry.size() + 1;
  std::vector<std::optional<Pose>> known(n);
  for (std::size_t i = 0; i < solution.col_indices.size(); ++i)
    if (solution.col_indices[i] < n) known[solution.col_indices[i]] = solution.trajectory[i];
  const auto first = std::find_if(known.begin(), known.end(), [](const auto& p) { return p.has_value(); });
  if (first == known.end()) fail(ErrorCode::InsufficientData, "solution has no poses on the odometry timeline");

  std::vector<Pose> out(n);
  const auto f = static_cast<std::size_t>(first - known.begin());
  out[f] = **first;
  for (std::size_t i = f; i-- > 0;) {
    const auto& o = odometry[i];
    const double theta = out[i + 1].theta - o.omega;
    out[i] = {out[i + 1].x - o.v * std::cos(theta), out[i + 1].y - o.v * std::sin(theta), theta};
  }
  for (std::size_t i = f + 1; i < n; ++i)
    out[i] = known[i] ? *known[i] : kinematic_step(out[i - 1], odometry[i - 1].v, odometry[i - 1].omega);
  return out;
}

std::vector<Pose> odometry_headings(const std::vector<Pose>& poses, const std::vector<OdometryStep>& odometry,
                                    std::size_t window) {
  if (poses.size() != odometry.size() + 1) fail(ErrorCode::LengthMismatch, "need one pose per odometry step plus one");
  const std::size_t n = odometry.size();
  std::vector<double> turn(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) turn[i + 1] = turn[i] + odometry[i].omega;
  std::vector<double> pc(n + 1, 0.0), ps(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = poses[i + 1].x - poses[i].x, dy = poses[i + 1].y - poses[i].y;
    const double off = std::atan2(dy, dx) - turn[i], w = std::hypot(dx, dy);
    pc[i + 1] = pc[i] + w * std::cos(off);
    ps[i + 1] = ps[i] + w * std::sin(off);
  }
  std::vector<Pose> out = poses;
  for (std::size_t i = 0; i <= n; ++i) {
    const std::size_t lo = i > window ? i - window : 0, hi = std::min(n, i + window + 1);
    const double c = pc[hi] - pc[lo], s = ps[hi] - ps[lo];
    if (c == 0.0 && s == 0.0) continue;
    out[i].theta = normalize_angle(turn[i] + std::atan2(s, c));
  }
  return out;
}

PipelineResult run_pipeline(const DatasetBundle& bundle, const PipelineOptions& options) {
  PipelineResult res;
  auto& timings = res.timings;
  const bool have_odometry = !bundle.odometry.empty();
  res.rank = options.rank == 0 ? (have_odometry ? 7 : 4) : options.rank;
  if (res.rank != 4 && res.rank != 7) throw SlamError(ErrorCode::InvalidConfig, "rank must be 4 or 7").with_stage("configure");
  if (res.rank == 7 && !have_odometry)
    throw SlamError(ErrorCode::InsufficientData, "rank 7 needs odometry").with_stage("configure");
  if (!options.metric_upgrade && (!bundle.anchors || bundle.anchors->size() < 4))
    throw SlamError(ErrorCode::TooFewAnchors, "at least 4 anchors are needed without --metric-upgrade")
        .with_stage("configure");
  if (options.refine_gauss_newton && !have_odometry)
    throw SlamError(ErrorCode::InsufficientData, "refinement needs odometry").with_stage("configure");

  const RangeGrid grid = timed(timings, "interpolate", [&] {
    const std::vector<double> times = have_odometry ? pose_times(bundle.odometry) : reading_times(bundle.ranges);
    RangeGrid observed = observed_grid(bundle.ranges, times);
    if (observed.mask.all()) return observed;
    if (!have_odometry) fail(ErrorCode::InsufficientData, "missing readings cannot be interpolated without odometry");
    return interpolate_grid(observed, bundle.odometry, options.interpolation);
  });

  const MeasurementMatrix y = timed(timings, "build_matrix", [&] {
    return res.rank == 7 ? build_rank7(grid, bundle.odometry, options.velocity_floor) : build_rank4(grid);
  });

  const FactoredModel model = timed(timings, "factorize", [&] { return factorize(y, res.rank); });

  if (options.metric_upgrade) {
    res.solution = timed(timings, "metric_upgrade", [&] {
      SlamSolution upgraded = metric_upgrade(model, options.upgrade).solution;
      if (have_odometry) resolve_handedness(upgraded, bundle.odometry);
      return upgraded;
    });
  } else {
    res.solution = timed(timings, "align", [&] { return align_with_anchors(model, *bundle.anchors, options.alignment); });
  }
  const SlamSolution& sol = res.solution;

  if (options.refine_gauss_newton) {
    res.refined = timed(timings, "refine", [&] {
      std::vector<Landmark> init = sol.map;
      GaussNewtonOptions gn = options.gauss_newton;
      if (!options.metric_upgrade) {
        gn.fixed_landmarks.clear();
        for (const auto& a : *bundle.anchors) {
          gn.fixed_landmarks.push_back(a.id);
          for (auto& l : init)
            if (l.id == a.id) l = a;
        }
      }
      const auto start = odometry_headings(fill_pose_timeline(sol, bundle.odometry), bundle.odometry);
      return batch_gauss_newton(start, init, bundle.ranges, bundle.odometry, gn);
    });
    res.refined_times = pose_times(bundle.odometry);
  }

  timed(timings, "evaluate", [&] {
    res.evaluated_trajectory = sol.trajectory;
    if (!bundle.ground_truth) return 0;
    const auto& gt = *bundle.ground_truth;
    std::vector<std::size_t> est_idx, gt_idx;
    for (std::size_t i = 0; i < sol.times.size(); ++i)
      if (auto j = match_time(gt, sol.times[i])) est_idx.push_back(i), gt_idx.push_back(*j);
    res.report.matched_poses = est_idx.size();
    if (est_idx.size() < 2) return 0;

    std::vector<Pose> truth, est, refined, dr;
    for (std::size_t k = 0; k < est_idx.size(); ++k) {
      truth.push_back(gt[gt_idx[k]].pose);
      est.push_back(sol.trajectory[est_idx[k]]);
      if (res.refined) refined.push_back(res.refined->poses[sol.col_indices[est_idx[k]]]);
    }
    std::set<int> anchor_ids;
    if (bundle.anchors && !options.metric_upgrade)
      for (const auto& a : *bundle.anchors) anchor_ids.insert(a.id);

    std::optional<ProcrustesResult> frame, refined_frame;
    if (options.metric_upgrade) {
      frame = procrustes_align(pose_positions(est), pose_positions(truth), true);
      res.report.procrustes_residual = frame->residual;
      res.evaluated_trajectory = rigid_all(*frame, sol.trajectory);
      est = rigid_all(*frame, est);
      if (res.refined) {
        refined_frame = procrustes_align(pose_positions(refined), pose_positions(truth), true);
        refined = rigid_all(*refined_frame, refined);
      }
    }
    res.report.spectral = rmse_segments(est, truth);
    if (res.refined) res.report.refined = rmse_segments(refined, truth);

    if (have_odometry) {
      const auto times = pose_times(bundle.odometry);
      if (auto j0 = match_time(gt, times.front())) {
        const auto path = dead_reckon(bundle.odometry, gt[*j0].pose);
        for (std::size_t k = 0; k < est_idx.size(); ++k) dr.push_back(path[sol.col_indices[est_idx[k]]]);
        res.report.dead_reckoning = rmse_segments(dr, truth);
      }
    }
    if (bundle.landmarks) {
      res.report.map_rmse = landmark_rmse(sol.map, *bundle.landmarks, anchor_ids, frame ? &*frame : nullptr);
      if (res.refined)
        res.report.refined_map_rmse = landmark_rmse(res.refined->landmarks, *bundle.landmarks, anchor_ids,
                                                    refined_frame ? &*refined_frame : nullptr);
    }
    return 0;
  });
  return res;
}

std::string report_json(const PipelineResult& r) {
  using nlohmann::ordered_json;
  auto seg = [](const SegmentRmse& s) {
    return ordered_json{{"full", s.full}, {"best10", s.best10}, {"worst10", s.worst10}, {"last10", s.last10}};
  };
  ordered_json j;
  j["rank"] = r.rank;
  j["frame"] = r.solution.frame == Frame::Anchored ? "anchored" : "up_to_orthogonal";
  j["landmarks"] = r.solution.map.size();
  j["poses"] = r.solution.trajectory.size();
  j["matched_poses"] = r.report.matched_poses;
  if (r.report.spectral) j["rmse"]["spectral"] = seg(*r.report.spectral);
  if (r.report.refined) j["rmse"]["refined"] = seg(*r.report.refined);
  if (r.report.dead_reckoning) j["rmse"]["dead_reckoning"] = seg(*r.report.dead_reckoning);
  if (r.report.map_rmse) j["map_rmse"]["spectral"] = *r.report.map_rmse;
  if (r.report.refined_map_rmse) j["map_rmse"]["refined"] = *r.report.refined_map_rmse;
  if (r.report.procrustes_residual) j["procrustes_residual"] = *r.report.procrustes_residual;
  if (r.refined) {
    j["gauss_newton"] = {{"iterations", r.refined->iterations},
                         {"converged", r.refined->converged},
                         {"initial_cost", r.refined->cost_history.front()},
                         {"final_cost", r.refined->cost_history.back()}};
  }
  return j.dump(2) + "\n";
}

void write_pipeline_outputs(const std::filesystem::path& dir, const DatasetBundle& bundle, const PipelineResult& r) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string());
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + (dir / name).string());
    return out;
  };
  auto timed_poses = [](const std::vector<double>& times, const std::vector<Pose>& poses) {
    std::vector<TimedPose> out;
    for (std::size_t i = 0; i < poses.size(); ++i) out.push_back({times[i], poses[i]});
    return out;
  };
  {
    auto out = open("map.csv");
    write_landmarks(out, r.solution.map);
  }
  {
    auto out = open("trajectory.csv");
    write_ground_truth(out, timed_poses(r.solution.times, r.solution.trajectory));
  }
  if (r.refined) {
    auto out = open("refined_map.csv");
    write_landmarks(out, r.refined->landmarks);
    auto traj = open("refined_trajectory.csv");
    write_ground_truth(traj, timed_poses(r.refined_times, r.refined->poses));
  }
  {
    auto out = open("report.json");
    out << report_json(r);
  }

  std::vector<PlotSeries> series;
  auto add = [&](const std::string& name, const std::vector<Pose>& poses, const char* color) {
    PlotSeries s{name, {}, {}, false, color};
    for (const auto& p : poses) s.x.push_back(p.x), s.y.push_back(p.y);
    series.push_back(std::move(s));
  };
  if (bundle.ground_truth) {
    std::vector<Pose> gt;
    for (const auto& p : *bundle.ground_truth) gt.push_back(p.pose);
    add("ground truth", gt, "#2ca02c");
  }
  if (!bundle.odometry.empty() && bundle.ground_truth && !bundle.ground_truth->empty())
    add("dead reckoning", dead_reckon(bundle.odometry, bundle.ground_truth->front().pose), "#7f7f7f");
  add("spectral", r.evaluated_trajectory, "#1f77b4");
  PlotSeries lm{"landmarks", {}, {}, true, "#d62728"};
  for (const auto& l : bundle.landmarks ? *bundle.landmarks : r.solution.map) lm.x.push_back(l.x), lm.y.push_back(l.y);
  series.push_back(std::move(lm));
  PlotOptions opts;
  opts.title = "Trajectory";
  opts.x_label = "x (m)";
  opts.y_label = "y (m)";
  opts.equal_aspect = true;
  write_plot(dir, "trajectory_plot", series, opts);
}

}  // namespace spectral_slam
