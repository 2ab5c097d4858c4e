#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "spectral_slam/baselines.hpp"
#include "spectral_slam/dataset.hpp"
#include "spectral_slam/dynamics.hpp"
#include "spectral_slam/eval.hpp"
#include "spectral_slam/pipeline.hpp"
#include "spectral_slam/svg.hpp"

using namespace spectral_slam;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct Common {
  int rank = 0;
  std::string anchors;
  bool metric_upgrade = false;
  std::uint64_t seed = 1;
  std::string out;
  std::size_t window = 100;
  std::size_t overlap = 50;
  std::string refine;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--rank", c.rank, "Measurement model rank (4 or 7); default 7 with odometry")
      ->check(CLI::IsMember({4, 7}));
  cmd->add_option("--anchors", c.anchors, "Anchor landmarks CSV (default: anchors.csv in the dataset)");
  cmd->add_flag("--metric-upgrade", c.metric_upgrade, "Recover a metric frame without anchors");
  cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--window", c.window, "Interpolation window (poses)");
  cmd->add_option("--overlap", c.overlap, "Interpolation window overlap (poses)");
  cmd->add_option("--refine", c.refine, "Refinement after the spectral solve")->check(CLI::IsMember({"gauss-newton"}));
}

DatasetBundle load(const std::string& dir, const Common& c) {
  DatasetBundle b = parse_dataset(dir);
  if (!c.anchors.empty()) {
    b.anchors = read_landmarks_file(c.anchors);
    validate_bundle(b);
  }
  return b;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

ordered_json segments_json(const SegmentRmse& s) {
  return {{"full", s.full}, {"best10", s.best10}, {"worst10", s.worst10}, {"last10", s.last10}};
}

std::vector<TimedPose> stamp(const std::vector<double>& times, const std::vector<Pose>& poses) {
  std::vector<TimedPose> out;
  for (std::size_t i = 0; i < poses.size(); ++i) out.push_back({times[i], poses[i]});
  return out;
}

// RMSE of a full-timeline estimate against whatever ground truth poses share its times.
std::optional<SegmentRmse> score(const std::vector<double>& times, const std::vector<Pose>& est,
                                 const DatasetBundle& b) {
  if (!b.ground_truth) return std::nullopt;
  std::map<double, Pose> gt;
  for (const auto& p : *b.ground_truth) gt[p.time] = p.pose;
  std::vector<Pose> e, t;
  for (std::size_t i = 0; i < est.size(); ++i)
    if (auto it = gt.find(times[i]); it != gt.end()) e.push_back(est[i]), t.push_back(it->second);
  if (e.empty()) return std::nullopt;
  return rmse_segments(e, t);
}

Pose start_pose(const DatasetBundle& b) {
  return b.ground_truth && !b.ground_truth->empty() ? b.ground_truth->front().pose : Pose{};
}

// ---------------------------------------------------------------- simulate

struct SimArgs {
  SimConfig config;
  std::string path = "random";
  bool plaza = false;
  std::size_t anchors = 4;
  std::string out;
};

int run_simulate(SimArgs& a, std::uint64_t seed) {
  SimConfig cfg = a.plaza ? plaza_like_config(seed) : a.config;
  if (!a.plaza) {
    cfg.seed = seed;
    cfg.path = a.path == "lawnmower" ? PathKind::Lawnmower : PathKind::RandomWalk;
  }
  const SimulatedRun run = simulate(cfg);
  const DatasetBundle b = bundle_from_run(run, a.anchors);
  write_dataset(a.out, b);
  const DatasetSummary s = summarize(b);
  ordered_json j{{"poses", run.trajectory.poses.size()},
                 {"odometry_steps", s.odometry_steps},
                 {"range_readings", s.range_readings},
                 {"landmarks", run.landmarks.size()},
                 {"anchors", s.anchors}};
  for (const auto& [id, g] : s.per_landmark)
    j["gaps"][std::to_string(id)] = {{"readings", g.readings}, {"mean_gap_steps", g.mean_gap_steps}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- slam

int run_slam(const std::string& data, const Common& c) {
  const DatasetBundle b = load(data, c);
  PipelineOptions o;
  o.rank = c.rank;
  o.metric_upgrade = c.metric_upgrade;
  o.refine_gauss_newton = c.refine == "gauss-newton";
  o.interpolation.window = c.window;
  o.interpolation.overlap = c.overlap;
  const PipelineResult r = run_pipeline(b, o);
  if (!c.out.empty()) write_pipeline_outputs(c.out, b, r);
  ordered_json j = ordered_json::parse(report_json(r));
  for (const auto& t : r.timings) j["timings_s"][t.stage] = t.seconds;
  j["timings_s"]["spectral_total"] = r.spectral_seconds();
  std::cout << j.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- sysid / filter

struct StateSequence {
  Eigen::MatrixXd states;
  std::vector<ControlVector> controls;
};

// States for consecutive poses starting at odometry step `first`. The last
// element carries the speed of the step into each pose, which is what the
// one-step map can predict; the first pose reuses its own step.
StateSequence states_from_poses(const std::vector<Pose>& poses, const std::vector<OdometryStep>& odo, std::size_t first) {
  if (poses.size() < 2 || first + poses.size() - 1 > odo.size())
    fail(ErrorCode::LengthMismatch, "poses run past the odometry");
  std::vector<double> v_out, v_in;
  for (std::size_t k = 0; k < poses.size(); ++k) {
    const std::size_t i = std::min(first + k, odo.size() - 1);
    v_out.push_back(odo[i].v);
    v_in.push_back(odo[i == 0 ? 0 : i - 1].v);
  }
  StateSequence s;
  s.states = build_state7(poses, v_out);
  lag_speed_term(s.states, v_out, v_in);
  for (std::size_t k = 0; k + 1 < poses.size(); ++k)
    s.controls.push_back(ControlVector::from_odometry(odo[first + k].v, odo[first + k].omega));
  return s;
}

StateSequence ground_truth_states(const DatasetBundle& b) {
  if (!b.ground_truth || b.odometry.empty()) fail(ErrorCode::InsufficientData, "ground truth and odometry are required");
  const auto& gt = *b.ground_truth;
  if (gt.size() != b.odometry.size() + 1) fail(ErrorCode::LengthMismatch, "ground truth must hold one pose per odometry step plus one");
  std::vector<Pose> poses;
  for (const auto& g : gt) poses.push_back(g.pose);
  return states_from_poses(poses, b.odometry, 0);
}

// With refinement the whole Gauss-Newton timeline is used. Otherwise the
// longest run of consecutive spectral poses, whose headings (differenced from
// noisy positions) are replaced by a fit to the odometry turn rates.
StateSequence solution_states(const DatasetBundle& b, const Common& c) {
  PipelineOptions o;
  o.rank = 7;
  o.metric_upgrade = c.metric_upgrade;
  o.refine_gauss_newton = c.refine == "gauss-newton";
  o.interpolation.window = c.window;
  o.interpolation.overlap = c.overlap;
  const PipelineResult r = run_pipeline(b, o);
  if (r.refined) return states_from_poses(r.refined->poses, b.odometry, 0);
  const SlamSolution& sol = r.solution;
  const auto& idx = sol.col_indices;
  std::size_t best_lo = 0, best_len = 0;
  for (std::size_t lo = 0; lo < idx.size();) {
    std::size_t hi = lo + 1;
    while (hi < idx.size() && idx[hi] == idx[hi - 1] + 1) ++hi;
    if (hi - lo > best_len) best_lo = lo, best_len = hi - lo;
    lo = hi;
  }
  const auto lo = static_cast<std::ptrdiff_t>(best_lo), len = static_cast<std::ptrdiff_t>(best_len);
  const std::vector<Pose> run(sol.trajectory.begin() + lo, sol.trajectory.begin() + lo + len);
  const auto first = b.odometry.begin() + static_cast<std::ptrdiff_t>(idx[best_lo]);
  return states_from_poses(odometry_headings(run, {first, first + len - 1}), b.odometry, idx[best_lo]);
}

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
  write_text(path, out.str());
}

Eigen::MatrixXd read_matrix_csv(const fs::path& path, Eigen::Index rows, Eigen::Index cols) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  Eigen::MatrixXd m(rows, cols);
  std::string line;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw SlamError(ErrorCode::ParseError, "too few rows", static_cast<int>(i + 1));
    std::stringstream ss(line);
    std::string field;
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!std::getline(ss, field, ','))
        throw SlamError(ErrorCode::ParseError, "too few columns", static_cast<int>(i + 1));
      try {
        m(i, j) = std::stod(field);
      } catch (...) {
        throw SlamError(ErrorCode::ParseError, "not a number: '" + field + "'", static_cast<int>(i + 1));
      }
    }
  }
  return m;
}

int run_sysid(const std::string& data, const Common& c, bool from_truth, double ridge) {
  const DatasetBundle b = load(data, c);
  const StateSequence seq = from_truth ? ground_truth_states(b) : solution_states(b, c);
  LearnOptions lo;
  lo.ridge = ridge;
  const DynamicsModel model = learn_dynamics(seq.states, seq.controls, lo);
  double sq = 0.0, nominal_sq = 0.0;
  const Eigen::MatrixXd nominal = nominal_model();
  for (std::size_t t = 0; t < seq.controls.size(); ++t) {
    const State7 s = seq.states.col(static_cast<Eigen::Index>(t));
    const State7 next = seq.states.col(static_cast<Eigen::Index>(t + 1));
    sq += (model.predict(s, seq.controls[t]) - next).squaredNorm();
    nominal_sq += (nominal * feature_map(s, seq.controls[t]) - next).squaredNorm();
  }
  const double n = std::max<double>(1.0, static_cast<double>(seq.controls.size()));
  if (!c.out.empty()) {
    ensure_dir(c.out);
    write_matrix_csv(fs::path(c.out) / "dynamics.csv", model.N);
  }
  ordered_json j{{"samples", seq.controls.size()},
                 {"effective_rank", model.effective_rank},
                 {"one_step_rms", std::sqrt(sq / n)},
                 {"nominal_one_step_rms", std::sqrt(nominal_sq / n)},
                 {"coefficient_gap_to_nominal", (model.N - nominal).norm()}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

int run_filter(const std::string& data, const Common& c, const std::string& model_file, double range_frac,
               double process_sigma) {
  const DatasetBundle b = load(data, c);
  if (b.odometry.empty()) fail(ErrorCode::InsufficientData, "filtering needs odometry");
  const std::vector<Landmark> map = b.landmarks ? *b.landmarks : (b.anchors ? *b.anchors : std::vector<Landmark>{});
  if (map.empty()) fail(ErrorCode::InsufficientData, "filtering needs a landmark map (landmarks.csv or anchors)");
  DynamicsModel model;
  model.N = model_file.empty() ? nominal_model() : read_matrix_csv(model_file, 7, kFeatures);

  std::vector<int> ids;
  for (const auto& l : map) ids.push_back(l.id);
  const std::vector<double> times = pose_times(b.odometry);
  std::vector<RangeReading> known;
  for (const auto& r : b.ranges)
    if (std::find(ids.begin(), ids.end(), r.landmark_id) != ids.end()) known.push_back(r);
  const RangeGrid grid = observed_grid(known, times, ids);
  const Eigen::MatrixXd C = observation_matrix7(map);
  const auto n = static_cast<Eigen::Index>(map.size());

  const Pose p0 = start_pose(b);
  Belief belief;
  const Pose p1 = kinematic_step(p0, b.odometry[0].v, b.odometry[0].omega);
  belief.mean = pose_to_col7(p0, p1, b.odometry[0].v, 0.0);
  belief.covariance = Matrix7::Identity() * 1e-6;
  const Matrix7 Q = Matrix7::Identity() * process_sigma * process_sigma;

  std::vector<Pose> est;
  for (std::size_t t = 0; t < b.odometry.size(); ++t) {
    const auto tc = static_cast<Eigen::Index>(t);
    const double v = b.odometry[t].v;
    if (t + 1 < b.odometry.size() && std::abs(v) > kDefaultVelocityFloor && grid.mask.col(tc).all() &&
        grid.mask.col(tc + 1).all()) {
      Eigen::VectorXd o(2 * n);
      o.head(n) = grid.values.col(tc);
      o.tail(n) = (grid.values.col(tc + 1) - grid.values.col(tc)) / v;
      Eigen::VectorXd r(2 * n);
      for (Eigen::Index k = 0; k < n; ++k) {
        const double sd = range_frac * 2.0 * grid.values(k, tc) + 1e-3;
        r(k) = sd * sd;
        r(n + k) = 2.0 * sd * sd / (v * v);
      }
      // The observation model wants the outgoing step's speed in the last element.
      const double shift = 0.5 * (v - (t == 0 ? v : b.odometry[t - 1].v));
      belief.mean(6) += shift;
      belief = ekf_update(belief, o, C, r.asDiagonal().toDenseMatrix());
      belief.mean(6) -= shift;
    }
    est.push_back({-belief.mean(1), -belief.mean(2), std::atan2(-belief.mean(5), -belief.mean(4))});
    belief = ekf_predict(belief, ControlVector::from_odometry(v, b.odometry[t].omega), model, Q);
  }
  std::vector<double> est_times(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(est.size()));
  if (!c.out.empty()) {
    ensure_dir(c.out);
    std::ofstream out(fs::path(c.out) / "trajectory.csv", std::ios::binary);
    write_ground_truth(out, stamp(est_times, est));
  }
  ordered_json j{{"poses", est.size()}};
  if (auto s = score(est_times, est, b)) j["rmse"] = segments_json(*s);
  std::cout << j.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- baselines

int run_baseline(const std::string& method, const std::string& data, const Common& c) {
  const DatasetBundle b = load(data, c);
  if (b.odometry.empty()) fail(ErrorCode::InsufficientData, "baselines need odometry");
  const std::vector<double> times = pose_times(b.odometry);
  const Pose p0 = start_pose(b);
  const std::vector<Pose> dr = dead_reckoning_baseline(b.odometry, p0);
  std::vector<Pose> est = dr;
  std::vector<Landmark> map;
  ordered_json j{{"method", method}};

  if (method != "dead-reckon") {
    std::vector<int> anchor_ids;
    if (b.anchors)
      for (const auto& a : *b.anchors) anchor_ids.push_back(a.id);
    std::vector<Landmark> init = landmarks_from_path(dr, times, b.ranges);
    for (auto& l : init)
      if (b.anchors)
        for (const auto& a : *b.anchors)
          if (a.id == l.id) l = a;
    if (method == "ekf") {
      std::vector<LandmarkPrior> priors;
      for (const auto& l : init) {
        const bool anchored = std::find(anchor_ids.begin(), anchor_ids.end(), l.id) != anchor_ids.end();
        priors.push_back({l, Eigen::Matrix2d::Identity() * (anchored ? 1e-6 : 4.0)});
      }
      const EkfResult r = cartesian_ekf(b.ranges, b.odometry, p0, priors);
      est = r.trajectory;
      map = r.landmarks;
    } else {
      GaussNewtonOptions o;
      o.fixed_landmarks = anchor_ids;
      const GaussNewtonResult r = batch_gauss_newton(dr, init, b.ranges, b.odometry, o);
      est = r.poses;
      map = r.landmarks;
      j["iterations"] = r.iterations;
      j["converged"] = r.converged;
      j["final_cost"] = r.cost_history.back();
    }
  }
  if (!c.out.empty()) {
    ensure_dir(c.out);
    std::ofstream out(fs::path(c.out) / "trajectory.csv", std::ios::binary);
    write_ground_truth(out, stamp(times, est));
    if (!map.empty()) {
      std::ofstream m(fs::path(c.out) / "map.csv", std::ios::binary);
      write_landmarks(m, map);
    }
  }
  if (auto s = score(times, est, b)) j["rmse"] = segments_json(*s);
  std::cout << j.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- eval

int run_eval(const std::string& estimate, const std::string& truth, bool procrustes, bool reflection) {
  const auto est = read_ground_truth_file(estimate);
  const auto gt = read_ground_truth_file(truth);
  std::map<double, Pose> by_time;
  for (const auto& p : gt) by_time[p.time] = p.pose;
  std::vector<Pose> e, t;
  for (const auto& p : est)
    if (auto it = by_time.find(p.time); it != by_time.end()) e.push_back(p.pose), t.push_back(it->second);
  if (e.empty()) fail(ErrorCode::LengthMismatch, "no matching timestamps between estimate and truth");
  ordered_json j{{"matched_poses", e.size()}};
  if (procrustes) {
    const auto pr = procrustes_align(pose_positions(e), pose_positions(t), reflection);
    for (std::size_t i = 0; i < e.size(); ++i) {
      e[i].x = pr.aligned(static_cast<Eigen::Index>(i), 0);
      e[i].y = pr.aligned(static_cast<Eigen::Index>(i), 1);
    }
    j["procrustes_residual"] = pr.residual;
  }
  j["rmse"] = segments_json(rmse_segments(e, t));
  std::cout << j.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- convergence / bound

int run_convergence(ConvergenceConfig& cfg, double noise, const Common& c) {
  cfg.base.range_noise_frac = noise;
  cfg.seed = c.seed;
  if (c.rank) cfg.rank = c.rank;
  const ConvergenceResult r = convergence_study(cfg);
  ordered_json j;
  std::ostringstream csv;
  csv << "T,mean,median,ci95,failures\n";
  PlotSeries mean{"mean error", {}, {}, false, "#1f77b4"};
  for (const auto& p : r.points) {
    j["points"].push_back({{"T", p.T}, {"mean", p.mean}, {"median", p.median}, {"ci95", p.ci95}, {"failures", p.failures}});
    csv << p.T << ',' << format_double(p.mean) << ',' << format_double(p.median) << ',' << format_double(p.ci95) << ','
        << p.failures << '\n';
    mean.x.push_back(static_cast<double>(p.T));
    mean.y.push_back(p.mean);
  }
  j["slope"] = r.slope;
  j["slope_ci95"] = r.slope_ci95;
  j["floor_limited"] = r.floor_limited;
  j["strictly_decreasing"] = r.strictly_decreasing;
  if (!c.out.empty()) {
    ensure_dir(c.out);
    write_text(fs::path(c.out) / "convergence_table.csv", csv.str());
    PlotOptions po;
    po.title = "Map error vs T";
    po.x_label = "T";
    po.y_label = "mean map error";
    po.log_x = po.log_y = true;
    write_plot(c.out, "convergence", {mean}, po);
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int run_bound(double n, double cval, double gamma, double T, bool empirical, SimConfig sim, std::size_t trials,
              std::uint64_t seed) {
  ordered_json j;
  if (empirical) {
    sim.noise_kind = NoiseKind::Uniform;
    const BoundCheckResult r = empirical_bound_check(sim, trials, seed);
    j["trials"] = r.trials.size();
    j["violation_fraction"] = r.violation_fraction;
    j["failure_probability"] = r.failure_probability;
    std::vector<double> s;
    for (const auto& t : r.trials) s.push_back(t.sin_psi);
    std::sort(s.begin(), s.end());
    if (!s.empty()) j["median_sin_psi"] = s[s.size() / 2];
  } else {
    const BoundValue v = theoretical_bound(n, cval, gamma, T);
    j["bound"] = v.bound;
    j["failure_probability"] = v.failure_probability;
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Range-only SLAM by low-rank factorization"};
  app.require_subcommand(1);
  Common common;

  SimArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Generate a synthetic dataset directory");
  add_common(simulate_cmd, common);
  simulate_cmd->add_option("--landmarks", sim.config.n_landmarks, "Number of landmarks");
  simulate_cmd->add_option("--steps", sim.config.n_steps, "Number of poses");
  simulate_cmd->add_option("--arena", sim.config.arena, "Half-width of the landmark area (m)");
  simulate_cmd->add_option("--noise", sim.config.range_noise_frac, "Range noise as a fraction of range");
  simulate_cmd->add_option("--dropout", sim.config.dropout_prob, "Probability a reading is missing");
  simulate_cmd->add_option("--sigma-v", sim.config.sigma_v, "Odometry translation noise (m)");
  simulate_cmd->add_option("--sigma-omega", sim.config.sigma_omega, "Odometry rotation noise (rad)");
  simulate_cmd->add_option("--path", sim.path, "Path shape")->check(CLI::IsMember({"random", "lawnmower"}));
  simulate_cmd->add_option("--anchor-count", sim.anchors, "Landmarks written to anchors.csv");
  simulate_cmd->add_flag("--plaza", sim.plaza, "Use the Plaza-like preset (ignores shape options)");

  std::string data;
  auto* slam_cmd = app.add_subcommand("slam", "Run the spectral pipeline on a dataset directory");
  add_common(slam_cmd, common);
  slam_cmd->add_option("data", data, "Dataset directory")->required();

  bool from_truth = false;
  double ridge = 0.0;
  auto* sysid_cmd = app.add_subcommand("sysid", "Learn unicycle dynamics in state space");
  add_common(sysid_cmd, common);
  sysid_cmd->add_option("data", data, "Dataset directory")->required();
  sysid_cmd->add_flag("--from-ground-truth", from_truth, "Learn from ground-truth states instead of the SLAM solution");
  sysid_cmd->add_option("--ridge", ridge, "Relative ridge weight");

  std::string model_file;
  double filter_noise = 0.01, process_sigma = 1e-3;
  auto* filter_cmd = app.add_subcommand("filter", "EKF tracking with a learned or nominal dynamics model");
  add_common(filter_cmd, common);
  filter_cmd->add_option("data", data, "Dataset directory")->required();
  filter_cmd->add_option("--model", model_file, "Dynamics CSV written by sysid (default: nominal model)");
  filter_cmd->add_option("--noise", filter_noise, "Assumed range noise fraction");
  filter_cmd->add_option("--process-sigma", process_sigma, "Process noise per state element");

  std::string method;
  auto* baseline_cmd = app.add_subcommand("baseline", "Dead reckoning, Cartesian EKF or batch Gauss-Newton");
  add_common(baseline_cmd, common);
  baseline_cmd->add_option("method", method, "dead-reckon, ekf or gauss-newton")
      ->required()
      ->check(CLI::IsMember({"dead-reckon", "ekf", "gauss-newton"}));
  baseline_cmd->add_option("data", data, "Dataset directory")->required();

  std::string estimate, truth;
  bool procrustes = false, reflection = false;
  auto* eval_cmd = app.add_subcommand("eval", "Score a trajectory CSV against ground truth");
  eval_cmd->add_option("--estimate", estimate, "Estimated trajectory CSV")->required();
  eval_cmd->add_option("--truth", truth, "Ground-truth trajectory CSV")->required();
  eval_cmd->add_flag("--procrustes", procrustes, "Align rigidly before scoring");
  eval_cmd->add_flag("--reflection", reflection, "Allow a reflection in the alignment");

  ConvergenceConfig conv;
  double conv_noise = 0.01;
  auto* conv_cmd = app.add_subcommand("convergence", "Map error versus number of poses");
  add_common(conv_cmd, common);
  conv_cmd->add_option("--trials", conv.trials, "Trials per grid point");
  conv_cmd->add_option("--noise", conv_noise, "Range noise fraction");
  conv_cmd->add_option("--t-grid", conv.t_grid, "Pose counts");
  conv_cmd->add_option("--landmarks", conv.base.n_landmarks, "Number of landmarks");

  double bn = 6, bc = 1, bgamma = 1, bT = 1e4;
  bool empirical = false;
  std::size_t bound_trials = 200;
  SimConfig bound_sim;
  bound_sim.n_steps = 10000;
  auto* bound_cmd = app.add_subcommand("bound", "Subspace-angle bound, evaluated or checked by simulation");
  add_common(bound_cmd, common);
  bound_cmd->add_option("--N", bn, "Landmarks");
  bound_cmd->add_option("--c", bc, "Noise bound");
  bound_cmd->add_option("--gamma", bgamma, "Smallest nonzero eigenvalue");
  bound_cmd->add_option("--T", bT, "Samples");
  bound_cmd->add_flag("--empirical", empirical, "Measure violations over simulated trials");
  bound_cmd->add_option("--trials", bound_trials, "Trials for --empirical");
  bound_cmd->add_option("--steps", bound_sim.n_steps, "Poses per trial for --empirical");
  bound_cmd->add_option("--noise", bound_sim.range_noise_frac, "Range noise fraction for --empirical");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate_cmd) {
      if (common.out.empty()) fail(ErrorCode::InvalidConfig, "simulate needs --out");
      sim.out = common.out;
      return run_simulate(sim, common.seed);
    }
    if (*slam_cmd) return run_slam(data, common);
    if (*sysid_cmd) return run_sysid(data, common, from_truth, ridge);
    if (*filter_cmd) return run_filter(data, common, model_file, filter_noise, process_sigma);
    if (*baseline_cmd) return run_baseline(method, data, common);
    if (*eval_cmd) return run_eval(estimate, truth, procrustes, reflection);
    if (*conv_cmd) return run_convergence(conv, conv_noise, common);
    if (*bound_cmd) return run_bound(bn, bc, bgamma, bT, empirical, bound_sim, bound_trials, common.seed);
  } catch (const SlamError& e) {
    std::cerr << "error";
    if (!e.stage().empty()) std::cerr << " in stage " << e.stage();
    std::cerr << ": " << to_string(e.code());
    if (e.line()) std::cerr << " (line " << *e.line() << ")";
    std::cerr << ": " << e.detail() << '\n';
    return is_input_error(e.code()) ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
