#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spectral_slam/baselines.hpp"
#include "spectral_slam/dataset.hpp"
#include "spectral_slam/eval.hpp"
#include "spectral_slam/metric_upgrade.hpp"

namespace spectral_slam {

struct PipelineOptions {
  int rank = 0;  // 0 picks 7 when odometry is present, else 4
  bool metric_upgrade = false;
  bool refine_gauss_newton = false;
  InterpolationOptions interpolation;
  double velocity_floor = kDefaultVelocityFloor;
  AlignmentOptions alignment;
  UpgradeTolerances upgrade;
  GaussNewtonOptions gauss_newton;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct EvalReport {
  std::size_t matched_poses = 0;
  std::optional<SegmentRmse> spectral;
  std::optional<SegmentRmse> refined;
  std::optional<SegmentRmse> dead_reckoning;
  std::optional<double> map_rmse;          // non-anchor landmarks
  std::optional<double> refined_map_rmse;
  std::optional<double> procrustes_residual;  // metric upgrade only
};

struct PipelineResult {
  int rank = 0;
  SlamSolution solution;
  std::optional<GaussNewtonResult> refined;
  std::vector<double> refined_times;
  // Estimate mapped into the ground-truth frame (identity when anchored).
  std::vector<Pose> evaluated_trajectory;
  std::vector<StageTiming> timings;
  EvalReport report;

  // Interpolation through alignment or metric upgrade.
  double spectral_seconds() const;
};

// Dataset view of a simulation; the first n_anchors landmarks become anchors.
DatasetBundle bundle_from_run(const SimulatedRun& run, std::size_t n_anchors = 4);

// interpolate -> build matrix -> factorize -> align or metric upgrade ->
// optional Gauss-Newton refinement -> evaluation against ground truth.
// Errors are rethrown tagged with the failing stage.
PipelineResult run_pipeline(const DatasetBundle& bundle, const PipelineOptions& options = {});

// Gauss-Newton start on the full pose timeline: poses reached by the spectral
// solution are used directly and the gaps are filled by propagating odometry.
std::vector<Pose> fill_pose_timeline(const SlamSolution& solution, const std::vector<OdometryStep>& odometry);

// Headings from integrated odometry turn rates, offset per pose by the
// length-weighted circular mean of (displacement direction - integrated turn)
// over +-window steps. Positions are kept.
std::vector<Pose> odometry_headings(const std::vector<Pose>& poses, const std::vector<OdometryStep>& odometry,
                                    std::size_t window = 25);

// map.csv, trajectory.csv (plus refined_* when refined), report.json and
// the trajectory overlay plot. Timings are deliberately left out so that
// fixed inputs give identical files.
void write_pipeline_outputs(const std::filesystem::path& directory, const DatasetBundle& bundle,
                            const PipelineResult& result);

std::string report_json(const PipelineResult& result);

}  // namespace spectral_slam
