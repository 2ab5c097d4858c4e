#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "spectral_slam/dataset.hpp"
#include "spectral_slam/pipeline.hpp"

using namespace spectral_slam;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("spectral_slam_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

template <class Fn>
SlamError error_of(Fn&& fn) {
  try {
    fn();
  } catch (const SlamError& e) {
    return e;
  }
  ADD_FAILURE() << "no error thrown";
  return SlamError(ErrorCode::IoError, "none");
}

}  // namespace

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(-1.5e-7), "-1.5e-07");
  for (double v : {1.0 / 3.0, 12345.678901234567, 6.02214076e23, -0.0}) EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(Ranges, ThreeLinesSorted) {
  std::istringstream in("time_s,landmark_id,range_m\n2.5,1,3.0\n0.5,2,4.25\n1,1,2\n");
  DatasetBundle b;
  b.ranges = read_ranges(in);
  ASSERT_EQ(b.ranges.size(), 3u);
  validate_bundle(b);
  EXPECT_EQ(b.ranges[0].time, 0.5);
  EXPECT_EQ(b.ranges[0].landmark_id, 2);
  EXPECT_EQ(b.ranges[1].time, 1.0);
  EXPECT_EQ(b.ranges[2].range, 3.0);
}

TEST(Ranges, NonNumericFieldReportsLine) {
  std::istringstream in(
      "time_s,landmark_id,range_m\n0,1,1\n1,1,1\n2,1,1\n3,1,1\n4,1,1\n5,1,abc\n6,1,1\n");
  const SlamError e = error_of([&] { read_ranges(in); });
  EXPECT_EQ(e.code(), ErrorCode::ParseError);
  ASSERT_TRUE(e.line().has_value());
  EXPECT_EQ(*e.line(), 7);
}

TEST(Ranges, WrongFieldCount) {
  std::istringstream in("time_s,landmark_id,range_m\n0,1\n");
  const SlamError e = error_of([&] { read_ranges(in); });
  EXPECT_EQ(e.code(), ErrorCode::ParseError);
  EXPECT_EQ(*e.line(), 2);
}

TEST(Schema, WrongHeader) {
  std::istringstream in("t,id,r\n0,1,1\n");
  EXPECT_EQ(error_of([&] { read_ranges(in); }).code(), ErrorCode::SchemaError);
  std::istringstream empty("");
  EXPECT_EQ(error_of([&] { read_odometry(empty); }).code(), ErrorCode::SchemaError);
}

TEST(Schema, DuplicateLandmark) {
  std::istringstream in("landmark_id,x_m,y_m\n1,0,0\n1,2,2\n");
  const SlamError e = error_of([&] { read_landmarks(in); });
  EXPECT_EQ(e.code(), ErrorCode::SchemaError);
  EXPECT_EQ(*e.line(), 3);
}

TEST(Schema, AnchorWithoutReadings) {
  DatasetBundle b;
  b.ranges = {{0, 1, 1.0}};
  b.anchors = std::vector<Landmark>{{1, 0, 0}, {7, 1, 1}};
  EXPECT_EQ(error_of([&] { validate_bundle(b); }).code(), ErrorCode::SchemaError);
}

TEST(Schema, RangesToUnknownLandmark) {
  DatasetBundle b;
  b.ranges = {{0, 1, 1.0}, {1, 9, 2.0}};
  b.landmarks = std::vector<Landmark>{{1, 0, 0}};
  EXPECT_EQ(error_of([&] { validate_bundle(b); }).code(), ErrorCode::SchemaError);
}

TEST(Io, MissingDirectoryAndFile) {
  EXPECT_EQ(error_of([] { parse_dataset("/nonexistent/spectral_slam"); }).code(), ErrorCode::IoError);
  const fs::path d = scratch_dir("empty");
  EXPECT_EQ(error_of([&] { parse_dataset(d); }).code(), ErrorCode::IoError);
}

TEST(Io, FileErrorsNameTheFile) {
  const fs::path d = scratch_dir("badfile");
  spit(d / kRangesFile, "time_s,landmark_id,range_m\n0,1,x\n");
  const SlamError e = error_of([&] { parse_dataset(d); });
  EXPECT_EQ(e.code(), ErrorCode::ParseError);
  EXPECT_NE(e.detail().find("ranges.csv"), std::string::npos);
}

TEST(RoundTrip, ByteIdentical) {
  SimConfig c;
  c.n_steps = 200;
  c.sigma_v = c.sigma_omega = 0.01;
  c.dropout_prob = 0.3;
  const DatasetBundle b = bundle_from_run(simulate(c), 4);
  const fs::path first = scratch_dir("rt1"), second = scratch_dir("rt2");
  write_dataset(first, b);
  write_dataset(second, parse_dataset(first));
  for (const char* f : {kRangesFile, kOdometryFile, kGroundTruthFile, kAnchorsFile, kLandmarksFile}) {
    ASSERT_TRUE(fs::exists(first / f)) << f;
    EXPECT_EQ(slurp(first / f), slurp(second / f)) << f;
  }
}

TEST(RoundTrip, ValuesSurviveExactly) {
  SimConfig c;
  c.n_steps = 50;
  const DatasetBundle b = bundle_from_run(simulate(c), 4);
  const fs::path d = scratch_dir("values");
  write_dataset(d, b);
  const DatasetBundle r = parse_dataset(d);
  ASSERT_EQ(r.ranges.size(), b.ranges.size());
  for (std::size_t i = 0; i < b.ranges.size(); ++i) {
    EXPECT_EQ(r.ranges[i].time, b.ranges[i].time);
    EXPECT_EQ(r.ranges[i].range, b.ranges[i].range);
  }
  EXPECT_EQ(r.ground_truth->back().pose.theta, b.ground_truth->back().pose.theta);
}

TEST(Summary, PlazaScaleBundle) {
  const DatasetBundle b = bundle_from_run(simulate(plaza_like_config(7)), 4);
  const DatasetSummary s = summarize(b);
  EXPECT_NEAR(static_cast<double>(s.odometry_steps), 9658.0, 1.0);
  EXPECT_NEAR(static_cast<double>(s.range_readings), 3529.0, 350.0);
  EXPECT_EQ(s.anchors, 4u);
  ASSERT_EQ(s.per_landmark.size(), 4u);
  for (const auto& [id, g] : s.per_landmark) {
    EXPECT_GT(g.mean_gap_steps, 8.0) << id;
    EXPECT_LT(g.mean_gap_steps, 14.0) << id;
    EXPECT_GE(g.max_gap_s, g.mean_gap_s);
  }
}
