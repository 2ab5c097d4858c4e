#include "spectral_slam/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace spectral_slam {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

struct CsvRow {
  int line = 0;
  std::vector<std::string_view> fields;
};

// Reads a whole CSV stream, checks the header and splits each data line.
class CsvReader {
 public:
  CsvReader(std::istream& in, const std::string& header) {
    std::string line;
    int n = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
      ++n;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!have_header) {
        if (line != header) fail_schema("expected header '" + header + "', got '" + line + "'", n);
        have_header = true;
        continue;
      }
      if (line.empty()) continue;
      lines_.push_back({n, std::move(line)});
    }
    if (!have_header) fail_schema("missing header '" + header + "'", 1);
    columns_ = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
  }

  template <class Fn>
  void each(Fn&& fn) const {
    for (const auto& [n, text] : lines_) {
      CsvRow row{n, {}};
      std::string_view rest(text);
      for (;;) {
        const auto comma = rest.find(',');
        row.fields.push_back(rest.substr(0, comma));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
      if (row.fields.size() != columns_)
        throw SlamError(ErrorCode::ParseError,
                        "expected " + std::to_string(columns_) + " fields, got " + std::to_string(row.fields.size()), n);
      fn(row);
    }
  }

  std::size_t size() const { return lines_.size(); }

 private:
  [[noreturn]] static void fail_schema(const std::string& msg, int line) {
    throw SlamError(ErrorCode::SchemaError, msg, line);
  }

  std::vector<std::pair<int, std::string>> lines_;
  std::size_t columns_ = 0;
};

double to_double(const CsvRow& row, std::size_t i) {
  const std::string_view f = row.fields[i];
  double v = 0.0;
  const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
  if (res.ec != std::errc{} || res.ptr != f.data() + f.size() || !std::isfinite(v))
    throw SlamError(ErrorCode::ParseError, "not a finite number: '" + std::string(f) + "'", row.line);
  return v;
}

int to_int(const CsvRow& row, std::size_t i) {
  const std::string_view f = row.fields[i];
  int v = 0;
  const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
  if (res.ec != std::errc{} || res.ptr != f.data() + f.size())
    throw SlamError(ErrorCode::ParseError, "not an integer id: '" + std::string(f) + "'", row.line);
  return v;
}

template <class T>
void sort_by_time(std::vector<T>& v) {
  std::stable_sort(v.begin(), v.end(), [](const T& a, const T& b) { return a.time < b.time; });
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

template <class Reader>
auto with_path(const std::filesystem::path& path, Reader reader) {
  auto in = open_in(path);
  try {
    return reader(in);
  } catch (const SlamError& e) {
    throw SlamError(e.code(), path.filename().string() + ": " + e.detail(), e.line());
  }
}

}  // namespace

std::vector<RangeReading> read_ranges(std::istream& in) {
  CsvReader csv(in, kRangesHeader);
  std::vector<RangeReading> out;
  out.reserve(csv.size());
  csv.each([&](const CsvRow& r) {
    RangeReading rr{to_double(r, 0), to_int(r, 1), to_double(r, 2)};
    if (rr.range < 0.0) throw SlamError(ErrorCode::ParseError, "negative range", r.line);
    out.push_back(rr);
  });
  sort_by_time(out);
  return out;
}

std::vector<OdometryStep> read_odometry(std::istream& in) {
  CsvReader csv(in, kOdometryHeader);
  std::vector<OdometryStep> out;
  out.reserve(csv.size());
  csv.each([&](const CsvRow& r) { out.push_back({to_double(r, 0), to_double(r, 1), to_double(r, 2)}); });
  sort_by_time(out);
  return out;
}

std::vector<TimedPose> read_ground_truth(std::istream& in) {
  CsvReader csv(in, kGroundTruthHeader);
  std::vector<TimedPose> out;
  out.reserve(csv.size());
  csv.each([&](const CsvRow& r) { out.push_back({to_double(r, 0), {to_double(r, 1), to_double(r, 2), to_double(r, 3)}}); });
  sort_by_time(out);
  return out;
}

std::vector<Landmark> read_landmarks(std::istream& in) {
  CsvReader csv(in, kLandmarksHeader);
  std::vector<Landmark> out;
  std::set<int> seen;
  csv.each([&](const CsvRow& r) {
    Landmark lm{to_int(r, 0), to_double(r, 1), to_double(r, 2)};
    if (!seen.insert(lm.id).second)
      throw SlamError(ErrorCode::SchemaError, "duplicate landmark id " + std::to_string(lm.id), r.line);
    out.push_back(lm);
  });
  return out;
}

void write_ranges(std::ostream& out, const std::vector<RangeReading>& ranges) {
  out << kRangesHeader << '\n';
  for (const auto& r : ranges) out << format_double(r.time) << ',' << r.landmark_id << ',' << format_double(r.range) << '\n';
}

void write_odometry(std::ostream& out, const std::vector<OdometryStep>& odometry) {
  out << kOdometryHeader << '\n';
  for (const auto& o : odometry) out << format_double(o.time) << ',' << format_double(o.v) << ',' << format_double(o.omega) << '\n';
}

void write_ground_truth(std::ostream& out, const std::vector<TimedPose>& poses) {
  out << kGroundTruthHeader << '\n';
  for (const auto& p : poses)
    out << format_double(p.time) << ',' << format_double(p.pose.x) << ',' << format_double(p.pose.y) << ','
        << format_double(p.pose.theta) << '\n';
}

void write_landmarks(std::ostream& out, const std::vector<Landmark>& landmarks) {
  out << kLandmarksHeader << '\n';
  for (const auto& l : landmarks) out << l.id << ',' << format_double(l.x) << ',' << format_double(l.y) << '\n';
}

std::vector<RangeReading> read_ranges_file(const std::filesystem::path& path) {
  return with_path(path, [](std::istream& in) { return read_ranges(in); });
}
std::vector<OdometryStep> read_odometry_file(const std::filesystem::path& path) {
  return with_path(path, [](std::istream& in) { return read_odometry(in); });
}
std::vector<TimedPose> read_ground_truth_file(const std::filesystem::path& path) {
  return with_path(path, [](std::istream& in) { return read_ground_truth(in); });
}
std::vector<Landmark> read_landmarks_file(const std::filesystem::path& path) {
  return with_path(path, [](std::istream& in) { return read_landmarks(in); });
}

void validate_bundle(DatasetBundle& b) {
  sort_by_time(b.ranges);
  sort_by_time(b.odometry);
  if (b.ground_truth) sort_by_time(*b.ground_truth);
  std::set<int> observed;
  for (const auto& r : b.ranges) observed.insert(r.landmark_id);
  if (b.anchors)
    for (const auto& a : *b.anchors)
      if (!observed.count(a.id)) fail(ErrorCode::SchemaError, "anchor " + std::to_string(a.id) + " has no range readings");
  if (b.landmarks) {
    std::set<int> known;
    for (const auto& l : *b.landmarks) known.insert(l.id);
    for (int id : observed)
      if (!known.count(id)) fail(ErrorCode::SchemaError, "ranges refer to unknown landmark " + std::to_string(id));
  }
}

DatasetBundle parse_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorCode::IoError, "not a directory: " + dir.string());
  DatasetBundle b;
  b.ranges = read_ranges_file(dir / kRangesFile);
  if (std::filesystem::exists(dir / kOdometryFile)) b.odometry = read_odometry_file(dir / kOdometryFile);
  if (std::filesystem::exists(dir / kGroundTruthFile)) b.ground_truth = read_ground_truth_file(dir / kGroundTruthFile);
  if (std::filesystem::exists(dir / kAnchorsFile)) b.anchors = read_landmarks_file(dir / kAnchorsFile);
  if (std::filesystem::exists(dir / kLandmarksFile)) b.landmarks = read_landmarks_file(dir / kLandmarksFile);
  validate_bundle(b);
  return b;
}

void write_dataset(const std::filesystem::path& dir, const DatasetBundle& b) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string());
  {
    auto out = open_out(dir / kRangesFile);
    write_ranges(out, b.ranges);
  }
  if (!b.odometry.empty()) {
    auto out = open_out(dir / kOdometryFile);
    write_odometry(out, b.odometry);
  }
  if (b.ground_truth) {
    auto out = open_out(dir / kGroundTruthFile);
    write_ground_truth(out, *b.ground_truth);
  }
  if (b.anchors) {
    auto out = open_out(dir / kAnchorsFile);
    write_landmarks(out, *b.anchors);
  }
  if (b.landmarks) {
    auto out = open_out(dir / kLandmarksFile);
    write_landmarks(out, *b.landmarks);
  }
}

DatasetSummary summarize(const DatasetBundle& b) {
  DatasetSummary s;
  s.range_readings = b.ranges.size();
  s.odometry_steps = b.odometry.size();
  s.ground_truth_poses = b.ground_truth ? b.ground_truth->size() : 0;
  s.anchors = b.anchors ? b.anchors->size() : 0;

  double step = 0.0;
  if (b.odometry.size() >= 2)
    step = (b.odometry.back().time - b.odometry.front().time) / static_cast<double>(b.odometry.size() - 1);

  std::map<int, std::vector<double>> times;
  for (const auto& r : b.ranges) times[r.landmark_id].push_back(r.time);
  for (auto& [id, t] : times) {
    LandmarkGaps g;
    g.readings = t.size();
    if (t.size() >= 2) {
      double sum = 0.0;
      for (std::size_t i = 1; i < t.size(); ++i) {
        const double gap = t[i] - t[i - 1];
        sum += gap;
        g.max_gap_s = std::max(g.max_gap_s, gap);
      }
      g.mean_gap_s = sum / static_cast<double>(t.size() - 1);
      if (step > 0.0) g.mean_gap_steps = g.mean_gap_s / step;
    }
    s.per_landmark[id] = g;
  }
  return s;
}

}  // namespace spectral_slam
