#pragma once

// Point-based trajectory metrics (Euclidean distance, DTW, ScanMatch) and the
// saccade-vector decomposition behind the radar-chart analysis. All functions
// are pure and operate in pixel units.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "eyear/common.hpp"

namespace eyear {

// Mean over subjects of the mean pointwise distance.
inline double euclidean(const std::vector<Vec2>& pred,
                        const std::vector<std::vector<Vec2>>& gts) {
  if (gts.empty()) throw LengthMismatch("euclidean: no ground-truth subjects");
  double subj_acc = 0.0;
  for (const std::vector<Vec2>& gt : gts) {
    if (gt.size() != pred.size())
      throw LengthMismatch("euclidean: prediction length " +
                           std::to_string(pred.size()) +
                           " != ground truth length " +
                           std::to_string(gt.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
      acc += distance(pred[i], gt[i]);
    subj_acc += acc / static_cast<double>(pred.size());
  }
  return subj_acc / static_cast<double>(gts.size());
}

// Classic DTW, Euclidean local cost, symmetric match/insert/delete steps,
// boundary aligned. Returns the accumulated cost; optionally normalized by
// the optimal warping path length.
inline double dtw(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                  bool normalize_by_path = false) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  if (n == 0 || m == 0) throw EmptySequence("dtw of an empty sequence");

  std::vector<double> table(n * m);
  auto at = [&](std::size_t i, std::size_t j) -> double& {
    return table[i * m + j];
  };
  at(0, 0) = distance(a[0], b[0]);
  for (std::size_t i = 1; i < n; ++i)
    at(i, 0) = at(i - 1, 0) + distance(a[i], b[0]);
  for (std::size_t j = 1; j < m; ++j)
    at(0, j) = at(0, j - 1) + distance(a[0], b[j]);
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 1; j < m; ++j)
      at(i, j) = distance(a[i], b[j]) +
                 std::min({at(i - 1, j - 1), at(i - 1, j), at(i, j - 1)});

  if (!normalize_by_path) return at(n - 1, m - 1);

  // count the optimal path length, preferring diagonal moves on ties
  std::size_t i = n - 1, j = m - 1, len = 1;
  while (i > 0 || j > 0) {
    if (i == 0) --j;
    else if (j == 0) --i;
    else {
      const double d = at(i - 1, j - 1);
      const double u = at(i - 1, j);
      const double l = at(i, j - 1);
      if (d <= u && d <= l) { --i; --j; }
      else if (u <= l) --i;
      else --j;
    }
    ++len;
  }
  return at(n - 1, m - 1) / static_cast<double>(len);
}

// ---------------------------------------------------------------------------
// ScanMatch: grid quantization, distance-graded substitution scores,
// Needleman-Wunsch global alignment, max-length normalization.

struct ScanMatchConfig {
  int grid_x = 8;
  int grid_y = 8;
  double gap_penalty = 0.0;
};

namespace detail {

inline std::pair<int, int> quantize_cell(const Vec2& p, double width,
                                         double height,
                                         const ScanMatchConfig& cfg) {
  int cx = static_cast<int>(std::floor(p.x / width * cfg.grid_x));
  int cy = static_cast<int>(std::floor(p.y / height * cfg.grid_y));
  cx = std::clamp(cx, 0, cfg.grid_x - 1);
  cy = std::clamp(cy, 0, cfg.grid_y - 1);
  return {cx, cy};
}

inline Vec2 cell_center(std::pair<int, int> cell, double width, double height,
                        const ScanMatchConfig& cfg) {
  return {(cell.first + 0.5) * width / cfg.grid_x,
          (cell.second + 0.5) * height / cfg.grid_y};
}

}  // namespace detail

// Substitution score in [1 - sqrt(2), 1]: 1 for the same cell, decreasing
// linearly with center distance over the image diagonal.
inline double scanmatch_substitution(std::pair<int, int> u,
                                     std::pair<int, int> v, double width,
                                     double height,
                                     const ScanMatchConfig& cfg) {
  const Vec2 cu = detail::cell_center(u, width, height, cfg);
  const Vec2 cv = detail::cell_center(v, width, height, cfg);
  const double diag = std::sqrt(width * width + height * height);
  return 1.0 - distance(cu, cv) / diag;
}

inline double scanmatch(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                        double width, double height,
                        const ScanMatchConfig& cfg = {}) {
  if (a.empty() || b.empty())
    throw EmptySequence("scanmatch of an empty sequence");
  const std::size_t n = a.size();
  const std::size_t m = b.size();

  std::vector<std::pair<int, int>> ca(n), cb(m);
  for (std::size_t i = 0; i < n; ++i)
    ca[i] = detail::quantize_cell(a[i], width, height, cfg);
  for (std::size_t j = 0; j < m; ++j)
    cb[j] = detail::quantize_cell(b[j], width, height, cfg);

  const double gap = cfg.gap_penalty;
  std::vector<double> table((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> double& {
    return table[i * (m + 1) + j];
  };
  at(0, 0) = 0.0;
  for (std::size_t i = 1; i <= n; ++i) at(i, 0) = -gap * static_cast<double>(i);
  for (std::size_t j = 1; j <= m; ++j) at(0, j) = -gap * static_cast<double>(j);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      const double s =
          scanmatch_substitution(ca[i - 1], cb[j - 1], width, height, cfg);
      at(i, j) = std::max({at(i - 1, j - 1) + s, at(i - 1, j) - gap,
                           at(i, j - 1) - gap});
    }
  return at(n, m) / static_cast<double>(std::max(n, m));
}

// ---------------------------------------------------------------------------
// Saccade decomposition

struct SaccadeVector {
  double dx = 0.0;        // pixels
  double dy = 0.0;        // pixels
  double length = 0.0;    // pixels
  double angle_deg = 0.0; // [0, 360)
  double duration = 0.0;  // seconds
  double speed = 0.0;     // pixels / second
};

struct TimedTrajectory {
  std::vector<Vec2> points;   // pixels
  std::vector<double> times;  // seconds, strictly increasing
};

inline std::vector<SaccadeVector> decompose_saccades(
    const TimedTrajectory& traj) {
  if (traj.points.size() != traj.times.size())
    throw LengthMismatch("saccade decomposition: " +
                         std::to_string(traj.points.size()) + " points vs " +
                         std::to_string(traj.times.size()) + " timestamps");
  std::vector<SaccadeVector> out;
  for (std::size_t i = 1; i < traj.points.size(); ++i) {
    const double duration = traj.times[i] - traj.times[i - 1];
    if (!(duration > 0.0))
      throw NonMonotonicTime("timestamps must be strictly increasing (step " +
                             std::to_string(i) + ")");
    SaccadeVector v;
    v.dx = traj.points[i].x - traj.points[i - 1].x;
    v.dy = traj.points[i].y - traj.points[i - 1].y;
    v.length = std::sqrt(v.dx * v.dx + v.dy * v.dy);
    double deg = std::atan2(v.dy, v.dx) * 180.0 / kPi;
    if (deg < 0.0) deg += 360.0;
    if (deg >= 360.0) deg = 0.0;
    v.angle_deg = deg;
    v.duration = duration;
    v.speed = v.length / duration;
    out.push_back(v);
  }
  return out;
}

// Mean speed per (angle bin, length bin). Zero-length saccades go to a
// dedicated fixation bin rather than polluting angle statistics.
struct SaccadeTable {
  int angle_bins = 8;
  std::vector<double> length_edges;          // ascending; last bin is open
  std::vector<std::vector<double>> mean_speed;  // [angle][length]
  std::vector<std::vector<std::size_t>> count;  // [angle][length]
  std::size_t fixation_count = 0;

  double angle_bin_width() const { return 360.0 / angle_bins; }
};

inline std::vector<double> default_length_edges() {
  return {0.0, 100.0, 200.0, 300.0, 400.0, 500.0};
}

inline SaccadeTable saccade_analysis(
    const std::vector<TimedTrajectory>& trajs, int angle_bins = 8,
    std::vector<double> length_edges = default_length_edges()) {
  if (angle_bins < 1) throw ValidationError("angle_bins must be >= 1");
  if (length_edges.empty() || length_edges.front() != 0.0)
    throw ValidationError("length_edges must start at 0");
  if (!std::is_sorted(length_edges.begin(), length_edges.end()))
    throw ValidationError("length_edges must be ascending");

  SaccadeTable t;
  t.angle_bins = angle_bins;
  t.length_edges = std::move(length_edges);
  const std::size_t lb = t.length_edges.size();
  t.mean_speed.assign(angle_bins, std::vector<double>(lb, 0.0));
  t.count.assign(angle_bins, std::vector<std::size_t>(lb, 0));

  const double width = 360.0 / angle_bins;
  for (const TimedTrajectory& traj : trajs) {
    for (const SaccadeVector& v : decompose_saccades(traj)) {
      if (v.length == 0.0) {
        ++t.fixation_count;
        continue;
      }
      int ab = static_cast<int>(std::floor(v.angle_deg / width));
      ab = std::clamp(ab, 0, angle_bins - 1);
      std::size_t lbin = 0;
      while (lbin + 1 < lb && v.length >= t.length_edges[lbin + 1]) ++lbin;
      t.mean_speed[ab][lbin] += v.speed;  // summed here, divided below
      ++t.count[ab][lbin];
    }
  }
  for (int a = 0; a < angle_bins; ++a)
    for (std::size_t l = 0; l < lb; ++l)
      if (t.count[a][l] > 0)
        t.mean_speed[a][l] /= static_cast<double>(t.count[a][l]);
  return t;
}

// CSV rows: one per (angle, length) bin plus a trailing fixation row flagged
// with -1 edges.
inline void write_saccade_csv(const SaccadeTable& t, std::ostream& out) {
  out << "angle_bin_deg,length_bin_px,mean_speed_px_s,count\n";
  for (int a = 0; a < t.angle_bins; ++a) {
    const double angle_lo = a * t.angle_bin_width();
    for (std::size_t l = 0; l < t.length_edges.size(); ++l) {
      out << angle_lo << ',' << t.length_edges[l] << ','
          << t.mean_speed[a][l] << ',' << t.count[a][l] << '\n';
    }
  }
  out << "-1,-1,0," << t.fixation_count << '\n';
}

}  // namespace eyear
