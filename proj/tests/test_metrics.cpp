#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "eyear/metrics.hpp"

using eyear::Rng;
using eyear::ScanMatchConfig;
using eyear::TimedTrajectory;
using eyear::Vec2;

namespace {

std::vector<Vec2> random_traj(Rng& rng, std::size_t len, double lo = 0.0,
                              double hi = 1024.0) {
  std::vector<Vec2> t(len);
  for (Vec2& p : t) p = {rng.uniform(lo, hi), rng.uniform(lo, hi)};
  return t;
}

// Exhaustive DTW: plain recursion over all monotone alignments.
double dtw_brute(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                 std::size_t i, std::size_t j) {
  const double c = eyear::distance(a[i], b[j]);
  if (i == 0 && j == 0) return c;
  double best = std::numeric_limits<double>::infinity();
  if (i > 0 && j > 0) best = std::min(best, dtw_brute(a, b, i - 1, j - 1));
  if (i > 0) best = std::min(best, dtw_brute(a, b, i - 1, j));
  if (j > 0) best = std::min(best, dtw_brute(a, b, i, j - 1));
  return c + best;
}

// Exhaustive Needleman-Wunsch over all global alignments.
double nw_brute(const std::vector<std::pair<int, int>>& a,
                const std::vector<std::pair<int, int>>& b, std::size_t i,
                std::size_t j, double width, double height,
                const ScanMatchConfig& cfg) {
  if (i == 0 && j == 0) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  if (i > 0 && j > 0)
    best = std::max(best,
                    nw_brute(a, b, i - 1, j - 1, width, height, cfg) +
                        eyear::scanmatch_substitution(a[i - 1], b[j - 1],
                                                      width, height, cfg));
  if (i > 0)
    best = std::max(best, nw_brute(a, b, i - 1, j, width, height, cfg) -
                              cfg.gap_penalty);
  if (j > 0)
    best = std::max(best, nw_brute(a, b, i, j - 1, width, height, cfg) -
                              cfg.gap_penalty);
  return best;
}

}  // namespace

TEST_CASE("euclidean basics") {
  std::vector<Vec2> pred = {{10, 10}, {20, 20}, {30, 30}};
  CHECK(eyear::euclidean(pred, {pred}) == 0.0);

  std::vector<Vec2> gt = pred;
  for (Vec2& p : gt) {
    p.x += 30.0;
    p.y += 40.0;
  }
  CHECK(std::abs(eyear::euclidean(pred, {gt, gt}) - 50.0) < 1e-12);

  REQUIRE_THROWS_AS(eyear::euclidean(pred, {{Vec2{0, 0}}}),
                    eyear::LengthMismatch);
}

TEST_CASE("euclidean equals the direct per-subject computation") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec2> pred = random_traj(rng, 5);
    std::vector<std::vector<Vec2>> gts;
    for (int s = 0; s < 4; ++s) gts.push_back(random_traj(rng, 5));

    double direct = 0.0;
    for (const auto& gt : gts) {
      double per = 0.0;
      for (std::size_t i = 0; i < 5; ++i)
        per += eyear::distance(pred[i], gt[i]);
      direct += per / 5.0;
    }
    direct /= 4.0;
    CHECK(std::abs(eyear::euclidean(pred, gts) - direct) < 1e-12);
  }
}

TEST_CASE("euclidean is permutation-invariant over subjects") {
  Rng rng(4);
  std::vector<Vec2> pred = random_traj(rng, 6);
  std::vector<std::vector<Vec2>> gts;
  for (int s = 0; s < 5; ++s) gts.push_back(random_traj(rng, 6));
  const double base = eyear::euclidean(pred, gts);
  std::rotate(gts.begin(), gts.begin() + 2, gts.end());
  CHECK(std::abs(eyear::euclidean(pred, gts) - base) < 1e-12);
}

TEST_CASE("dtw basics") {
  std::vector<Vec2> a = {{0, 0}, {1, 1}, {2, 2}};
  CHECK(eyear::dtw(a, a) == 0.0);

  std::vector<Vec2> one = {{0, 0}};
  std::vector<Vec2> two = {{0, 0}, {3, 4}};
  CHECK(eyear::dtw(one, two) == 5.0);
  CHECK(eyear::dtw(two, one) == 5.0);

  REQUIRE_THROWS_AS(eyear::dtw({}, a), eyear::EmptySequence);
}

TEST_CASE("dtw equals exhaustive enumeration on short sequences") {
  Rng rng(7);
  for (int trial = 0; trial < 80; ++trial) {
    const std::size_t n = 1 + rng.below(6);
    const std::size_t m = 1 + rng.below(6);
    std::vector<Vec2> a = random_traj(rng, n);
    std::vector<Vec2> b = random_traj(rng, m);
    const double fast = eyear::dtw(a, b);
    const double brute = dtw_brute(a, b, n - 1, m - 1);
    CHECK(std::abs(fast - brute) < 1e-9);
    CHECK(eyear::dtw(b, a) == fast);  // symmetric step pattern
  }
}

TEST_CASE("dtw path normalization stays consistent") {
  Rng rng(8);
  std::vector<Vec2> a = random_traj(rng, 7);
  std::vector<Vec2> b = random_traj(rng, 9);
  const double total = eyear::dtw(a, b, false);
  const double normalized = eyear::dtw(a, b, true);
  CHECK(normalized <= total);
  CHECK(normalized >= total / 16.0);  // path length <= n + m - 1
}

TEST_CASE("scanmatch of identical sequences is one") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec2> a = random_traj(rng, 1 + rng.below(12));
    CHECK(eyear::scanmatch(a, a, 1024.0, 1024.0) == 1.0);
  }
}

TEST_CASE("scanmatch corner case computed by hand") {
  // single points in opposite corners of a 1024x1024 image, 8x8 grid:
  // cells (0,0) and (7,7), centers (64,64) and (960,960);
  // substitution = 1 - (896*sqrt(2))/(1024*sqrt(2)) = 0.125
  std::vector<Vec2> a = {{1.0, 1.0}};
  std::vector<Vec2> b = {{1023.0, 1023.0}};
  CHECK(std::abs(eyear::scanmatch(a, b, 1024.0, 1024.0) - 0.125) < 1e-12);
}

TEST_CASE("needleman-wunsch equals exhaustive enumeration on short sequences") {
  Rng rng(10);
  ScanMatchConfig cfg;
  SECTION("zero gap penalty") {
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t n = 1 + rng.below(5);
      const std::size_t m = 1 + rng.below(5);
      std::vector<Vec2> a = random_traj(rng, n);
      std::vector<Vec2> b = random_traj(rng, m);
      std::vector<std::pair<int, int>> ca, cb;
      for (const Vec2& p : a)
        ca.push_back(eyear::detail::quantize_cell(p, 1024, 1024, cfg));
      for (const Vec2& p : b)
        cb.push_back(eyear::detail::quantize_cell(p, 1024, 1024, cfg));
      const double brute =
          nw_brute(ca, cb, n, m, 1024, 1024, cfg) / std::max(n, m);
      CHECK(std::abs(eyear::scanmatch(a, b, 1024, 1024, cfg) - brute) < 1e-9);
    }
  }
  SECTION("positive gap penalty") {
    cfg.gap_penalty = 0.3;
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 1 + rng.below(5);
      const std::size_t m = 1 + rng.below(5);
      std::vector<Vec2> a = random_traj(rng, n);
      std::vector<Vec2> b = random_traj(rng, m);
      std::vector<std::pair<int, int>> ca, cb;
      for (const Vec2& p : a)
        ca.push_back(eyear::detail::quantize_cell(p, 1024, 1024, cfg));
      for (const Vec2& p : b)
        cb.push_back(eyear::detail::quantize_cell(p, 1024, 1024, cfg));
      const double brute =
          nw_brute(ca, cb, n, m, 1024, 1024, cfg) / std::max(n, m);
      CHECK(std::abs(eyear::scanmatch(a, b, 1024, 1024, cfg) - brute) < 1e-9);
    }
  }
}

TEST_CASE("saccade decomposition basics") {
  TimedTrajectory t;
  t.points = {{0, 0}, {400, 0}, {500, 100}};
  t.times = {0.0, 1.0, 1.5};
  auto sv = eyear::decompose_saccades(t);
  REQUIRE(sv.size() == 2);
  CHECK(sv[0].length == 400.0);
  CHECK(sv[0].angle_deg == 0.0);
  CHECK(sv[0].speed == 400.0);
  CHECK(std::abs(sv[1].angle_deg - 45.0) < 1e-12);
  CHECK(std::abs(sv[0].length -
                 std::sqrt(sv[0].dx * sv[0].dx + sv[0].dy * sv[0].dy)) == 0.0);

  TimedTrajectory bad = t;
  bad.times[2] = 0.5;
  REQUIRE_THROWS_AS(eyear::decompose_saccades(bad), eyear::NonMonotonicTime);
}

TEST_CASE("saccade table bins a single saccade where expected") {
  TimedTrajectory t;
  t.points = {{0, 0}, {400, 0}};
  t.times = {0.0, 1.0};
  auto table = eyear::saccade_analysis({t});
  // angle 0 -> bin 0; length 400 -> bin with lower edge 400
  CHECK(table.count[0][4] == 1);
  CHECK(table.mean_speed[0][4] == 400.0);
  std::size_t total = 0;
  for (const auto& row : table.count)
    for (std::size_t c : row) total += c;
  CHECK(total == 1);
}

TEST_CASE("constant-speed trajectories report that speed in every bin") {
  Rng rng(12);
  const double v = 321.5;  // pixels per second
  std::vector<TimedTrajectory> trajs;
  for (int s = 0; s < 6; ++s) {
    TimedTrajectory t;
    Vec2 p{512, 512};
    double time = 0.0;
    t.points.push_back(p);
    t.times.push_back(time);
    for (int i = 0; i < 40; ++i) {
      const double len = rng.uniform(10.0, 600.0);
      const double ang = rng.uniform(0.0, 2 * eyear::kPi);
      Vec2 np{p.x + len * std::cos(ang), p.y + len * std::sin(ang)};
      time += len / v;
      p = np;
      t.points.push_back(p);
      t.times.push_back(time);
    }
    trajs.push_back(std::move(t));
  }
  auto table = eyear::saccade_analysis(trajs);
  for (int a = 0; a < table.angle_bins; ++a)
    for (std::size_t l = 0; l < table.length_edges.size(); ++l)
      if (table.count[a][l] > 0)
        CHECK(std::abs(table.mean_speed[a][l] - v) < 1e-9);
}

TEST_CASE("zero-length saccades land in the fixation bin") {
  TimedTrajectory t;
  t.points = {{100, 100}, {100, 100}, {200, 100}};
  t.times = {0.0, 0.5, 1.0};
  auto table = eyear::saccade_analysis({t});
  CHECK(table.fixation_count == 1);
  std::size_t total = 0;
  for (const auto& row : table.count)
    for (std::size_t c : row) total += c;
  CHECK(total == 1);
}

TEST_CASE("saccade csv has the expected schema") {
  TimedTrajectory t;
  t.points = {{0, 0}, {400, 0}};
  t.times = {0.0, 1.0};
  auto table = eyear::saccade_analysis({t});
  std::ostringstream out;
  eyear::write_saccade_csv(table, out);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "angle_bin_deg,length_bin_px,mean_speed_px_s,count");
  std::size_t rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 8 * 6 + 1);  // all bins plus the fixation row
}
