#pragma once

// Gaussian KDE over multi-subject gaze points, the probability density score
// (PDS), and the two training losses.
//
// A mixture places one equally weighted diagonal Gaussian on each subject's
// gaze point for a given word. PDS normalizes the density at a query point by
// the mixture's maximum density, so scores live in [0,1] regardless of
// bandwidth. The maximum has no closed form; it is located by a coarse grid
// plus component-seeded gradient ascent and cached on the mixture.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "eyear/common.hpp"
#include "eyear/data.hpp"
#include "eyear/tensor.hpp"

namespace eyear {

struct KdeMixture {
  std::vector<Vec2> components;  // normalized coordinates
  double sigma_x = 0.0;
  double sigma_y = 0.0;
  double max_density = 0.0;
  Vec2 argmax;  // location of max_density
};

inline double density_at(const KdeMixture& mix, const Vec2& s) {
  const double nx = 1.0 / mix.sigma_x;
  const double ny = 1.0 / mix.sigma_y;
  const double norm = 1.0 / (2.0 * kPi * mix.sigma_x * mix.sigma_y *
                             static_cast<double>(mix.components.size()));
  double acc = 0.0;
  for (const Vec2& mu : mix.components) {
    const double dx = (s.x - mu.x) * nx;
    const double dy = (s.y - mu.y) * ny;
    acc += std::exp(-0.5 * (dx * dx + dy * dy));
  }
  return acc * norm;
}

inline Vec2 density_gradient(const KdeMixture& mix, const Vec2& s) {
  const double nx2 = 1.0 / (mix.sigma_x * mix.sigma_x);
  const double ny2 = 1.0 / (mix.sigma_y * mix.sigma_y);
  const double norm = 1.0 / (2.0 * kPi * mix.sigma_x * mix.sigma_y *
                             static_cast<double>(mix.components.size()));
  Vec2 g{0.0, 0.0};
  for (const Vec2& mu : mix.components) {
    const double dx = s.x - mu.x;
    const double dy = s.y - mu.y;
    const double k = std::exp(-0.5 * (dx * dx * nx2 + dy * dy * ny2)) * norm;
    g.x += -dx * nx2 * k;
    g.y += -dy * ny2 * k;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Maximum search: all component means and a uniform grid over [0,1]^2 seed a
// short monotone gradient ascent; the best refined value wins. Kernels decay
// to nothing a few bandwidths out, so the grid accumulation only touches a
// window around each component.

namespace detail {

inline Vec2 ascend_density(const KdeMixture& mix, Vec2 x, int iters = 10) {
  double fx = density_at(mix, x);
  const double base_step = std::min(mix.sigma_x, mix.sigma_y);
  for (int it = 0; it < iters; ++it) {
    const Vec2 g = density_gradient(mix, x);
    const double gn = g.norm();
    if (gn == 0.0) break;
    const Vec2 dir{g.x / gn, g.y / gn};
    double step = base_step;
    Vec2 best_x = x;
    double best_f = fx;
    bool improved = false;
    for (int halve = 0; halve < 30; ++halve) {
      const Vec2 xn{x.x + dir.x * step, x.y + dir.y * step};
      const double fn = density_at(mix, xn);
      if (fn > best_f) {
        best_f = fn;
        best_x = xn;
        improved = true;
        // expand once past the first improvement in case the initial
        // step undershoots
        const Vec2 xe{x.x + dir.x * step * 2.0, x.y + dir.y * step * 2.0};
        const double fe = density_at(mix, xe);
        if (fe > best_f) {
          best_f = fe;
          best_x = xe;
        }
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
    x = best_x;
    fx = best_f;
  }
  return x;
}

}  // namespace detail

// Fills max_density/argmax on the mixture. grid_res is the side length of the
// uniform seeding grid.
inline void compute_kde_max(KdeMixture& mix, int grid_res) {
  if (grid_res < 32)
    throw ValidationError("kde max search needs grid_res >= 32, got " +
                          std::to_string(grid_res));

  // grid accumulation, restricted to windows where kernels are non-negligible
  const std::size_t res = static_cast<std::size_t>(grid_res);
  std::vector<double> grid(res * res, 0.0);
  const double cell = 1.0 / static_cast<double>(res);
  const double norm = 1.0 / (2.0 * kPi * mix.sigma_x * mix.sigma_y *
                             static_cast<double>(mix.components.size()));
  const double reach = 6.0;
  std::vector<double> kx, ky;
  for (const Vec2& mu : mix.components) {
    const double wx = reach * mix.sigma_x;
    const double wy = reach * mix.sigma_y;
    const auto clamp_idx = [&](double v) {
      const double idx = std::floor(v / cell - 0.5);
      return static_cast<std::ptrdiff_t>(idx);
    };
    const std::size_t x0 = static_cast<std::size_t>(
        std::max<std::ptrdiff_t>(0, clamp_idx(mu.x - wx)));
    const std::size_t x1 = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        static_cast<std::ptrdiff_t>(res) - 1, clamp_idx(mu.x + wx) + 1));
    const std::size_t y0 = static_cast<std::size_t>(
        std::max<std::ptrdiff_t>(0, clamp_idx(mu.y - wy)));
    const std::size_t y1 = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        static_cast<std::ptrdiff_t>(res) - 1, clamp_idx(mu.y + wy) + 1));

    kx.clear();
    ky.clear();
    for (std::size_t ix = x0; ix <= x1; ++ix) {
      const double dx = ((static_cast<double>(ix) + 0.5) * cell - mu.x) /
                        mix.sigma_x;
      kx.push_back(std::exp(-0.5 * dx * dx));
    }
    for (std::size_t iy = y0; iy <= y1; ++iy) {
      const double dy = ((static_cast<double>(iy) + 0.5) * cell - mu.y) /
                        mix.sigma_y;
      ky.push_back(std::exp(-0.5 * dy * dy));
    }
    for (std::size_t iy = y0; iy <= y1; ++iy) {
      double* row = grid.data() + iy * res;
      const double kyv = ky[iy - y0] * norm;
      for (std::size_t ix = x0; ix <= x1; ++ix)
        row[ix] += kx[ix - x0] * kyv;
    }
  }

  // best grid cell
  Vec2 best_pt = mix.components.front();
  double best = -1.0;
  for (std::size_t iy = 0; iy < res; ++iy)
    for (std::size_t ix = 0; ix < res; ++ix) {
      const double v = grid[iy * res + ix];
      if (v > best) {
        best = v;
        best_pt = {(static_cast<double>(ix) + 0.5) * cell,
                   (static_cast<double>(iy) + 0.5) * cell};
      }
    }
  // grid values are window-truncated; rescore the winner exactly
  best = density_at(mix, best_pt);

  // refine from the grid winner and from every component mean
  std::vector<Vec2> seeds;
  seeds.push_back(best_pt);
  for (const Vec2& mu : mix.components) seeds.push_back(mu);
  for (const Vec2& seed : seeds) {
    const double direct = density_at(mix, seed);
    if (direct > best) {
      best = direct;
      best_pt = seed;
    }
    const Vec2 refined = detail::ascend_density(mix, seed);
    const double v = density_at(mix, refined);
    if (v > best) {
      best = v;
      best_pt = refined;
    }
  }
  mix.max_density = best;
  mix.argmax = best_pt;
}

inline double kde_max(const KdeMixture& mix, int grid_res = 256) {
  KdeMixture copy = mix;
  compute_kde_max(copy, grid_res);
  return copy.max_density;
}

// Mixture with explicit bandwidths.
inline KdeMixture make_mixture(std::vector<Vec2> points, double sigma_x,
                               double sigma_y, int grid_res = 256) {
  if (points.size() < 2)
    throw TooFewPoints("KDE needs at least 2 points, got " +
                       std::to_string(points.size()));
  KdeMixture mix;
  mix.components = std::move(points);
  mix.sigma_x = sigma_x;
  mix.sigma_y = sigma_y;
  compute_kde_max(mix, grid_res);
  return mix;
}

// Per-axis Silverman bandwidth, floored to survive coincident points:
// sigma_axis = max(floor, 1.06 * std_axis * N^(-1/5)).
inline KdeMixture fit_kde(const std::vector<Vec2>& points,
                          double bandwidth_floor = 0.02, int grid_res = 256) {
  const std::size_t n = points.size();
  if (n < 2)
    throw TooFewPoints("KDE needs at least 2 points, got " +
                       std::to_string(n));

  double mx = 0.0, my = 0.0;
  for (const Vec2& p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double vx = 0.0, vy = 0.0;
  for (const Vec2& p : points) {
    vx += (p.x - mx) * (p.x - mx);
    vy += (p.y - my) * (p.y - my);
  }
  vx /= static_cast<double>(n - 1);
  vy /= static_cast<double>(n - 1);

  const double factor = 1.06 * std::pow(static_cast<double>(n), -0.2);
  const double sx = std::max(bandwidth_floor, factor * std::sqrt(vx));
  const double sy = std::max(bandwidth_floor, factor * std::sqrt(vy));
  return make_mixture(points, sx, sy, grid_res);
}

// ---------------------------------------------------------------------------
// PDS

inline double pds(const KdeMixture& mix, const Vec2& s) {
  return std::min(1.0, density_at(mix, s) / mix.max_density);
}

inline double trajectory_pds(const std::vector<KdeMixture>& mixes,
                             const std::vector<Vec2>& traj) {
  if (mixes.size() != traj.size())
    throw LengthMismatch("trajectory PDS: " + std::to_string(mixes.size()) +
                         " mixtures vs " + std::to_string(traj.size()) +
                         " points");
  if (mixes.empty()) throw LengthMismatch("trajectory PDS of empty inputs");
  double acc = 0.0;
  for (std::size_t i = 0; i < mixes.size(); ++i) acc += pds(mixes[i], traj[i]);
  return acc / static_cast<double>(mixes.size());
}

// ---------------------------------------------------------------------------
// Differentiable versions. The mixture is data, not parameters: gradients
// flow through the query point only.

inline Tensor density_at_t(const KdeMixture& mix, const Tensor& s) {
  const std::size_t j = mix.components.size();
  std::vector<double> mux(j), muy(j);
  for (std::size_t i = 0; i < j; ++i) {
    mux[i] = mix.components[i].x;
    muy[i] = mix.components[i].y;
  }
  Tensor mu_x = Tensor::from({j}, std::move(mux));
  Tensor mu_y = Tensor::from({j}, std::move(muy));
  Tensor sx = slice(s, 0, 1);  // {1}, broadcasts against {j}
  Tensor sy = slice(s, 1, 1);
  Tensor dx = sub(sx, mu_x);
  Tensor dy = sub(sy, mu_y);
  const double cx = -0.5 / (mix.sigma_x * mix.sigma_x);
  const double cy = -0.5 / (mix.sigma_y * mix.sigma_y);
  Tensor expo = add(mul_scalar(mul(dx, dx), cx), mul_scalar(mul(dy, dy), cy));
  const double norm = 1.0 / (2.0 * kPi * mix.sigma_x * mix.sigma_y *
                             static_cast<double>(j));
  return mul_scalar(sum(exp(expo)), norm);
}

inline Tensor pds_t(const KdeMixture& mix, const Tensor& s) {
  return clamp_max(mul_scalar(density_at_t(mix, s), 1.0 / mix.max_density),
                   1.0);
}

// PD loss is the negative SUM of per-step scores (the metric averages; the
// training loss sums).
inline Tensor pd_loss(const std::vector<KdeMixture>& mixes,
                      const std::vector<Tensor>& traj) {
  if (mixes.size() != traj.size())
    throw LengthMismatch("pd_loss: " + std::to_string(mixes.size()) +
                         " mixtures vs " + std::to_string(traj.size()) +
                         " points");
  if (mixes.empty()) throw LengthMismatch("pd_loss of empty inputs");
  Tensor acc = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < mixes.size(); ++i)
    acc = add(acc, pds_t(mixes[i], traj[i]));
  return neg(acc);
}

inline Tensor mse_loss(const std::vector<Tensor>& pred,
                       const std::vector<Vec2>& gt) {
  if (pred.size() != gt.size())
    throw LengthMismatch("mse_loss: " + std::to_string(pred.size()) +
                         " predictions vs " + std::to_string(gt.size()) +
                         " ground-truth points");
  if (pred.empty()) throw LengthMismatch("mse_loss of empty inputs");
  Tensor acc = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    Tensor d = sub(pred[i], Tensor::vec2(gt[i]));
    acc = add(acc, sum(mul(d, d)));
  }
  return mul_scalar(acc, 1.0 / static_cast<double>(pred.size()));
}

// Per-word mixtures for one scene, fitted across subjects in normalized
// coordinates.
inline std::vector<KdeMixture> fit_scene_mixtures(const SceneBundle& scene,
                                                  double bandwidth_floor = 0.02,
                                                  int grid_res = 256) {
  const std::size_t n = scene.word_count();
  std::vector<KdeMixture> out;
  out.reserve(n);
  std::vector<Vec2> pts(scene.trajectories.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < scene.trajectories.size(); ++j)
      pts[j] = scene.normalize(scene.trajectories[j].points[i]);
    out.push_back(fit_kde(pts, bandwidth_floor, grid_res));
  }
  return out;
}

}  // namespace eyear
