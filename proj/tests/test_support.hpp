#pragma once

// Small helpers shared by the unit tests: a quick random-but-valid scene
// bundle generator, independent of the library's synthetic module.

#include <string>
#include <vector>

#include "eyear/common.hpp"
#include "eyear/data.hpp"

namespace test_support {

inline eyear::SceneBundle make_test_bundle(std::uint64_t seed, int n_words = 5,
                                           int embed_dim = 8, int grid_n = 4,
                                           int subjects = 3) {
  using eyear::Vec2;
  eyear::Rng rng = eyear::Rng::derive(seed, "test-bundle");

  eyear::SceneBundle b;
  b.scene_id = "test-" + std::to_string(seed);
  b.width = 1024.0;
  b.height = 1024.0;
  b.embed_dim = embed_dim;
  b.grid_n = grid_n;
  const double cell = 1024.0 / grid_n;
  for (int r = 0; r < grid_n; ++r)
    for (int c = 0; c < grid_n; ++c) {
      eyear::ScenePatch p;
      p.center = {(c + 0.5) * cell, (r + 0.5) * cell};
      p.embedding.resize(embed_dim);
      for (double& x : p.embedding) x = rng.normal();
      b.patches.push_back(std::move(p));
    }
  b.salient_point = {rng.uniform(100.0, 900.0), rng.uniform(100.0, 900.0)};

  double t = 0.0;
  for (int i = 0; i < n_words; ++i) {
    eyear::TimedWord w;
    w.text = "w" + std::to_string(i);
    w.t_start = t;
    t += rng.uniform(0.2, 0.7);
    w.t_end = t;
    w.embedding.resize(embed_dim);
    for (double& x : w.embedding) x = rng.normal();
    if (rng.uniform() < 0.5) {
      eyear::GroundedPatch g;
      g.center = {rng.uniform(50.0, 950.0), rng.uniform(50.0, 950.0)};
      g.embedding.resize(embed_dim);
      for (double& x : g.embedding) x = rng.normal();
      w.grounded = std::move(g);
    }
    b.words.push_back(std::move(w));
  }

  for (int s = 1; s <= subjects; ++s) {
    eyear::GazeTrajectory traj;
    traj.subject_id = s;
    for (int i = 0; i < n_words; ++i)
      traj.points.push_back(
          {rng.uniform(200.0, 800.0), rng.uniform(200.0, 800.0)});
    b.trajectories.push_back(std::move(traj));
  }

  eyear::validate_bundle(b);
  return b;
}

}  // namespace test_support
