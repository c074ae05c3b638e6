#pragma once

// Synthetic scene generator with a known gaze process, used for end-to-end
// training runs and as the oracle behind the acceptance experiments.
//
// Each word gets a target patch; word embeddings are the target's embedding
// scaled by an association strength plus isotropic noise. Subjects drift
// toward the target with rate lambda plus per-step Gaussian noise. Two kinds
// of difficulty mirror real narration data: ungroundable words (pure-noise
// embedding, no grounding; the eye keeps tracking the previous target) and
// ambiguous words (two candidate patches; each subject commits to one, the
// embedding leans toward the primary). Ambiguity makes some per-step gaze
// distributions bimodal, which is what separates the density-based loss from
// plain MSE.
//
// Alongside the bundles the generator emits a truth table (per-word targets
// and flags) for evaluation harnesses; bundles themselves stay within the
// standard scene format.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eyear/common.hpp"
#include "eyear/data.hpp"

namespace eyear {

struct SynthConfig {
  int n_scenes = 10;
  int words_per_scene = 26;
  int subjects = 8;
  int embed_dim = 64;
  int grid_n = 4;
  double image_size = 1024.0;
  double kappa = 3.0;           // word-target association strength
  double emb_noise = 1.0;       // embedding noise stddev
  double sigma_subject = 0.03;  // per-step gaze noise, normalized units
  double drift_rate = 0.65;     // lambda in (0,1]
  double p_ungroundable = 0.2;
  double p_grounded = 0.5;   // grounded_patch rate among groundable words
  double p_ambiguous = 0.25;  // two-target rate among groundable words
  double duration_min = 0.2;
  double duration_max = 0.7;
  std::uint64_t seed = 0;
};

inline void validate_config(const SynthConfig& c) {
  if (c.n_scenes < 1) throw ValidationError("n_scenes must be >= 1");
  if (c.words_per_scene < 1) throw ValidationError("words_per_scene must be >= 1");
  if (c.subjects < 2)
    throw ValidationError("subjects must be >= 2 (KDE needs multiple points)");
  if (c.embed_dim < 1) throw ValidationError("embed_dim must be >= 1");
  if (c.grid_n < 1) throw ValidationError("grid_n must be >= 1");
  if (!(c.kappa > 0.0)) throw ValidationError("kappa must be > 0");
  if (c.sigma_subject < 0.0) throw ValidationError("sigma_subject must be >= 0");
  if (!(c.drift_rate > 0.0 && c.drift_rate <= 1.0))
    throw ValidationError("drift_rate must lie in (0,1]");
  if (!(c.duration_min > 0.0 && c.duration_min <= c.duration_max))
    throw ValidationError("invalid word duration range");
  for (double p : {c.p_ungroundable, c.p_grounded, c.p_ambiguous})
    if (p < 0.0 || p > 1.0)
      throw ValidationError("probabilities must lie in [0,1]");
}

struct WordTruth {
  Vec2 target_center;  // pixels; the primary attractor
  bool groundable = true;
  bool ambiguous = false;
  Vec2 alt_center;  // pixels; meaningful iff ambiguous
};

struct SceneTruth {
  std::string scene_id;
  std::vector<WordTruth> words;
};

struct SynthResult {
  std::vector<SceneBundle> bundles;
  std::vector<SceneTruth> truth;
};

namespace detail {

inline std::vector<double> unit_vector(int dim, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  double norm2 = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

}  // namespace detail

inline SynthResult generate(const SynthConfig& cfg) {
  validate_config(cfg);
  SynthResult out;
  char idbuf[64];

  for (int scene_idx = 0; scene_idx < cfg.n_scenes; ++scene_idx) {
    Rng rng = Rng::derive(cfg.seed, "synthetic-scene",
                          static_cast<std::uint64_t>(scene_idx));
    std::snprintf(idbuf, sizeof(idbuf), "synth-%llu-%04d",
                  static_cast<unsigned long long>(cfg.seed), scene_idx);

    SceneBundle b;
    b.scene_id = idbuf;
    b.width = cfg.image_size;
    b.height = cfg.image_size;
    b.embed_dim = cfg.embed_dim;
    b.grid_n = cfg.grid_n;

    const int n_patches = cfg.grid_n * cfg.grid_n;
    const double cell = cfg.image_size / cfg.grid_n;
    for (int r = 0; r < cfg.grid_n; ++r)
      for (int c = 0; c < cfg.grid_n; ++c) {
        ScenePatch p;
        p.center = {(c + 0.5) * cell, (r + 0.5) * cell};
        p.embedding = detail::unit_vector(cfg.embed_dim, rng);
        b.patches.push_back(std::move(p));
      }

    const int salient_patch = static_cast<int>(rng.below(n_patches));
    b.salient_point = b.patches[salient_patch].center;

    // word targets, flags, embeddings, timestamps
    SceneTruth truth;
    truth.scene_id = b.scene_id;
    std::vector<int> primary(cfg.words_per_scene);
    std::vector<int> alt(cfg.words_per_scene, -1);
    double t = 0.0;
    for (int i = 0; i < cfg.words_per_scene; ++i) {
      TimedWord w;
      w.text = "word" + std::to_string(i + 1);
      w.t_start = t;
      t += rng.uniform(cfg.duration_min, cfg.duration_max);
      w.t_end = t;

      // the first word is always groundable so every scene has an anchor
      const bool groundable = i == 0 || rng.uniform() >= cfg.p_ungroundable;
      WordTruth wt;
      if (groundable) {
        primary[i] = static_cast<int>(rng.below(n_patches));
        const bool ambiguous = rng.uniform() < cfg.p_ambiguous;
        if (ambiguous) {
          int other = static_cast<int>(rng.below(n_patches - 1));
          if (other >= primary[i]) ++other;
          alt[i] = other;
        }
        // embedding leans toward the primary so commitment is learnable
        w.embedding.assign(static_cast<std::size_t>(cfg.embed_dim), 0.0);
        const auto& ep = b.patches[primary[i]].embedding;
        for (int k = 0; k < cfg.embed_dim; ++k)
          w.embedding[k] = cfg.kappa * (ambiguous ? 0.65 : 1.0) * ep[k];
        if (ambiguous) {
          const auto& ea = b.patches[alt[i]].embedding;
          for (int k = 0; k < cfg.embed_dim; ++k)
            w.embedding[k] += cfg.kappa * 0.35 * ea[k];
        }
        for (double& x : w.embedding) x += cfg.emb_noise * rng.normal();
        if (rng.uniform() < cfg.p_grounded) {
          GroundedPatch g;
          g.center = b.patches[primary[i]].center;
          g.embedding = b.patches[primary[i]].embedding;
          w.grounded = std::move(g);
        }
        wt.groundable = true;
        wt.ambiguous = alt[i] >= 0;
        wt.target_center = b.patches[primary[i]].center;
        if (wt.ambiguous) wt.alt_center = b.patches[alt[i]].center;
      } else {
        // ungroundable: pure-noise embedding; the eye keeps tracking the
        // previous word's target
        primary[i] = primary[i - 1];
        alt[i] = alt[i - 1];
        w.embedding.resize(static_cast<std::size_t>(cfg.embed_dim));
        for (double& x : w.embedding) x = cfg.emb_noise * rng.normal();
        wt.groundable = false;
        wt.ambiguous = alt[i] >= 0;
        wt.target_center = b.patches[primary[i]].center;
        if (wt.ambiguous) wt.alt_center = b.patches[alt[i]].center;
      }
      truth.words.push_back(wt);
      b.words.push_back(std::move(w));
    }

    // an ungroundable word keeps the attention group of the word it inherits
    // from, so a subject's ambiguity commitment persists across it
    std::vector<int> group(cfg.words_per_scene, 0);
    for (int i = 1; i < cfg.words_per_scene; ++i)
      group[i] = truth.words[i].groundable ? i : group[i - 1];

    // subject trajectories: drift toward the (committed) target plus noise
    for (int s = 1; s <= cfg.subjects; ++s) {
      Rng srng = Rng::derive(cfg.seed, "synthetic-subject",
                             static_cast<std::uint64_t>(scene_idx),
                             static_cast<std::uint64_t>(s));
      GazeTrajectory traj;
      traj.subject_id = s;
      Vec2 pos = b.normalize(b.salient_point);
      int committed = -1;
      int committed_group = -1;
      for (int i = 0; i < cfg.words_per_scene; ++i) {
        int target = primary[i];
        if (alt[i] >= 0) {
          if (committed_group != group[i]) {
            committed = srng.uniform() < 0.5 ? primary[i] : alt[i];
            committed_group = group[i];
          }
          target = committed;
        }
        const Vec2 tc = b.normalize(b.patches[target].center);
        const double nx = srng.normal();
        const double ny = srng.normal();
        pos.x += cfg.drift_rate * (tc.x - pos.x) + cfg.sigma_subject * nx;
        pos.y += cfg.drift_rate * (tc.y - pos.y) + cfg.sigma_subject * ny;
        pos.x = clamp01(pos.x);
        pos.y = clamp01(pos.y);
        traj.points.push_back(b.to_pixels(pos));
      }
      b.trajectories.push_back(std::move(traj));
    }

    validate_bundle(b);
    out.bundles.push_back(std::move(b));
    out.truth.push_back(std::move(truth));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Truth sidecar (de)serialization

inline nlohmann::json truth_to_json(const std::vector<SceneTruth>& truth) {
  nlohmann::json scenes = nlohmann::json::array();
  for (const SceneTruth& st : truth) {
    nlohmann::json words = nlohmann::json::array();
    for (const WordTruth& w : st.words) {
      nlohmann::json wj{{"target_center", {w.target_center.x, w.target_center.y}},
                        {"groundable", w.groundable},
                        {"ambiguous", w.ambiguous}};
      if (w.ambiguous)
        wj["alt_center"] = {w.alt_center.x, w.alt_center.y};
      words.push_back(std::move(wj));
    }
    scenes.push_back({{"scene_id", st.scene_id}, {"words", std::move(words)}});
  }
  return {{"scenes", std::move(scenes)}};
}

inline std::vector<SceneTruth> truth_from_json(const nlohmann::json& j) {
  std::vector<SceneTruth> out;
  try {
    for (const auto& sj : j.at("scenes")) {
      SceneTruth st;
      st.scene_id = sj.at("scene_id").get<std::string>();
      for (const auto& wj : sj.at("words")) {
        WordTruth w;
        w.target_center = {wj.at("target_center")[0].get<double>(),
                           wj.at("target_center")[1].get<double>()};
        w.groundable = wj.at("groundable").get<bool>();
        w.ambiguous = wj.at("ambiguous").get<bool>();
        if (w.ambiguous)
          w.alt_center = {wj.at("alt_center")[0].get<double>(),
                          wj.at("alt_center")[1].get<double>()};
        st.words.push_back(w);
      }
      out.push_back(std::move(st));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("truth file: ") + e.what());
  }
  return out;
}

inline void save_truth(const std::vector<SceneTruth>& truth,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << truth_to_json(truth).dump(1) << "\n";
}

inline std::vector<SceneTruth> load_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return truth_from_json(j);
}

}  // namespace eyear
