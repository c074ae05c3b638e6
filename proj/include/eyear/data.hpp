#pragma once

// Domain types for scenes and gaze data, the scene-bundle JSON format, and
// the train/val/test split.
//
// Files store pixel coordinates; everything model-internal works on
// coordinates normalized to [0,1]^2 by the image size. Bundles are immutable
// after load and safe to share across threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eyear/common.hpp"

namespace eyear {

struct GroundedPatch {
  std::vector<double> embedding;
  Vec2 center;  // pixels

  bool operator==(const GroundedPatch&) const = default;
};

struct TimedWord {
  std::string text;
  std::vector<double> embedding;
  double t_start = 0.0;
  double t_end = 0.0;
  std::optional<GroundedPatch> grounded;

  bool operator==(const TimedWord&) const = default;
};

struct GazeTrajectory {
  int subject_id = 0;
  std::vector<Vec2> points;  // pixels, one per word

  bool operator==(const GazeTrajectory&) const = default;
};

struct ScenePatch {
  Vec2 center;  // pixels
  std::vector<double> embedding;

  bool operator==(const ScenePatch&) const = default;
};

struct SceneBundle {
  std::string scene_id;
  double width = 0.0;
  double height = 0.0;
  int embed_dim = 0;
  int grid_n = 0;
  std::vector<ScenePatch> patches;  // grid_n^2 entries, row-major
  Vec2 salient_point;               // pixels
  std::vector<TimedWord> words;
  std::vector<GazeTrajectory> trajectories;

  std::size_t word_count() const { return words.size(); }
  std::size_t subject_count() const { return trajectories.size(); }

  Vec2 normalize(const Vec2& p) const { return {p.x / width, p.y / height}; }
  Vec2 to_pixels(const Vec2& p) const { return {p.x * width, p.y * height}; }

  bool operator==(const SceneBundle&) const = default;
};

enum class Split { Train, Val, Test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    default: return "test";
  }
}

struct Dataset {
  std::vector<SceneBundle> bundles;
  std::vector<Split> splits;  // parallel to bundles
  std::uint64_t split_seed = 0;

  std::vector<const SceneBundle*> split(Split which) const {
    std::vector<const SceneBundle*> out;
    for (std::size_t i = 0; i < bundles.size(); ++i)
      if (splits[i] == which) out.push_back(&bundles[i]);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline void check_finite(double v, const char* what) {
  if (!std::isfinite(v))
    throw ValidationError(std::string("non-finite value in ") + what);
}

inline void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) check_finite(x, what);
}

}  // namespace detail

inline void validate_bundle(const SceneBundle& b) {
  if (b.scene_id.empty()) throw ValidationError("scene_id empty");
  if (!(b.width > 0.0) || !(b.height > 0.0))
    throw ValidationError("image size must be positive");
  if (b.embed_dim < 1) throw ValidationError("embed_dim must be >= 1");
  if (b.grid_n < 1) throw ValidationError("grid_n must be >= 1");

  const std::size_t want_patches =
      static_cast<std::size_t>(b.grid_n) * static_cast<std::size_t>(b.grid_n);
  if (b.patches.size() != want_patches)
    throw ValidationError("patch count " + std::to_string(b.patches.size()) +
                          " != grid_n^2 = " + std::to_string(want_patches));
  for (const ScenePatch& p : b.patches) {
    detail::check_finite(p.embedding, "patch embedding");
    detail::check_finite(p.center.x, "patch center");
    detail::check_finite(p.center.y, "patch center");
    if (p.embedding.size() != static_cast<std::size_t>(b.embed_dim))
      throw ValidationError("patch embedding dimension");
    if (!(p.center.x > 0.0 && p.center.x < b.width && p.center.y > 0.0 &&
          p.center.y < b.height))
      throw ValidationError("patch center outside image");
  }

  detail::check_finite(b.salient_point.x, "salient_point");
  detail::check_finite(b.salient_point.y, "salient_point");
  if (b.salient_point.x < 0.0 || b.salient_point.x > b.width ||
      b.salient_point.y < 0.0 || b.salient_point.y > b.height)
    throw ValidationError("salient_point outside image");

  if (b.words.empty()) throw ValidationError("transcript empty");
  if (b.words.front().t_start < 0.0)
    throw ValidationError("word timestamps must be nonnegative");
  double prev_end = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < b.words.size(); ++i) {
    const TimedWord& w = b.words[i];
    detail::check_finite(w.t_start, "word timestamps");
    detail::check_finite(w.t_end, "word timestamps");
    detail::check_finite(w.embedding, "word embedding");
    if (w.embedding.size() != static_cast<std::size_t>(b.embed_dim))
      throw ValidationError("word embedding dimension at word " +
                            std::to_string(i + 1));
    if (!(w.t_start < w.t_end))
      throw ValidationError("word " + std::to_string(i + 1) +
                            " has t_start >= t_end");
    if (!(w.t_start >= prev_end))
      throw ValidationError("word " + std::to_string(i + 1) +
                            " overlaps the previous word");
    prev_end = w.t_end;
    if (w.grounded) {
      detail::check_finite(w.grounded->embedding, "grounded embedding");
      detail::check_finite(w.grounded->center.x, "grounded center");
      detail::check_finite(w.grounded->center.y, "grounded center");
      if (w.grounded->embedding.size() !=
          static_cast<std::size_t>(b.embed_dim))
        throw ValidationError("grounded embedding dimension at word " +
                              std::to_string(i + 1));
    }
  }

  if (b.trajectories.size() < 2)
    throw ValidationError("need at least 2 subject trajectories");
  std::vector<int> seen_ids;
  for (const GazeTrajectory& t : b.trajectories) {
    if (t.subject_id < 1 ||
        t.subject_id > static_cast<int>(b.trajectories.size()))
      throw ValidationError("subject_id out of range");
    if (std::find(seen_ids.begin(), seen_ids.end(), t.subject_id) !=
        seen_ids.end())
      throw ValidationError("duplicate subject_id");
    seen_ids.push_back(t.subject_id);
    if (t.points.size() != b.words.size())
      throw ValidationError("trajectory length " +
                            std::to_string(t.points.size()) +
                            " != word count " +
                            std::to_string(b.words.size()));
    for (const Vec2& p : t.points) {
      detail::check_finite(p.x, "trajectory point");
      detail::check_finite(p.y, "trajectory point");
      if (p.x < 0.0 || p.x > b.width || p.y < 0.0 || p.y > b.height)
        throw ValidationError("trajectory point outside image");
    }
  }
}

// ---------------------------------------------------------------------------
// JSON (de)serialization

namespace detail {

inline nlohmann::json vec2_json(const Vec2& p) {
  return nlohmann::json::array({p.x, p.y});
}

inline Vec2 vec2_from(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 2)
    throw ParseError(std::string(what) + " must be a [x,y] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

inline nlohmann::json bundle_to_json(const SceneBundle& b) {
  nlohmann::json j;
  j["scene_id"] = b.scene_id;
  j["image_size"] = {b.width, b.height};
  j["embed_dim"] = b.embed_dim;
  j["grid_n"] = b.grid_n;
  j["patches"] = nlohmann::json::array();
  for (const ScenePatch& p : b.patches)
    j["patches"].push_back(
        {{"center", detail::vec2_json(p.center)}, {"emb", p.embedding}});
  j["salient_point"] = detail::vec2_json(b.salient_point);
  j["words"] = nlohmann::json::array();
  for (const TimedWord& w : b.words) {
    nlohmann::json wj{{"w", w.text},
                      {"t_start", w.t_start},
                      {"t_end", w.t_end},
                      {"emb", w.embedding}};
    if (w.grounded)
      wj["grounded"] = {{"center", detail::vec2_json(w.grounded->center)},
                        {"emb", w.grounded->embedding}};
    else
      wj["grounded"] = nullptr;
    j["words"].push_back(std::move(wj));
  }
  j["trajectories"] = nlohmann::json::array();
  for (const GazeTrajectory& t : b.trajectories) {
    nlohmann::json pts = nlohmann::json::array();
    for (const Vec2& p : t.points) pts.push_back(detail::vec2_json(p));
    j["trajectories"].push_back(
        {{"subject", t.subject_id}, {"points", std::move(pts)}});
  }
  return j;
}

inline SceneBundle bundle_from_json(const nlohmann::json& j) {
  SceneBundle b;
  try {
    b.scene_id = j.at("scene_id").get<std::string>();
    const auto& size = j.at("image_size");
    if (!size.is_array() || size.size() != 2)
      throw ParseError("image_size must be [W,H]");
    b.width = size[0].get<double>();
    b.height = size[1].get<double>();
    b.embed_dim = j.at("embed_dim").get<int>();
    b.grid_n = j.at("grid_n").get<int>();
    for (const auto& pj : j.at("patches")) {
      ScenePatch p;
      p.center = detail::vec2_from(pj.at("center"), "patch center");
      p.embedding = pj.at("emb").get<std::vector<double>>();
      b.patches.push_back(std::move(p));
    }
    b.salient_point = detail::vec2_from(j.at("salient_point"), "salient_point");
    for (const auto& wj : j.at("words")) {
      TimedWord w;
      w.text = wj.at("w").get<std::string>();
      w.t_start = wj.at("t_start").get<double>();
      w.t_end = wj.at("t_end").get<double>();
      w.embedding = wj.at("emb").get<std::vector<double>>();
      const auto& g = wj.at("grounded");
      if (!g.is_null()) {
        GroundedPatch gp;
        gp.center = detail::vec2_from(g.at("center"), "grounded center");
        gp.embedding = g.at("emb").get<std::vector<double>>();
        w.grounded = std::move(gp);
      }
      b.words.push_back(std::move(w));
    }
    for (const auto& tj : j.at("trajectories")) {
      GazeTrajectory t;
      t.subject_id = tj.at("subject").get<int>();
      for (const auto& pj : tj.at("points"))
        t.points.push_back(detail::vec2_from(pj, "trajectory point"));
      b.trajectories.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scene bundle: ") + e.what());
  }
  return b;
}

inline SceneBundle load_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  SceneBundle b = bundle_from_json(j);
  validate_bundle(b);
  return b;
}

inline void save_bundle(const SceneBundle& b, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << bundle_to_json(b).dump(1) << "\n";
}

// ---------------------------------------------------------------------------
// Split

// Floor-based 8:1:1 with the remainder going to train. Bundles are sorted by
// scene_id before shuffling so the assignment ignores input order.
inline std::vector<Split> assign_splits(std::vector<std::string> scene_ids,
                                        std::uint64_t seed) {
  const std::size_t n = scene_ids.size();
  if (n < 10)
    throw TooFewScenes("split needs at least 10 scenes, got " +
                       std::to_string(n));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) {
              return scene_ids[a] < scene_ids[b];
            });
  for (std::size_t i = 1; i < n; ++i)
    if (scene_ids[order[i - 1]] == scene_ids[order[i]])
      throw ValidationError("duplicate scene_id: " + scene_ids[order[i]]);
  Rng rng = Rng::derive(seed, "dataset-split");
  rng.shuffle(order);

  const std::size_t n_val = n / 10;
  const std::size_t n_test = n / 10;
  const std::size_t n_train = n - n_val - n_test;

  std::vector<Split> splits(n, Split::Train);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) splits[order[i]] = Split::Train;
    else if (i < n_train + n_val) splits[order[i]] = Split::Val;
    else splits[order[i]] = Split::Test;
  }
  return splits;
}

inline Dataset split_dataset(std::vector<SceneBundle> bundles,
                             std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(bundles.size());
  for (const SceneBundle& b : bundles) ids.push_back(b.scene_id);
  Dataset d;
  d.splits = assign_splits(std::move(ids), seed);
  d.bundles = std::move(bundles);
  d.split_seed = seed;
  return d;
}

// ---------------------------------------------------------------------------
// Dataset manifest: a JSON list of bundle paths plus the split seed.

inline void save_manifest(const std::vector<std::string>& bundle_paths,
                          std::uint64_t seed, const std::string& path) {
  nlohmann::json j;
  j["bundles"] = bundle_paths;
  j["split_seed"] = seed;
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(1) << "\n";
}

// Paths in the manifest are resolved relative to the manifest's directory.
inline Dataset load_dataset(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ParseError("cannot open " + manifest_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path + ": " + e.what());
  }

  std::string dir;
  if (const auto pos = manifest_path.find_last_of('/');
      pos != std::string::npos)
    dir = manifest_path.substr(0, pos + 1);

  std::vector<SceneBundle> bundles;
  std::uint64_t seed = 0;
  try {
    seed = j.at("split_seed").get<std::uint64_t>();
    for (const auto& pj : j.at("bundles")) {
      std::string p = pj.get<std::string>();
      if (!p.empty() && p[0] != '/') p = dir + p;
      bundles.push_back(load_bundle(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path + ": " + e.what());
  }
  return split_dataset(std::move(bundles), seed);
}

}  // namespace eyear
