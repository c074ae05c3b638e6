#pragma once

// Run artifacts: the per-run manifest, rollout exports, and CSV writers.
// Every CLI command writes exactly one manifest next to its outputs; the
// manifest records the command, its effective configuration, inputs, outputs,
// output hashes, and wall-clock time. Hashes are FNV-1a over file bytes.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eyear/common.hpp"
#include "eyear/dynamics.hpp"
#include "eyear/train.hpp"

namespace eyear {

inline std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot hash missing file " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[16384];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    if (!in) break;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;  // paths relative to the manifest dir
  double wall_clock_s = 0.0;
};

// Writes <dir>/manifest.json, hashing every listed output.
inline void write_manifest(const RunManifest& m, const std::string& dir) {
  nlohmann::json j;
  j["command"] = m.command;
  j["config"] = m.config;
  j["seed"] = m.seed;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  nlohmann::json hashes;
  for (const std::string& out : m.outputs)
    hashes[out] = file_hash_hex(dir + "/" + out);
  j["output_hashes"] = std::move(hashes);
  j["wall_clock_s"] = m.wall_clock_s;
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw Error("cannot write manifest in " + dir);
  out << j.dump(1) << "\n";
}

class WallClock {
 public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// ---------------------------------------------------------------------------
// Rollout export: pixel-space points plus the word end times, so downstream
// saccade analysis is self-contained.

inline nlohmann::json rollout_to_json(const SceneBundle& scene,
                                      const Rollout& r, RolloutMode mode,
                                      int subject = -1) {
  nlohmann::json points = nlohmann::json::array();
  for (const Tensor& t : r.points) {
    const Vec2 px = scene.to_pixels(t.as_vec2());
    points.push_back({px.x, px.y});
  }
  nlohmann::json times = nlohmann::json::array();
  for (const TimedWord& w : scene.words) times.push_back(w.t_end);
  nlohmann::json j{{"scene_id", scene.scene_id},
                   {"mode", rollout_mode_name(mode)},
                   {"points", std::move(points)},
                   {"t_end", std::move(times)}};
  if (subject >= 0) j["subject"] = subject;
  return j;
}

inline TimedTrajectory trajectory_from_rollout_json(const nlohmann::json& j) {
  TimedTrajectory t;
  try {
    for (const auto& pj : j.at("points"))
      t.points.push_back({pj[0].get<double>(), pj[1].get<double>()});
    for (const auto& tj : j.at("t_end")) t.times.push_back(tj.get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("rollout file: ") + e.what());
  }
  if (t.points.size() != t.times.size())
    throw ParseError("rollout file: points/t_end length mismatch");
  return t;
}

inline TimedTrajectory load_rollout_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return trajectory_from_rollout_json(j);
}

// ---------------------------------------------------------------------------
// Training log CSV

inline void write_training_log_csv(const std::vector<EpochLog>& log,
                                   std::ostream& out) {
  out << "epoch,stage,train_loss,val_loss,alpha\n";
  for (const EpochLog& e : log)
    out << e.epoch << ',' << e.stage << ',' << e.train_loss << ','
        << e.val_loss << ',' << e.alpha << '\n';
}

}  // namespace eyear
