#pragma once

// Two-stage optimization: teacher-forced MSE until the validation loss
// plateaus, then the probability-density loss. AdamW throughout, one
// (scene, subject) pair per sample, gradient accumulation over a batch of
// samples. Per-sample gradients are computed on parameter clones and reduced
// in sample order, so results do not depend on the worker thread count.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "eyear/common.hpp"
#include "eyear/data.hpp"
#include "eyear/density.hpp"
#include "eyear/dynamics.hpp"
#include "eyear/metrics.hpp"
#include "eyear/model.hpp"

namespace eyear {

// ---------------------------------------------------------------------------
// Parallel helper with deterministic result slots.

template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& fn) {
  if (threads == 0) threads = thread_cap();
  threads = static_cast<unsigned>(
      std::min<std::size_t>(threads, n == 0 ? 1 : n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&] {
    std::size_t i;
    while ((i = next.fetch_add(1)) < n && !failed.load()) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Config

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  int epochs_max_stage1 = 60;
  int epochs_max_stage2 = 40;
  int plateau_patience = 5;
  double plateau_min_delta = 1e-3;  // relative improvement threshold
  int batch_samples = 8;            // gradient accumulation width
  int kde_grid_res = 256;
  double bandwidth_floor = 0.02;
  bool mse_only = false;  // stage 1 only ("w/o PD loss")
  int threads = 0;        // 0 -> EYEAR_THREADS / hardware
  std::uint64_t seed = 0;

  bool operator==(const TrainConfig&) const = default;
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"weight_decay", c.weight_decay},
          {"epochs_max_stage1", c.epochs_max_stage1},
          {"epochs_max_stage2", c.epochs_max_stage2},
          {"plateau_patience", c.plateau_patience},
          {"plateau_min_delta", c.plateau_min_delta},
          {"batch_samples", c.batch_samples},
          {"kde_grid_res", c.kde_grid_res},
          {"bandwidth_floor", c.bandwidth_floor},
          {"mse_only", c.mse_only},
          {"threads", c.threads},
          {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.epochs_max_stage1 = j.value("epochs_max_stage1", c.epochs_max_stage1);
  c.epochs_max_stage2 = j.value("epochs_max_stage2", c.epochs_max_stage2);
  c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
  c.plateau_min_delta = j.value("plateau_min_delta", c.plateau_min_delta);
  c.batch_samples = j.value("batch_samples", c.batch_samples);
  c.kde_grid_res = j.value("kde_grid_res", c.kde_grid_res);
  c.bandwidth_floor = j.value("bandwidth_floor", c.bandwidth_floor);
  c.mse_only = j.value("mse_only", c.mse_only);
  c.threads = j.value("threads", c.threads);
  c.seed = j.value("seed", c.seed);
  if (!(c.lr > 0.0)) throw ValidationError("lr must be > 0");
  if (c.plateau_patience < 1) throw ValidationError("patience must be >= 1");
  return c;
}

// ---------------------------------------------------------------------------
// AdamW

struct AdamWState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;
};

// Decoupled weight decay applied multiplicatively before the Adam update;
// bias-corrected moments.
inline void adamw_step(const std::vector<std::pair<std::string, Tensor>>& params,
                       const std::vector<std::vector<double>>& grads,
                       AdamWState& state, const TrainConfig& cfg) {
  if (grads.size() != params.size())
    throw ShapeMismatch("adamw: " + std::to_string(params.size()) +
                        " parameters vs " + std::to_string(grads.size()) +
                        " gradients");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].second.numel(), 0.0);
      state.v[i].assign(params[i].second.numel(), 0.0);
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - cfg.lr * cfg.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor handle = params[i].second;  // shares the underlying storage
    std::vector<double>& p = handle.values();
    const std::vector<double>& g = grads[i];
    if (g.size() != p.size())
      throw ShapeMismatch("adamw: gradient size mismatch for " +
                          params[i].first);
    std::vector<double>& m = state.m[i];
    std::vector<double>& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      p[k] *= decay;
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

struct EpochLog {
  int epoch = 0;
  int stage = 1;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double alpha = 0.5;
};

struct Checkpoint {
  int stage = 1;
  int epoch = 0;  // epochs completed within the current stage
  ModelParams params;
  ModelParams best_params;
  double best_val = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
  std::optional<ModelParams> stage1_params;  // best of stage 1, kept in stage 2
  AdamWState opt;
  TrainConfig train_config;
  std::vector<EpochLog> log;
};

inline nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
  nlohmann::json j;
  j["version"] = 1;
  j["stage"] = ck.stage;
  j["epoch"] = ck.epoch;
  j["train_config"] = train_config_to_json(ck.train_config);
  j["model"] = params_to_json(ck.params);
  j["best_model"] = params_to_json(ck.best_params);
  if (std::isfinite(ck.best_val)) j["best_val"] = ck.best_val;
  else j["best_val"] = nullptr;
  j["bad_epochs"] = ck.bad_epochs;
  if (ck.stage1_params) j["stage1_model"] = params_to_json(*ck.stage1_params);
  nlohmann::json opt;
  opt["step"] = ck.opt.step;
  nlohmann::json om, ov;
  const auto named = ck.params.named();
  for (std::size_t i = 0; i < named.size(); ++i) {
    om[named[i].first] = i < ck.opt.m.size() ? ck.opt.m[i]
                                             : std::vector<double>();
    ov[named[i].first] = i < ck.opt.v.size() ? ck.opt.v[i]
                                             : std::vector<double>();
  }
  opt["m"] = std::move(om);
  opt["v"] = std::move(ov);
  j["opt"] = std::move(opt);
  nlohmann::json log = nlohmann::json::array();
  for (const EpochLog& e : ck.log)
    log.push_back({{"epoch", e.epoch},
                   {"stage", e.stage},
                   {"train_loss", e.train_loss},
                   {"val_loss", e.val_loss},
                   {"alpha", e.alpha}});
  j["log"] = std::move(log);
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  Checkpoint ck;
  try {
    ck.stage = j.at("stage").get<int>();
    ck.epoch = j.at("epoch").get<int>();
    ck.train_config = train_config_from_json(j.at("train_config"));
    ck.params = params_from_json(j.at("model"));
    ck.best_params = params_from_json(j.at("best_model"));
    ck.best_val = j.at("best_val").is_null()
                      ? std::numeric_limits<double>::infinity()
                      : j.at("best_val").get<double>();
    ck.bad_epochs = j.at("bad_epochs").get<int>();
    if (j.contains("stage1_model"))
      ck.stage1_params = params_from_json(j.at("stage1_model"));
    const auto& opt = j.at("opt");
    ck.opt.step = opt.at("step").get<std::int64_t>();
    const auto named = ck.params.named();
    ck.opt.m.resize(named.size());
    ck.opt.v.resize(named.size());
    for (std::size_t i = 0; i < named.size(); ++i) {
      ck.opt.m[i] = opt.at("m").at(named[i].first).get<std::vector<double>>();
      ck.opt.v[i] = opt.at("v").at(named[i].first).get<std::vector<double>>();
    }
    for (const auto& ej : j.at("log")) {
      EpochLog e;
      e.epoch = ej.at("epoch").get<int>();
      e.stage = ej.at("stage").get<int>();
      e.train_loss = ej.at("train_loss").get<double>();
      e.val_loss = ej.at("val_loss").get<double>();
      e.alpha = ej.at("alpha").get<double>();
      ck.log.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << checkpoint_to_json(ck).dump() << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

// ---------------------------------------------------------------------------
// Trainer

namespace detail {

struct Sample {
  const SceneBundle* scene;
  std::size_t subject;
};

// Teacher-forced loss for one sample on the given (usually cloned) params.
inline Tensor sample_loss(const Sample& s, const ModelParams& params,
                          int stage,
                          const std::vector<KdeMixture>* mixes) {
  const GazeTrajectory& gt = s.scene->trajectories[s.subject];
  Rollout r = rollout(*s.scene, params, RolloutMode::TeacherForced, &gt);
  if (stage == 1) {
    std::vector<Vec2> target;
    target.reserve(gt.points.size());
    for (const Vec2& p : gt.points) target.push_back(s.scene->normalize(p));
    return mse_loss(r.points, target);
  }
  return pd_loss(*mixes, r.points);
}

struct BatchResult {
  double loss_sum = 0.0;
  std::vector<std::vector<double>> grads;  // aligned with ModelParams::named
};

}  // namespace detail

class Trainer {
 public:
  Trainer(const Dataset& data, TrainConfig tcfg, ModelConfig mcfg)
      : data_(data), cfg_(std::move(tcfg)) {
    ck_.train_config = cfg_;
    ck_.params = init_params(mcfg, cfg_.seed);
    ck_.best_params = ck_.params.clone();
    collect_samples();
  }

  Trainer(const Dataset& data, Checkpoint resume)
      : data_(data), cfg_(resume.train_config), ck_(std::move(resume)) {
    collect_samples();
  }

  // Runs stage 1 (and stage 2 unless mse_only) to completion.
  Checkpoint run() {
    if (ck_.stage == 1) {
      run_stage(1, cfg_.epochs_max_stage1);
      ck_.stage1_params = ck_.best_params.clone();
      if (cfg_.mse_only) {
        ck_.params = ck_.best_params.clone();
        return ck_;
      }
      enter_stage2();
    }
    run_stage(2, cfg_.epochs_max_stage2);
    ck_.params = ck_.best_params.clone();
    return ck_;
  }

  // Runs exactly `epochs` epochs of the current stage regardless of plateau
  // state (for resume tests and incremental training).
  void run_epochs(int epochs) {
    if (ck_.stage == 2 && mixture_cache_.empty()) prepare_mixtures();
    for (int e = 0; e < epochs; ++e) epoch_once();
  }

  const Checkpoint& checkpoint() const { return ck_; }
  Checkpoint& checkpoint() { return ck_; }

 private:
  void collect_samples() {
    for (std::size_t i = 0; i < data_.bundles.size(); ++i) {
      if (data_.splits[i] != Split::Train) continue;
      for (std::size_t s = 0; s < data_.bundles[i].subject_count(); ++s)
        train_samples_.push_back({&data_.bundles[i], s});
    }
    for (std::size_t i = 0; i < data_.bundles.size(); ++i) {
      if (data_.splits[i] != Split::Val) continue;
      for (std::size_t s = 0; s < data_.bundles[i].subject_count(); ++s)
        val_samples_.push_back({&data_.bundles[i], s});
    }
    if (train_samples_.empty())
      throw ValidationError("training split is empty");
  }

  void prepare_mixtures() {
    std::vector<const SceneBundle*> scenes;
    for (const detail::Sample& s : train_samples_)
      if (scenes.empty() || scenes.back() != s.scene)
        scenes.push_back(s.scene);
    for (const detail::Sample& s : val_samples_)
      if (scenes.empty() || scenes.back() != s.scene)
        scenes.push_back(s.scene);
    std::vector<std::vector<KdeMixture>> fitted(scenes.size());
    parallel_for(scenes.size(), static_cast<unsigned>(cfg_.threads),
                 [&](std::size_t i) {
                   fitted[i] = fit_scene_mixtures(
                       *scenes[i], cfg_.bandwidth_floor, cfg_.kde_grid_res);
                 });
    for (std::size_t i = 0; i < scenes.size(); ++i)
      mixture_cache_[scenes[i]->scene_id] = std::move(fitted[i]);
  }

  void enter_stage2() {
    ck_.stage = 2;
    ck_.epoch = 0;
    ck_.best_val = std::numeric_limits<double>::infinity();
    ck_.bad_epochs = 0;
    ck_.opt = AdamWState{};  // fresh moments for the new objective
    ck_.best_params = ck_.params.clone();
    prepare_mixtures();
  }

  void run_stage(int stage, int epochs_max) {
    if (ck_.stage != stage) return;
    if (stage == 2 && mixture_cache_.empty()) prepare_mixtures();
    while (ck_.epoch < epochs_max) {
      epoch_once();
      if (ck_.bad_epochs >= cfg_.plateau_patience) break;
    }
  }

  const std::vector<KdeMixture>* mixes_for(const SceneBundle* scene) const {
    if (ck_.stage == 1) return nullptr;
    return &mixture_cache_.at(scene->scene_id);
  }

  // One epoch: shuffled pass over training samples with gradient
  // accumulation, then a validation pass.
  void epoch_once() {
    const int stage = ck_.stage;
    std::vector<std::size_t> order(train_samples_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng =
        Rng::derive(cfg_.seed, "epoch-shuffle", static_cast<std::uint64_t>(stage),
                    static_cast<std::uint64_t>(ck_.epoch));
    shuffle_rng.shuffle(order);

    const auto named = ck_.params.named();
    double train_loss_sum = 0.0;

    const std::size_t batch =
        std::max<std::size_t>(1, static_cast<std::size_t>(cfg_.batch_samples));
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t count = std::min(batch, order.size() - begin);
      std::vector<double> losses(count);
      std::vector<std::vector<std::vector<double>>> grads(count);
      parallel_for(count, static_cast<unsigned>(cfg_.threads),
                   [&](std::size_t k) {
                     const detail::Sample& s =
                         train_samples_[order[begin + k]];
                     ModelParams local = ck_.params.clone();
                     Tape tape;
                     Tensor loss = detail::sample_loss(
                         s, local, stage, mixes_for(s.scene));
                     losses[k] = loss.value();
                     tape.backward(loss);
                     auto local_named = local.named();
                     grads[k].reserve(local_named.size());
                     for (auto& [name, t] : local_named)
                       grads[k].push_back(t.grad());
                   });

      std::vector<std::vector<double>> batch_grads(named.size());
      for (std::size_t i = 0; i < named.size(); ++i)
        batch_grads[i].assign(named[i].second.numel(), 0.0);
      for (std::size_t k = 0; k < count; ++k) {
        const detail::Sample& s = train_samples_[order[begin + k]];
        if (!std::isfinite(losses[k]))
          throw DivergedLoss("non-finite training loss on scene " +
                             s.scene->scene_id);
        train_loss_sum += losses[k];
        for (std::size_t i = 0; i < named.size(); ++i)
          for (std::size_t j = 0; j < batch_grads[i].size(); ++j)
            batch_grads[i][j] += grads[k][i][j];
      }
      const double inv = 1.0 / static_cast<double>(count);
      for (auto& g : batch_grads)
        for (double& x : g) x *= inv;
      adamw_step(named, batch_grads, ck_.opt, cfg_);
    }

    const double train_loss =
        train_loss_sum / static_cast<double>(train_samples_.size());
    const double val_loss = validation_loss(stage);
    ck_.epoch += 1;
    ck_.log.push_back({ck_.epoch, stage, train_loss, val_loss,
                       ck_.params.alpha()});

    const double threshold =
        ck_.best_val - cfg_.plateau_min_delta * std::abs(ck_.best_val);
    if (val_loss < threshold) {
      ck_.best_val = val_loss;
      ck_.bad_epochs = 0;
      ck_.best_params = ck_.params.clone();
    } else {
      ck_.bad_epochs += 1;
    }
  }

  double validation_loss(int stage) {
    // no validation split: track the training objective instead
    const auto& samples = val_samples_.empty() ? train_samples_ : val_samples_;
    return eval_samples(samples, stage);
  }

  double eval_samples(const std::vector<detail::Sample>& samples, int stage) {
    std::vector<double> losses(samples.size());
    parallel_for(samples.size(), static_cast<unsigned>(cfg_.threads),
                 [&](std::size_t i) {
                   losses[i] = detail::sample_loss(samples[i], ck_.params,
                                                   stage,
                                                   mixes_for(samples[i].scene))
                                   .value();
                 });
    double acc = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (!std::isfinite(losses[i]))
        throw DivergedLoss("non-finite validation loss on scene " +
                           samples[i].scene->scene_id);
      acc += losses[i];
    }
    return acc / static_cast<double>(samples.size());
  }

  const Dataset& data_;
  TrainConfig cfg_;
  Checkpoint ck_;
  std::vector<detail::Sample> train_samples_;
  std::vector<detail::Sample> val_samples_;
  std::map<std::string, std::vector<KdeMixture>> mixture_cache_;
};

struct TrainResult {
  Checkpoint checkpoint;   // best-validation params of the final stage
  ModelParams stage1_params;  // best-validation params after stage 1
};

inline TrainResult train_two_stage(const Dataset& data,
                                   const TrainConfig& tcfg,
                                   const ModelConfig& mcfg) {
  Trainer trainer(data, tcfg, mcfg);
  Checkpoint ck = trainer.run();
  TrainResult out{std::move(ck), {}};
  out.stage1_params = out.checkpoint.stage1_params
                          ? out.checkpoint.stage1_params->clone()
                          : out.checkpoint.best_params.clone();
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation: free rollout per scene, all four metrics.

struct SceneMetrics {
  std::string scene_id;
  double ed = 0.0;      // pixels
  double dtw = 0.0;     // pixels
  double smatch = 0.0;  // [0,1]
  double pds = 0.0;     // [0,1]
};

struct EvalReport {
  std::vector<SceneMetrics> scenes;
  double ed = 0.0;
  double dtw = 0.0;
  double smatch = 0.0;
  double pds = 0.0;
};

inline EvalReport evaluate(const ModelParams& params, const Dataset& data,
                           Split split, int kde_grid_res = 256,
                           double bandwidth_floor = 0.02, int threads = 0) {
  const std::vector<const SceneBundle*> scenes = data.split(split);
  EvalReport report;
  report.scenes.resize(scenes.size());
  parallel_for(scenes.size(), static_cast<unsigned>(threads),
               [&](std::size_t i) {
                 const SceneBundle& scene = *scenes[i];
                 Rollout r = rollout(scene, params, RolloutMode::Free);
                 std::vector<Vec2> pred_norm = r.as_points();
                 std::vector<Vec2> pred_px;
                 pred_px.reserve(pred_norm.size());
                 for (const Vec2& p : pred_norm)
                   pred_px.push_back(scene.to_pixels(p));

                 std::vector<std::vector<Vec2>> gts;
                 for (const GazeTrajectory& t : scene.trajectories)
                   gts.push_back(t.points);

                 SceneMetrics m;
                 m.scene_id = scene.scene_id;
                 m.ed = euclidean(pred_px, gts);
                 double dtw_acc = 0.0, sm_acc = 0.0;
                 for (const auto& gt : gts) {
                   dtw_acc += dtw(pred_px, gt);
                   sm_acc += scanmatch(pred_px, gt, scene.width, scene.height);
                 }
                 m.dtw = dtw_acc / static_cast<double>(gts.size());
                 m.smatch = sm_acc / static_cast<double>(gts.size());
                 auto mixes =
                     fit_scene_mixtures(scene, bandwidth_floor, kde_grid_res);
                 m.pds = trajectory_pds(mixes, pred_norm);
                 report.scenes[i] = std::move(m);
               });

  for (const SceneMetrics& m : report.scenes) {
    report.ed += m.ed;
    report.dtw += m.dtw;
    report.smatch += m.smatch;
    report.pds += m.pds;
  }
  if (!report.scenes.empty()) {
    const double inv = 1.0 / static_cast<double>(report.scenes.size());
    report.ed *= inv;
    report.dtw *= inv;
    report.smatch *= inv;
    report.pds *= inv;
  }
  return report;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json scenes = nlohmann::json::array();
  for (const SceneMetrics& m : r.scenes)
    scenes.push_back({{"scene_id", m.scene_id},
                      {"ed", m.ed},
                      {"dtw", m.dtw},
                      {"scanmatch", m.smatch},
                      {"pds", m.pds}});
  return {{"scenes", std::move(scenes)},
          {"aggregate",
           {{"ed", r.ed},
            {"dtw", r.dtw},
            {"scanmatch", r.smatch},
            {"pds", r.pds}}}};
}

}  // namespace eyear
