#pragma once

// Command-line front end: gen / train / eval / rollout / analyze / ablate.
// Exit codes: 0 success, 1 usage, 2 validation or parse failure, 3 runtime.
//
// Option precedence: built-in defaults, then a --config JSON file (sections
// "synth", "model", "train"), then explicit flags.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "eyear/cli_commands.hpp"

namespace eyear::cli {

namespace detail {

inline nlohmann::json load_config_file(int argc, const char* const* argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      std::ifstream in(argv[i + 1]);
      if (!in)
        throw ParseError(std::string("cannot open config file ") +
                         argv[i + 1]);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("config file: ") + e.what());
      }
      return j;
    }
  }
  return nlohmann::json::object();
}

inline SynthConfig synth_from_config(const nlohmann::json& cfg) {
  SynthConfig c;
  if (!cfg.contains("synth")) return c;
  const auto& j = cfg.at("synth");
  c.n_scenes = j.value("n_scenes", c.n_scenes);
  c.words_per_scene = j.value("words_per_scene", c.words_per_scene);
  c.subjects = j.value("subjects", c.subjects);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.grid_n = j.value("grid_n", c.grid_n);
  c.image_size = j.value("image_size", c.image_size);
  c.kappa = j.value("kappa", c.kappa);
  c.emb_noise = j.value("emb_noise", c.emb_noise);
  c.sigma_subject = j.value("sigma_subject", c.sigma_subject);
  c.drift_rate = j.value("drift_rate", c.drift_rate);
  c.p_ungroundable = j.value("p_ungroundable", c.p_ungroundable);
  c.p_grounded = j.value("p_grounded", c.p_grounded);
  c.p_ambiguous = j.value("p_ambiguous", c.p_ambiguous);
  c.duration_min = j.value("duration_min", c.duration_min);
  c.duration_max = j.value("duration_max", c.duration_max);
  c.seed = j.value("seed", c.seed);
  return c;
}

inline ModelConfig model_from_config(const nlohmann::json& cfg) {
  if (!cfg.contains("model")) return ModelConfig{};
  return model_config_from_json(cfg.at("model"));
}

inline TrainConfig train_from_config(const nlohmann::json& cfg) {
  if (!cfg.contains("train")) return TrainConfig{};
  return train_config_from_json(cfg.at("train"));
}

}  // namespace detail

inline int run(int argc, const char* const* argv) {
  nlohmann::json file_config;
  try {
    file_config = detail::load_config_file(argc, argv);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"gaze trajectory prediction with an audio-aware dynamical "
               "system"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON config file overriding defaults");

  // ---- gen
  GenArgs gen;
  gen.synth = detail::synth_from_config(file_config);
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
  gen_cmd->add_option("--scenes", gen.synth.n_scenes, "number of scenes");
  gen_cmd->add_option("--words", gen.synth.words_per_scene, "words per scene");
  gen_cmd->add_option("--subjects", gen.synth.subjects, "subjects per scene");
  gen_cmd->add_option("--embed-dim", gen.synth.embed_dim, "embedding size");
  gen_cmd->add_option("--grid-n", gen.synth.grid_n, "patch grid side");
  gen_cmd->add_option("--sigma-subject", gen.synth.sigma_subject,
                      "per-step gaze noise (normalized units)");
  gen_cmd->add_option("--drift-rate", gen.synth.drift_rate,
                      "per-word drift toward the target, (0,1]");
  gen_cmd->add_option("--kappa", gen.synth.kappa,
                      "word-target association strength");
  gen_cmd->add_option("--p-ambiguous", gen.synth.p_ambiguous,
                      "two-target word rate among groundable words");
  gen_cmd->add_option("--p-ungroundable", gen.synth.p_ungroundable,
                      "ungroundable word rate");
  gen_cmd->add_option("--p-grounded", gen.synth.p_grounded,
                      "grounding rate among groundable words");
  gen_cmd->add_option("--seed", gen.synth.seed, "generator seed");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();

  // ---- train
  TrainArgs train;
  train.model = detail::model_from_config(file_config);
  train.train = detail::train_from_config(file_config);
  std::string train_stage = train.train.mse_only ? "mse-only" : "two-stage";
  std::string train_variant = variant_name(train.model.variant);
  auto* train_cmd = app.add_subcommand("train", "two-stage training");
  train_cmd->add_option("--data", train.data, "dataset manifest")->required();
  train_cmd->add_option("--out", train.out, "output directory")->required();
  train_cmd->add_option("--seed", train.train.seed, "training seed");
  train_cmd->add_option("--lr", train.train.lr, "learning rate");
  train_cmd->add_option("--weight-decay", train.train.weight_decay,
                        "decoupled weight decay");
  train_cmd->add_option("--epochs-stage1", train.train.epochs_max_stage1,
                        "stage-1 epoch cap");
  train_cmd->add_option("--epochs-stage2", train.train.epochs_max_stage2,
                        "stage-2 epoch cap");
  train_cmd->add_option("--batch", train.train.batch_samples,
                        "gradient accumulation width");
  train_cmd->add_option("--patience", train.train.plateau_patience,
                        "plateau patience (epochs)");
  train_cmd->add_option("--min-delta", train.train.plateau_min_delta,
                        "relative improvement threshold");
  train_cmd->add_option("--kde-grid-res", train.train.kde_grid_res,
                        "KDE max-search grid resolution");
  train_cmd->add_option("--bandwidth-floor", train.train.bandwidth_floor,
                        "KDE bandwidth floor (normalized units)");
  train_cmd->add_option("--threads", train.train.threads,
                        "worker threads (0 = EYEAR_THREADS/hardware)");
  train_cmd
      ->add_option("--stage", train_stage,
                   "two-stage or mse-only (skips the PD-loss stage)")
      ->check(CLI::IsMember({"two-stage", "mse-only"}));
  train_cmd
      ->add_option("--variant", train_variant,
                   "model variant: full, no-salience, no-dyns, no-gru")
      ->check(CLI::IsMember({"full", "no-salience", "no-dyns", "no-gru"}));
  train_cmd->add_option("--hidden", train.model.hidden, "GRU state size");
  train_cmd->add_option("--attn-dim", train.model.attn_dim,
                        "attention projection size");
  train_cmd->add_option("--mlp-hidden", train.model.mlp_hidden,
                        "force MLP hidden width");
  train_cmd->add_flag("--residual-head", train.model.residual_head,
                      "residual MLP head on the attention point");
  train_cmd->add_option("--resume", train.resume,
                        "checkpoint to continue from");

  // ---- eval
  EvalArgs eval;
  eval.kde_grid_res = train.train.kde_grid_res;
  eval.bandwidth_floor = train.train.bandwidth_floor;
  auto* eval_cmd = app.add_subcommand("eval", "metrics on a dataset split");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint file")
      ->required();
  eval_cmd->add_option("--data", eval.data, "dataset manifest")->required();
  eval_cmd->add_option("--split", eval.split, "train, val, or test")
      ->check(CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_option("--out", eval.out, "output directory")->required();
  eval_cmd->add_option("--kde-grid-res", eval.kde_grid_res,
                       "KDE max-search grid resolution");
  eval_cmd->add_option("--bandwidth-floor", eval.bandwidth_floor,
                       "KDE bandwidth floor");
  eval_cmd->add_option("--threads", eval.threads, "worker threads");

  // ---- rollout
  RolloutArgs roll;
  auto* roll_cmd = app.add_subcommand("rollout", "export one trajectory");
  roll_cmd->add_option("--checkpoint", roll.checkpoint, "checkpoint file")
      ->required();
  roll_cmd->add_option("--data", roll.data, "dataset manifest")->required();
  roll_cmd->add_option("--scene", roll.scene_id, "scene id")->required();
  roll_cmd->add_option("--mode", roll.mode, "free or teacher")
      ->check(CLI::IsMember({"free", "teacher"}));
  roll_cmd->add_option("--subject", roll.subject,
                       "subject id for teacher forcing");
  roll_cmd->add_option("--out", roll.out, "output directory")->required();

  // ---- analyze
  AnalyzeArgs analyze;
  auto* an_cmd = app.add_subcommand("analyze", "saccade-vector statistics");
  an_cmd->add_option("--traj", analyze.trajectory_files,
                     "rollout JSON files")
      ->required()
      ->expected(-1);
  an_cmd->add_option("--angle-bins", analyze.angle_bins, "angle bin count");
  an_cmd->add_option("--length-edges", analyze.length_edges,
                     "ascending length bin edges in pixels");
  an_cmd->add_option("--out", analyze.out, "output directory")->required();

  // ---- ablate
  AblateArgs ablate;
  ablate.model = detail::model_from_config(file_config);
  ablate.train = detail::train_from_config(file_config);
  std::string variants_csv = "full,no-salience,no-dyns,no-gru,no-pdloss";
  auto* ab_cmd = app.add_subcommand("ablate", "train and score variants");
  ab_cmd->add_option("--data", ablate.data, "dataset manifest")->required();
  ab_cmd->add_option("--out", ablate.out, "output directory")->required();
  ab_cmd->add_option("--variants", variants_csv, "comma-separated variants");
  ab_cmd->add_option("--seed", ablate.train.seed, "training seed");
  ab_cmd->add_option("--lr", ablate.train.lr, "learning rate");
  ab_cmd->add_option("--epochs-stage1", ablate.train.epochs_max_stage1,
                     "stage-1 epoch cap");
  ab_cmd->add_option("--epochs-stage2", ablate.train.epochs_max_stage2,
                     "stage-2 epoch cap");
  ab_cmd->add_option("--batch", ablate.train.batch_samples,
                     "gradient accumulation width");
  ab_cmd->add_option("--patience", ablate.train.plateau_patience,
                     "plateau patience");
  ab_cmd->add_option("--kde-grid-res", ablate.train.kde_grid_res,
                     "KDE max-search grid resolution");
  ab_cmd->add_option("--threads", ablate.train.threads, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen);
    if (train_cmd->parsed()) {
      train.train.mse_only = train_stage == "mse-only";
      train.model.variant = variant_from_name(train_variant);
      return cmd_train(train);
    }
    if (eval_cmd->parsed()) return cmd_eval(eval);
    if (roll_cmd->parsed()) {
      if (roll.mode == "teacher" && roll.subject < 0) {
        std::cerr << "error: --mode teacher requires --subject\n";
        return 1;
      }
      return cmd_rollout(roll);
    }
    if (an_cmd->parsed()) return cmd_analyze(analyze);
    if (ab_cmd->parsed()) {
      ablate.variants.clear();
      std::stringstream ss(variants_csv);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) ablate.variants.push_back(item);
      return cmd_ablate(ablate);
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const TooFewScenes& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}

}  // namespace eyear::cli
