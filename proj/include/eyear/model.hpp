#pragma once

// Learnable parameters and their initialization/serialization. The model has
// an encoder half (input projection, GRU, attention projections) and a
// dynamics half (three force MLPs and the salience/semantics mixing weight).

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "eyear/common.hpp"
#include "eyear/tensor.hpp"

namespace eyear {

// Ablation variants. NoPdLoss is a training-schedule choice, not a model
// structure, so it lives in TrainConfig instead.
enum class Variant { Full, NoSalience, NoDyns, NoGru };

enum class StartPoint { Salient, Center };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NoSalience: return "no-salience";
    case Variant::NoDyns: return "no-dyns";
    default: return "no-gru";
  }
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "full") return Variant::Full;
  if (s == "no-salience") return Variant::NoSalience;
  if (s == "no-dyns") return Variant::NoDyns;
  if (s == "no-gru") return Variant::NoGru;
  throw ValidationError("unknown variant: " + s);
}

struct ModelConfig {
  int embed_dim = 64;   // d; must match the bundles
  int hidden = 64;      // h; GRU state size
  int attn_dim = 32;    // k; attention projection size
  int mlp_hidden = 32;  // m; force MLP hidden width
  Variant variant = Variant::Full;
  bool residual_head = false;         // extra MLP on top of the attention point
  StartPoint start = StartPoint::Salient;

  bool operator==(const ModelConfig&) const = default;
};

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"embed_dim", c.embed_dim},
          {"hidden", c.hidden},
          {"attn_dim", c.attn_dim},
          {"mlp_hidden", c.mlp_hidden},
          {"variant", variant_name(c.variant)},
          {"residual_head", c.residual_head},
          {"start", c.start == StartPoint::Salient ? "salient" : "center"}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.attn_dim = j.value("attn_dim", c.attn_dim);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
  if (j.contains("variant"))
    c.variant = variant_from_name(j.at("variant").get<std::string>());
  c.residual_head = j.value("residual_head", c.residual_head);
  if (j.contains("start")) {
    const std::string s = j.at("start").get<std::string>();
    if (s == "salient") c.start = StartPoint::Salient;
    else if (s == "center") c.start = StartPoint::Center;
    else throw ValidationError("unknown start point: " + s);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Parameter groups. Weight matrices are stored input-dim x output-dim so a
// row vector maps through matmul(x, W).

struct MlpParams {
  Tensor w1, b1, w2, b2;
};

struct GruParams {
  Tensor wz, uz, bz;  // update gate
  Tensor wr, ur, br;  // reset gate
  Tensor wh, uh, bh;  // candidate
};

struct EncoderParams {
  Tensor w_in;        // d -> h word projection
  GruParams gru;      // h -> h
  Tensor w_q;         // h -> k query projection
  Tensor w_k;         // d -> k key projection
};

struct DynamicsParams {
  MlpParams mlp_a;     // inherent motion tendency, input s_prev
  MlpParams mlp_b;     // salience force, input s_sal - s_prev
  MlpParams mlp_c;     // semantic force, input s_sem - s_prev
  Tensor alpha_logit;  // alpha = sigmoid(alpha_logit) in (0,1)
};

struct ModelParams {
  ModelConfig config;
  EncoderParams enc;
  DynamicsParams dyn;
  std::optional<MlpParams> head;  // present iff config.residual_head

  double alpha() const {
    const double l = dyn.alpha_logit.value();
    return detail::stable_sigmoid(l);
  }

  std::vector<std::pair<std::string, Tensor>> named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    auto mlp = [&](const std::string& prefix, const MlpParams& m) {
      out.emplace_back(prefix + ".w1", m.w1);
      out.emplace_back(prefix + ".b1", m.b1);
      out.emplace_back(prefix + ".w2", m.w2);
      out.emplace_back(prefix + ".b2", m.b2);
    };
    out.emplace_back("enc.w_in", enc.w_in);
    out.emplace_back("enc.gru.wz", enc.gru.wz);
    out.emplace_back("enc.gru.uz", enc.gru.uz);
    out.emplace_back("enc.gru.bz", enc.gru.bz);
    out.emplace_back("enc.gru.wr", enc.gru.wr);
    out.emplace_back("enc.gru.ur", enc.gru.ur);
    out.emplace_back("enc.gru.br", enc.gru.br);
    out.emplace_back("enc.gru.wh", enc.gru.wh);
    out.emplace_back("enc.gru.uh", enc.gru.uh);
    out.emplace_back("enc.gru.bh", enc.gru.bh);
    out.emplace_back("enc.w_q", enc.w_q);
    out.emplace_back("enc.w_k", enc.w_k);
    mlp("dyn.mlp_a", dyn.mlp_a);
    mlp("dyn.mlp_b", dyn.mlp_b);
    mlp("dyn.mlp_c", dyn.mlp_c);
    out.emplace_back("dyn.alpha_logit", dyn.alpha_logit);
    if (head) mlp("head", *head);
    return out;
  }

  void zero_grad() {
    for (auto& [name, t] : named()) t.zero_grad();
  }

  // Deep copy with fresh leaves; used for per-thread gradient workers.
  ModelParams clone() const {
    ModelParams c;
    c.config = config;
    auto cm = [](const MlpParams& m) {
      return MlpParams{m.w1.clone_leaf(), m.b1.clone_leaf(),
                       m.w2.clone_leaf(), m.b2.clone_leaf()};
    };
    c.enc.w_in = enc.w_in.clone_leaf();
    c.enc.gru = {enc.gru.wz.clone_leaf(), enc.gru.uz.clone_leaf(),
                 enc.gru.bz.clone_leaf(), enc.gru.wr.clone_leaf(),
                 enc.gru.ur.clone_leaf(), enc.gru.br.clone_leaf(),
                 enc.gru.wh.clone_leaf(), enc.gru.uh.clone_leaf(),
                 enc.gru.bh.clone_leaf()};
    c.enc.w_q = enc.w_q.clone_leaf();
    c.enc.w_k = enc.w_k.clone_leaf();
    c.dyn.mlp_a = cm(dyn.mlp_a);
    c.dyn.mlp_b = cm(dyn.mlp_b);
    c.dyn.mlp_c = cm(dyn.mlp_c);
    c.dyn.alpha_logit = dyn.alpha_logit.clone_leaf();
    if (head) c.head = cm(*head);
    return c;
  }
};

// ---------------------------------------------------------------------------
// Initialization: Glorot-uniform weights, zero biases, alpha logit 0.

namespace detail {

inline Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(fan_in * fan_out);
  for (double& x : v) x = rng.uniform(-limit, limit);
  return Tensor::from({fan_in, fan_out}, std::move(v), true);
}

inline MlpParams init_mlp(std::size_t in, std::size_t hidden, std::size_t out,
                          Rng& rng) {
  MlpParams m;
  m.w1 = glorot(in, hidden, rng);
  m.b1 = Tensor::zeros({hidden}, true);
  m.w2 = glorot(hidden, out, rng);
  m.b2 = Tensor::zeros({out}, true);
  return m;
}

}  // namespace detail

inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, "model-init");
  const auto d = static_cast<std::size_t>(cfg.embed_dim);
  const auto h = static_cast<std::size_t>(cfg.hidden);
  const auto k = static_cast<std::size_t>(cfg.attn_dim);
  const auto m = static_cast<std::size_t>(cfg.mlp_hidden);

  ModelParams p;
  p.config = cfg;
  p.enc.w_in = detail::glorot(d, h, rng);
  p.enc.gru.wz = detail::glorot(h, h, rng);
  p.enc.gru.uz = detail::glorot(h, h, rng);
  p.enc.gru.bz = Tensor::zeros({h}, true);
  p.enc.gru.wr = detail::glorot(h, h, rng);
  p.enc.gru.ur = detail::glorot(h, h, rng);
  p.enc.gru.br = Tensor::zeros({h}, true);
  p.enc.gru.wh = detail::glorot(h, h, rng);
  p.enc.gru.uh = detail::glorot(h, h, rng);
  p.enc.gru.bh = Tensor::zeros({h}, true);
  p.enc.w_q = detail::glorot(h, k, rng);
  p.enc.w_k = detail::glorot(d, k, rng);
  p.dyn.mlp_a = detail::init_mlp(2, m, 2, rng);
  p.dyn.mlp_b = detail::init_mlp(2, m, 2, rng);
  p.dyn.mlp_c = detail::init_mlp(2, m, 2, rng);
  p.dyn.alpha_logit = Tensor::scalar(0.0, true);
  if (cfg.residual_head) p.head = detail::init_mlp(2, m, 2, rng);
  return p;
}

// ---------------------------------------------------------------------------
// Parameter (de)serialization

inline nlohmann::json params_to_json(const ModelParams& p) {
  nlohmann::json j;
  j["config"] = model_config_to_json(p.config);
  nlohmann::json tensors;
  for (const auto& [name, t] : p.named()) {
    tensors[name] = {{"shape", t.shape()}, {"data", t.values()}};
  }
  j["tensors"] = std::move(tensors);
  return j;
}

inline ModelParams params_from_json(const nlohmann::json& j) {
  ModelParams p = init_params(model_config_from_json(j.at("config")), 0);
  const auto& tensors = j.at("tensors");
  for (auto& [name, t] : p.named()) {
    if (!tensors.contains(name))
      throw ParseError("checkpoint missing tensor " + name);
    const auto& tj = tensors.at(name);
    const Shape shape = tj.at("shape").get<Shape>();
    if (shape != t.shape())
      throw ParseError("checkpoint tensor " + name + " has shape " +
                       shape_str(shape) + ", expected " +
                       shape_str(t.shape()));
    t.values() = tj.at("data").get<std::vector<double>>();
  }
  return p;
}

// Shared forward helper: two-layer tanh MLP.
inline Tensor mlp_forward(const MlpParams& p, const Tensor& x) {
  Tensor hidden = tanh(add(matmul(x, p.w1), p.b1));
  return add(matmul(hidden, p.w2), p.b2);
}

}  // namespace eyear
