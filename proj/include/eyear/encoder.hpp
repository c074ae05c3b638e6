#pragma once

// Audio-semantic encoder: projects word embeddings, runs them through a GRU,
// and attends over image patch centers to produce one semantic attraction
// point per word.
//
// The attention is single-head scaled dot-product with learned query/key
// projections; the values are the raw (unprojected) normalized patch center
// coordinates, so the output is a convex combination of centers and stays
// inside the image. An optional residual MLP head on top can be enabled in
// the model config at the cost of that guarantee.

#include <cmath>
#include <cstdint>
#include <vector>

#include "eyear/common.hpp"
#include "eyear/data.hpp"
#include "eyear/model.hpp"
#include "eyear/tensor.hpp"

namespace eyear {

// Key/value table for one word: the N^2 grid patches plus the word's special
// (grounded) patch. Absent grounding contributes a zero embedding row with
// center (0,0).
struct PatchTable {
  Tensor embeddings;  // (N^2+1) x d
  Tensor centers;     // (N^2+1) x 2, normalized coordinates
};

namespace detail {

inline Tensor grid_embeddings(const SceneBundle& scene) {
  const std::size_t n = scene.patches.size();
  const auto d = static_cast<std::size_t>(scene.embed_dim);
  std::vector<double> v;
  v.reserve(n * d);
  for (const ScenePatch& p : scene.patches)
    v.insert(v.end(), p.embedding.begin(), p.embedding.end());
  return Tensor::from({n, d}, std::move(v));
}

inline std::vector<double> grid_centers_normalized(const SceneBundle& scene) {
  std::vector<double> v;
  v.reserve(scene.patches.size() * 2);
  for (const ScenePatch& p : scene.patches) {
    const Vec2 c = scene.normalize(p.center);
    v.push_back(c.x);
    v.push_back(c.y);
  }
  return v;
}

inline void special_row(const SceneBundle& scene, std::size_t word_index,
                        std::vector<double>* emb, Vec2* center) {
  const TimedWord& w = scene.words[word_index];
  if (w.grounded) {
    *emb = w.grounded->embedding;
    *center = scene.normalize(w.grounded->center);
  } else {
    emb->assign(static_cast<std::size_t>(scene.embed_dim), 0.0);
    *center = {0.0, 0.0};
  }
}

}  // namespace detail

inline PatchTable build_patch_table(const SceneBundle& scene,
                                    std::size_t word_index) {
  const auto d = static_cast<std::size_t>(scene.embed_dim);
  std::vector<double> emb = detail::grid_embeddings(scene).values();
  std::vector<double> centers = detail::grid_centers_normalized(scene);

  std::vector<double> spec_emb;
  Vec2 spec_center;
  detail::special_row(scene, word_index, &spec_emb, &spec_center);
  emb.insert(emb.end(), spec_emb.begin(), spec_emb.end());
  centers.push_back(spec_center.x);
  centers.push_back(spec_center.y);

  const std::size_t rows = scene.patches.size() + 1;
  PatchTable t;
  t.embeddings = Tensor::from({rows, d}, std::move(emb));
  t.centers = Tensor::from({rows, 2}, std::move(centers));
  return t;
}

// One GRU cell step; returns the new hidden state, which doubles as the word
// embedding fed to the attention (output = hidden state).
inline Tensor gru_step(const GruParams& g, const Tensor& h_prev,
                       const Tensor& x) {
  Tensor z = sigmoid(add(add(matmul(x, g.wz), matmul(h_prev, g.uz)), g.bz));
  Tensor r = sigmoid(add(add(matmul(x, g.wr), matmul(h_prev, g.ur)), g.br));
  Tensor cand =
      tanh(add(add(matmul(x, g.wh), matmul(mul(r, h_prev), g.uh)), g.bh));
  // h = (1 - z) * h_prev + z * cand
  return add(mul(sub(Tensor::scalar(1.0), z), h_prev), mul(z, cand));
}

// Attention over patch centers: a = softmax(q . K^T / sqrt(k)), point = a . C.
inline Tensor semantic_attraction(const Tensor& e_w, const PatchTable& table,
                                  const EncoderParams& enc,
                                  const std::optional<MlpParams>& head = {}) {
  Tensor q = matmul(e_w, enc.w_q);
  Tensor keys = matmul(table.embeddings, enc.w_k);
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.numel()));
  Tensor logits = mul_scalar(matmul(keys, q), scale);
  Tensor weights = softmax(logits);
  Tensor point = matmul(weights, table.centers);
  if (head) point = add(point, mlp_forward(*head, point));
  return point;
}

// ---------------------------------------------------------------------------
// Whole-scene encoding. Walks the transcript once, causally: hidden state i
// sees words 1..i only. Grid keys are projected once and reused per word.

struct SceneEncoding {
  std::vector<Tensor> hidden;      // per word, {h}
  std::vector<Tensor> attraction;  // per word, {2} normalized
};

inline SceneEncoding encode_scene(const SceneBundle& scene,
                                  const ModelParams& params) {
  const ModelConfig& cfg = params.config;
  const auto d = static_cast<std::size_t>(scene.embed_dim);
  const std::size_t n = scene.word_count();

  Tensor e_grid = detail::grid_embeddings(scene);
  Tensor keys_grid = matmul(e_grid, params.enc.w_k);  // (N^2) x k
  const std::vector<double> grid_centers =
      detail::grid_centers_normalized(scene);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.attn_dim));

  SceneEncoding out;
  out.hidden.reserve(n);
  out.attraction.reserve(n);

  Tensor h = Tensor::zeros({static_cast<std::size_t>(cfg.hidden)});
  for (std::size_t i = 0; i < n; ++i) {
    Tensor emb = Tensor::from({d}, scene.words[i].embedding);
    Tensor x = matmul(emb, params.enc.w_in);
    Tensor e_w;
    if (cfg.variant == Variant::NoGru) {
      e_w = x;  // projected raw embedding straight to attention
    } else {
      h = gru_step(params.enc.gru, h, x);
      e_w = h;
    }
    out.hidden.push_back(e_w);

    std::vector<double> spec_emb;
    Vec2 spec_center;
    detail::special_row(scene, i, &spec_emb, &spec_center);
    Tensor key_spec =
        matmul(Tensor::from({d}, std::move(spec_emb)), params.enc.w_k);
    Tensor keys = concat({keys_grid, reshape(key_spec, {1, key_spec.numel()})});

    std::vector<double> centers = grid_centers;
    centers.push_back(spec_center.x);
    centers.push_back(spec_center.y);
    Tensor c_v = Tensor::from({scene.patches.size() + 1, 2}, std::move(centers));

    Tensor q = matmul(e_w, params.enc.w_q);
    Tensor logits = mul_scalar(matmul(keys, q), scale);
    Tensor point = matmul(softmax(logits), c_v);
    if (params.head) point = add(point, mlp_forward(*params.head, point));
    out.attraction.push_back(point);
  }
  return out;
}

}  // namespace eyear
