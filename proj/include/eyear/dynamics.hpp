#pragma once

// Audio-aware dynamical system. One step moves the gaze point by
// dt * M(s_prev, s_sal, s_sem) where the motion vector blends three forces:
// inherent motion tendency, salience attraction, and semantic attraction,
// the latter two mixed by alpha = sigmoid(alpha_logit).
//
// Predictions are clamped to the unit square after every step.

#include <cstdint>
#include <string>
#include <vector>

#include "eyear/common.hpp"
#include "eyear/data.hpp"
#include "eyear/encoder.hpp"
#include "eyear/model.hpp"
#include "eyear/tensor.hpp"

namespace eyear {

enum class RolloutMode { Free, TeacherForced };

inline const char* rollout_mode_name(RolloutMode m) {
  return m == RolloutMode::Free ? "free" : "teacher_forced";
}

// M = MLP_A(s_prev) + a * MLP_B(s_sal - s_prev) + (1-a) * MLP_C(s_sem - s_prev)
// Units: normalized image widths per second. The NoSalience variant drops the
// MLP_B term.
inline Tensor motion_vector(const Tensor& s_prev, const Tensor& s_sal,
                            const Tensor& s_sem, const DynamicsParams& dyn,
                            Variant variant = Variant::Full) {
  Tensor alpha = sigmoid(dyn.alpha_logit);
  Tensor m = mlp_forward(dyn.mlp_a, s_prev);
  if (variant != Variant::NoSalience)
    m = add(m, mul(alpha, mlp_forward(dyn.mlp_b, sub(s_sal, s_prev))));
  Tensor attend = sub(Tensor::scalar(1.0), alpha);
  m = add(m, mul(attend, mlp_forward(dyn.mlp_c, sub(s_sem, s_prev))));
  return m;
}

// s_i = s_prev + dt * M, clamped to [0,1]^2.
inline Tensor step_point(const Tensor& s_prev, double dt, const Tensor& m) {
  if (dt < 0.0)
    throw NegativeDt("step requires dt >= 0, got " + std::to_string(dt));
  return clamp(add(s_prev, mul_scalar(m, dt)), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Full-trajectory rollout.

struct Rollout {
  Tensor start;                    // s_0, normalized
  std::vector<Tensor> points;      // n predictions, normalized
  std::vector<Tensor> attraction;  // s_sem per word, normalized

  std::vector<Vec2> as_points() const {
    std::vector<Vec2> out;
    out.reserve(points.size());
    for (const Tensor& t : points) out.push_back(t.as_vec2());
    return out;
  }
};

// Free mode feeds each prediction back as the next previous point;
// teacher-forced mode feeds the supplied ground-truth trajectory instead
// (step 1 starts from s_0 in both modes). The NoDyns variant replaces the
// dynamical system with a per-word feedforward merge
// s_i = a * MLP_B(s_sal) + (1-a) * MLP_C(s_sem_i), which ignores dt and the
// previous point entirely.
inline Rollout rollout(const SceneBundle& scene, const ModelParams& params,
                       RolloutMode mode,
                       const GazeTrajectory* forced = nullptr) {
  if (mode == RolloutMode::TeacherForced) {
    if (!forced)
      throw ValidationError("teacher-forced rollout needs a trajectory");
    if (forced->points.size() != scene.word_count())
      throw LengthMismatch("forcing trajectory length " +
                           std::to_string(forced->points.size()) +
                           " != word count " +
                           std::to_string(scene.word_count()));
  }

  const ModelConfig& cfg = params.config;
  const std::size_t n = scene.word_count();

  Rollout out;
  out.attraction = encode_scene(scene, params).attraction;

  const Vec2 s0 = cfg.start == StartPoint::Salient
                      ? scene.normalize(scene.salient_point)
                      : Vec2{0.5, 0.5};
  out.start = Tensor::vec2(s0);
  out.points.reserve(n);

  Tensor s_sal = Tensor::vec2(scene.normalize(scene.salient_point));
  Tensor alpha = sigmoid(params.dyn.alpha_logit);
  Tensor attend = sub(Tensor::scalar(1.0), alpha);

  double t_prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = scene.words[i].t_end - t_prev;
    t_prev = scene.words[i].t_end;

    Tensor s_hat;
    if (cfg.variant == Variant::NoDyns) {
      Tensor merged = add(mul(alpha, mlp_forward(params.dyn.mlp_b, s_sal)),
                          mul(attend, mlp_forward(params.dyn.mlp_c,
                                                  out.attraction[i])));
      s_hat = clamp(merged, 0.0, 1.0);
    } else {
      Tensor prev;
      if (i == 0) {
        prev = out.start;
      } else if (mode == RolloutMode::Free) {
        prev = out.points[i - 1];
      } else {
        prev = Tensor::vec2(scene.normalize(forced->points[i - 1]));
      }
      Tensor m =
          motion_vector(prev, s_sal, out.attraction[i], params.dyn,
                        cfg.variant);
      s_hat = step_point(prev, dt, m);
    }
    out.points.push_back(s_hat);
  }
  return out;
}

}  // namespace eyear
