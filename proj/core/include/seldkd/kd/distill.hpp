#pragma once

#include <vector>

#include "seldkd/model/backbone.hpp"
#include "seldkd/nn/module.hpp"

namespace seldkd::kd {

struct RkdWeights {
  double beta1 = 0.1;  // SED distillation
  double beta2 = 1.0;  // SSL distillation
};

// Response-based distillation: binary KL on activities plus teacher-gated
// MSE on coordinates. Teacher outputs must be detached (no-grad pass).
nn::Tensor rkd_loss(const model::SeldOutput& teacher, const model::SeldOutput& student,
                    const RkdWeights& w);

// Spatial-pyramid pooling levels of the hierarchical context loss. Grid 0
// stands for the full-resolution map; weights are normalized by their sum.
struct SppConfig {
  std::vector<int> grids{0, 4, 2, 1};
  std::vector<double> weights{1.0, 0.5, 0.25, 0.125};
};

// Top-down attention fusion of the student pyramid toward teacher stages.
// The top stage has no attention conv (no residual input to weigh).
class AbfFusion {
 public:
  AbfFusion(const std::vector<int>& stage_channels, std::uint64_t seed);

  // student_stages[j] = F^s_{j+1}, j = 0..3. Returns fused maps aligned with
  // teacher stages, plus the residual maps.
  std::pair<std::vector<nn::Tensor>, std::vector<nn::Tensor>> fuse(
      const std::vector<nn::Tensor>& student_stages);

  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

 private:
  struct Stage {
    nn::Conv2d transform;  // 1x1, student -> common channels
    nn::Conv2d attention;  // 1x1 on concat, 2 output channels
    nn::Conv2d output;     // 3x3, residual -> fused map
    bool has_attention = false;
  };
  std::vector<Stage> stages_;
  nn::ParamStore store_;
};

// Sum over stages of SPP-pooled MSE terms (top stage excluded) plus the
// full-resolution MSE over all stages.
nn::Tensor hcl_loss(const std::vector<nn::Tensor>& teacher_stages,
                    const std::vector<nn::Tensor>& fused_stages, const SppConfig& spp);

struct DistillOutputs {
  nn::Tensor rkd;
  nn::Tensor fkd;
  model::ForwardResult teacher;
  model::ForwardResult student;
};

// One paired forward: frozen eval-mode teacher on the audio features and the
// student on the fused features, both under the identical mix plan.
DistillOutputs distill_step(model::Backbone& teacher, model::Backbone& student, AbfFusion* fusion,
                            const nn::Tensor& teacher_input, const nn::Tensor& student_input,
                            const mix::MixPlan* plan, const RkdWeights& weights,
                            const SppConfig& spp, bool student_training, Rng* dropout_rng);

}  // namespace seldkd::kd
