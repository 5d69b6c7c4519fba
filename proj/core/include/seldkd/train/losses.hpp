#pragma once

#include <span>

#include "seldkd/model/backbone.hpp"
#include "seldkd/nn/ops.hpp"

namespace seldkd::train {

struct LossWeights {
  double eta1 = 0.1;    // SED task
  double eta2 = 1.0;    // SSL task
  double gamma1 = 0.5;  // response-based KD
  double gamma2 = 0.5;  // feature-based KD
};

// Targets for a whole batch, [B*L*N] and [B*L*N*3].
struct BatchTargets {
  std::vector<double> activity;
  std::vector<double> location;
};

// -mean[p log p_hat + (1-p) log(1-p_hat)] over all cells.
nn::Tensor sed_bce(const nn::Tensor& pred, std::span<const double> target_activity);

// mean over cells of ||(y - y_hat) p||^2, masked by ground-truth activity.
nn::Tensor ssl_mse(const nn::Tensor& pred, std::span<const double> target_location,
                   std::span<const double> target_activity);

// eta1 * SED + eta2 * SSL.
nn::Tensor task_loss(const model::SeldOutput& out, const BatchTargets& targets,
                     const LossWeights& w);

enum class WarmupMode { kRamp, kDelay };

// FKD weight schedule: linear ramp over the warm-up epochs (or a hard delay).
double gamma2_at(const LossWeights& w, int epoch, int warmup_epochs, WarmupMode mode);

// L = task + gamma1 * rkd + gamma2(epoch) * fkd. Components must be finite.
nn::Tensor total_loss(const nn::Tensor& task, const nn::Tensor& rkd, const nn::Tensor& fkd,
                      const LossWeights& w, int epoch, int warmup_epochs,
                      WarmupMode mode = WarmupMode::kRamp);

}  // namespace seldkd::train
