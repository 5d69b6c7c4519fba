#include "seldkd/train/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace seldkd::train {

nn::Tensor sed_bce(const nn::Tensor& pred, std::span<const double> target_activity) {
  return nn::bce_mean(pred, target_activity);
}

nn::Tensor ssl_mse(const nn::Tensor& pred, std::span<const double> target_location,
                   std::span<const double> target_activity) {
  return nn::masked_sq_mean(pred, target_location, target_activity);
}

nn::Tensor task_loss(const model::SeldOutput& out, const BatchTargets& targets,
                     const LossWeights& w) {
  nn::Tensor sed = sed_bce(out.p, targets.activity);
  nn::Tensor ssl = ssl_mse(out.y, targets.location, targets.activity);
  return nn::add_scaled(sed, ssl, w.eta1, w.eta2);
}

double gamma2_at(const LossWeights& w, int epoch, int warmup_epochs, WarmupMode mode) {
  if (warmup_epochs <= 0) return w.gamma2;
  if (mode == WarmupMode::kDelay) return epoch < warmup_epochs ? 0.0 : w.gamma2;
  const double ramp = std::min(1.0, static_cast<double>(epoch) / warmup_epochs);
  return w.gamma2 * ramp;
}

nn::Tensor total_loss(const nn::Tensor& task, const nn::Tensor& rkd, const nn::Tensor& fkd,
                      const LossWeights& w, int epoch, int warmup_epochs, WarmupMode mode) {
  if (!std::isfinite(task.item()) || !std::isfinite(rkd.item()) || !std::isfinite(fkd.item()))
    throw std::runtime_error("total_loss: non-finite component");
  nn::Tensor kd = nn::add_scaled(rkd, fkd, w.gamma1, gamma2_at(w, epoch, warmup_epochs, mode));
  return nn::add(task, kd);
}

}  // namespace seldkd::train
