#include "seldkd/train/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace seldkd::train {

double TriStageSchedule::lr_at(std::int64_t step) const {
  if (total_steps <= 0) throw std::invalid_argument("TriStageSchedule: total_steps must be positive");
  if (step < 0 || step > total_steps)
    throw std::invalid_argument("TriStageSchedule: step outside [0, total_steps]");
  const auto warm_end = static_cast<std::int64_t>(std::llround(warmup_frac * total_steps));
  const auto hold_end =
      static_cast<std::int64_t>(std::llround((warmup_frac + hold_frac) * total_steps));
  if (step <= warm_end)
    return warm_end == 0 ? peak_lr : peak_lr * static_cast<double>(step) / warm_end;
  if (step <= hold_end) return peak_lr;
  const double frac = static_cast<double>(step - hold_end) / static_cast<double>(total_steps - hold_end);
  return peak_lr * std::exp(std::log(final_ratio) * frac);
}

}  // namespace seldkd::train
