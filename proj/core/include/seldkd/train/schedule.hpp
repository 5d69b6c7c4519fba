#pragma once

#include <cstdint>

namespace seldkd::train {

// Tri-stage learning rate: linear warm-up to the peak, hold, then
// exponential decay down to peak * final_ratio at the last step.
struct TriStageSchedule {
  double peak_lr = 1e-3;
  double warmup_frac = 0.1;
  double hold_frac = 0.4;
  double final_ratio = 0.01;
  std::int64_t total_steps = 0;

  double lr_at(std::int64_t step) const;
};

}  // namespace seldkd::train
