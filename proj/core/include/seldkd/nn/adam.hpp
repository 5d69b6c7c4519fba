#pragma once

#include <cstdint>
#include <vector>

#include "seldkd/nn/module.hpp"

namespace seldkd::nn {

// Adam with externally supplied learning rate (the schedule owns it).
class Adam {
 public:
  explicit Adam(ParamStore& store, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(double lr);
  std::int64_t step_count() const { return step_count_; }

  // Checkpoint access: moments per parameter, in registry order.
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  void set_step_count(std::int64_t n) { step_count_ = n; }

 private:
  ParamStore* store_;
  double beta1_, beta2_, eps_;
  std::int64_t step_count_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace seldkd::nn
