#include "seldkd/nn/adam.hpp"

#include <cmath>

namespace seldkd::nn {

Adam::Adam(ParamStore& store, double beta1, double beta2, double eps)
    : store_(&store), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(store.params().size());
  v_.reserve(store.params().size());
  for (auto& [name, t] : store.params()) {
    m_.emplace_back(t.numel(), 0.0);
    v_.emplace_back(t.numel(), 0.0);
  }
}

void Adam::step(double lr) {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  auto& params = store_->params();
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = params[p].second;
    const double* g = t.grad();
    double* value = t.data();
    double* m = m_[p].data();
    double* v = v_[p].data();
    const std::int64_t n = t.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace seldkd::nn
