#include "seldkd/nn/module.hpp"

#include <stdexcept>

namespace seldkd::nn {

Tensor ParamStore::find_param(const std::string& name) const {
  for (const auto& [n, t] : params_)
    if (n == name) return t;
  throw std::runtime_error("ParamStore: no parameter named " + name);
}

std::int64_t ParamStore::total_params() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : params_) {
    t.grad();  // ensure allocated
    t.zero_grad();
  }
}

void ParamStore::set_requires_grad(bool b) {
  for (auto& [name, t] : params_) t.set_requires_grad(b);
}

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng) {
  Tensor w = Tensor::zeros({out, in});
  init_uniform_fan(w, in, rng);
  Tensor b = Tensor::zeros({out});
  init_uniform_fan(b, in, rng);
  weight = store.add_param(name + ".weight", w);
  bias = store.add_param(name + ".bias", b);
}

Conv2d::Conv2d(ParamStore& store, const std::string& name, int in_ch, int out_ch, int kh, int kw,
               Rng& rng)
    : pad_t(kh / 2), pad_f(kw / 2) {
  Tensor w = Tensor::zeros({out_ch, in_ch, kh, kw});
  init_kaiming_normal(w, in_ch * kh * kw, rng);
  weight = store.add_param(name + ".weight", w);
  bias = store.add_param(name + ".bias", Tensor::zeros({out_ch}));
}

BatchNorm2d::BatchNorm2d(ParamStore& store, const std::string& name, int channels)
    : state(std::make_unique<BnState>()) {
  gamma = store.add_param(name + ".gamma", Tensor::full({channels}, 1.0));
  beta = store.add_param(name + ".beta", Tensor::zeros({channels}));
  state->running_mean.assign(channels, 0.0);
  state->running_var.assign(channels, 1.0);
  store.add_buffer(name + ".running_mean", &state->running_mean);
  store.add_buffer(name + ".running_var", &state->running_var);
}

BatchNorm1d::BatchNorm1d(ParamStore& store, const std::string& name, int channels)
    : state(std::make_unique<BnState>()) {
  gamma = store.add_param(name + ".gamma", Tensor::full({channels}, 1.0));
  beta = store.add_param(name + ".beta", Tensor::zeros({channels}));
  state->running_mean.assign(channels, 0.0);
  state->running_var.assign(channels, 1.0);
  store.add_buffer(name + ".running_mean", &state->running_mean);
  store.add_buffer(name + ".running_var", &state->running_var);
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& name, int dim) {
  gamma = store.add_param(name + ".gamma", Tensor::full({dim}, 1.0));
  beta = store.add_param(name + ".beta", Tensor::zeros({dim}));
}

DepthwiseConv1d::DepthwiseConv1d(ParamStore& store, const std::string& name, int channels,
                                 int kernel, Rng& rng) {
  Tensor w = Tensor::zeros({channels, kernel});
  init_uniform_fan(w, kernel, rng);
  weight = store.add_param(name + ".weight", w);
  bias = store.add_param(name + ".bias", Tensor::zeros({channels}));
}

}  // namespace seldkd::nn
