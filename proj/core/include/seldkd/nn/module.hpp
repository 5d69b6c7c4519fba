#pragma once

#include <string>
#include <vector>

#include "seldkd/nn/ops.hpp"
#include "seldkd/nn/tensor.hpp"
#include "seldkd/util/rng.hpp"

namespace seldkd::nn {

// Flat registry of named parameters and buffers. Layers register themselves
// at construction; the optimizer and checkpoint code walk the registry.
class ParamStore {
 public:
  Tensor add_param(const std::string& name, Tensor t) {
    t.set_requires_grad(true);
    params_.emplace_back(name, t);
    return t;
  }
  void add_buffer(const std::string& name, std::vector<double>* buf) {
    buffers_.emplace_back(name, buf);
  }

  std::vector<std::pair<std::string, Tensor>>& params() { return params_; }
  const std::vector<std::pair<std::string, Tensor>>& params() const { return params_; }
  std::vector<std::pair<std::string, std::vector<double>*>>& buffers() { return buffers_; }
  const std::vector<std::pair<std::string, std::vector<double>*>>& buffers() const {
    return buffers_;
  }

  Tensor find_param(const std::string& name) const;
  std::int64_t total_params() const;
  void zero_grad();
  void set_requires_grad(bool b);

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<std::pair<std::string, std::vector<double>*>> buffers_;
};

struct Linear {
  Tensor weight, bias;
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng);
  Tensor forward(const Tensor& x) const { return linear(x, weight, bias); }
};

struct Conv2d {
  Tensor weight, bias;
  int pad_t = 0, pad_f = 0;
  Conv2d() = default;
  Conv2d(ParamStore& store, const std::string& name, int in_ch, int out_ch, int kh, int kw,
         Rng& rng);
  Tensor forward(const Tensor& x) const { return conv2d(x, weight, bias, pad_t, pad_f); }
};

struct BatchNorm2d {
  Tensor gamma, beta;
  std::unique_ptr<BnState> state;
  BatchNorm2d() = default;
  BatchNorm2d(ParamStore& store, const std::string& name, int channels);
  Tensor forward(const Tensor& x, bool training) const {
    return batchnorm2d(x, gamma, beta, *state, training);
  }
};

struct BatchNorm1d {
  Tensor gamma, beta;
  std::unique_ptr<BnState> state;
  BatchNorm1d() = default;
  BatchNorm1d(ParamStore& store, const std::string& name, int channels);
  Tensor forward(const Tensor& x, bool training) const {
    return batchnorm_lastdim(x, gamma, beta, *state, training);
  }
};

struct LayerNorm {
  Tensor gamma, beta;
  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& name, int dim);
  Tensor forward(const Tensor& x) const { return layernorm(x, gamma, beta); }
};

struct DepthwiseConv1d {
  Tensor weight, bias;
  DepthwiseConv1d() = default;
  DepthwiseConv1d(ParamStore& store, const std::string& name, int channels, int kernel, Rng& rng);
  Tensor forward(const Tensor& x) const { return depthwise_conv_time(x, weight, bias); }
};

}  // namespace seldkd::nn
