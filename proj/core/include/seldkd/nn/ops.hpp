#pragma once

#include <span>
#include <vector>

#include "seldkd/nn/tensor.hpp"
#include "seldkd/util/rng.hpp"

namespace seldkd::nn {

// Elementwise / arithmetic --------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// ca*a + cb*b, same shapes. Point-level feature mixing and residual sums.
Tensor add_scaled(const Tensor& a, const Tensor& b, double ca, double cb);
Tensor scale(const Tensor& a, double c);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor swish(const Tensor& x);
// Gated linear unit over the last dimension: [..., 2D] -> [..., D].
Tensor glu_lastdim(const Tensor& x);
Tensor softmax_lastdim(const Tensor& x);
// Softmax across a 2-channel axis of a [B,2,T,F] map.
Tensor softmax_channel2(const Tensor& x);

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training);

// Linear algebra ------------------------------------------------------------

// x: [..., D], w: [E, D], b: [E] (optional, pass undefined Tensor to skip).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
// Batched matmul with identical leading dims; transb treats b slices as [n,k].
Tensor bmm(const Tensor& a, const Tensor& b, bool transb = false);
// [B,T,D] -> [B,H,T,D/H] and back.
Tensor split_heads(const Tensor& x, int heads);
Tensor merge_heads(const Tensor& x);

// Convolution / pooling on [B,C,T,F] maps ------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad_t, int pad_f);
// Depthwise conv along time of a [B,T,D] sequence, 'same' padding, odd kernel.
Tensor depthwise_conv_time(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor maxpool_freq(const Tensor& x, int kf);
// Non-overlapping mean pooling along time of [B,T,D].
Tensor avgpool_time(const Tensor& x, int k);
Tensor adaptive_avgpool2d(const Tensor& x, int out_t, int out_f);
Tensor upsample_freq_nearest(const Tensor& x, int out_f);
Tensor concat_channels(const Tensor& a, const Tensor& b);
// x[:, c0:c1, :, :] of a [B,C,T,F] map.
Tensor slice_channels(const Tensor& x, int c0, int c1);
// [B,C,T,F] -> [B,T,C*F] per-frame flatten of channel x frequency.
Tensor flatten_to_seq(const Tensor& x);
// w: [B,1,T,F] broadcast over the channel axis of x: [B,C,T,F].
Tensor mul_bcast_channel(const Tensor& x, const Tensor& w);

// Normalization --------------------------------------------------------------

struct BnState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
};

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, BnState& state,
                   bool training, double momentum = 0.1, double eps = 1e-5);
// BatchNorm over the last dim of [B,T,D] (stats across B*T).
Tensor batchnorm_lastdim(const Tensor& x, const Tensor& gamma, const Tensor& beta, BnState& state,
                         bool training, double momentum = 0.1, double eps = 1e-5);
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Batch manipulation / mixing -------------------------------------------------

Tensor permute_batch(const Tensor& x, const std::vector<int>& perm);
// Binary (channel,freq) mask broadcast over batch and time of [B,C,T,F]:
// keep a where mask=1, take b where mask=0.
Tensor mix_mask_cf(const Tensor& a, const Tensor& b, const std::vector<std::uint8_t>& mask_cf);

// Reductions / losses ----------------------------------------------------------

Tensor mean_all(const Tensor& x);
Tensor mse_mean(const Tensor& a, const Tensor& b);
// -mean[t log p + (1-t) log(1-p)], p clamped to [1e-7, 1-1e-7].
Tensor bce_mean(const Tensor& p, std::span<const double> targets);
// mean[t log(t/p) + (1-t) log((1-t)/(1-p))] with both clamped; t constant.
Tensor binary_kl_mean(std::span<const double> t, const Tensor& p);
// mean over B*L*N of || (y - ref) * act ||^2, y laid out [B,L,3N].
Tensor masked_sq_mean(const Tensor& y, std::span<const double> ref, std::span<const double> act);

// Parameter initialization -----------------------------------------------------

void init_kaiming_normal(Tensor& w, int fan_in, Rng& rng);
void init_uniform_fan(Tensor& w, int fan_in, Rng& rng);

}  // namespace seldkd::nn
