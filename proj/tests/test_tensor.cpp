#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "seldkd/nn/adam.hpp"
#include "seldkd/nn/module.hpp"
#include "seldkd/nn/ops.hpp"
#include "seldkd/nn/tensor.hpp"
#include "seldkd/util/rng.hpp"

using namespace seldkd;
using namespace seldkd::nn;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, bool requires_grad = true) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (auto& v : t.values()) v = rng.normal(0.0, 1.0);
  return t;
}

// Central finite differences on every element of every input tensor.
void check_gradients(const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                     std::vector<Tensor> inputs, double tol = 1e-6, double h = 1e-6) {
  for (auto& x : inputs) {
    x.grad();
    x.zero_grad();
  }
  Tensor out = fn(inputs);
  ASSERT_EQ(out.numel(), 1);
  out.backward();
  for (auto& x : inputs) {
    if (!x.requires_grad()) continue;
    for (std::int64_t i = 0; i < x.numel(); ++i) {
      const double saved = x.data()[i];
      x.data()[i] = saved + h;
      const double up = fn(inputs).item();
      x.data()[i] = saved - h;
      const double down = fn(inputs).item();
      x.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = x.grad_values()[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1.0});
      ASSERT_NEAR(analytic, numeric, tol * denom)
          << "element " << i << " numeric=" << numeric << " analytic=" << analytic;
    }
  }
}

}  // namespace

TEST(TensorOps, AddScaledGradient) {
  Rng rng(1);
  auto a = random_tensor({2, 3}, rng);
  auto b = random_tensor({2, 3}, rng);
  check_gradients([](const std::vector<Tensor>& in) { return mean_all(add_scaled(in[0], in[1], 0.7, 0.3)); },
                  {a, b});
}

TEST(TensorOps, MulReluSigmoidSwishGradient) {
  Rng rng(2);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({3, 4}, rng);
  check_gradients(
      [](const std::vector<Tensor>& in) {
        return mean_all(mul(swish(in[0]), sigmoid(relu(in[1]))));
      },
      {a, b});
}

TEST(TensorOps, LinearGradient) {
  Rng rng(3);
  auto x = random_tensor({2, 5, 4}, rng);
  auto w = random_tensor({3, 4}, rng);
  auto b = random_tensor({3}, rng);
  check_gradients(
      [](const std::vector<Tensor>& in) { return mean_all(swish(linear(in[0], in[1], in[2]))); },
      {x, w, b});
}

TEST(TensorOps, BmmGradient) {
  Rng rng(4);
  auto a = random_tensor({2, 2, 3, 4}, rng);
  auto b = random_tensor({2, 2, 4, 5}, rng);
  check_gradients([](const std::vector<Tensor>& in) { return mean_all(bmm(in[0], in[1])); }, {a, b});
  auto bt = random_tensor({2, 2, 5, 4}, rng);
  check_gradients([](const std::vector<Tensor>& in) { return mean_all(bmm(in[0], in[1], true)); },
                  {a, bt});
}

TEST(TensorOps, SoftmaxRowsSumToOne) {
  Rng rng(5);
  auto x = random_tensor({4, 7}, rng);
  Tensor y = softmax_lastdim(x);
  for (int r = 0; r < 4; ++r) {
    double sum = 0.0;
    for (int i = 0; i < 7; ++i) sum += y.data()[r * 7 + i];
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  check_gradients(
      [](const std::vector<Tensor>& in) { return mean_all(mul(softmax_lastdim(in[0]), in[1])); },
      {x, random_tensor({4, 7}, rng)});
}

TEST(TensorOps, AttentionPatternGradient) {
  Rng rng(6);
  auto x = random_tensor({2, 6, 8}, rng);
  auto wq = random_tensor({8, 8}, rng);
  auto wk = random_tensor({8, 8}, rng);
  auto wv = random_tensor({8, 8}, rng);
  check_gradients(
      [](const std::vector<Tensor>& in) {
        Tensor q = split_heads(linear(in[0], in[1], Tensor()), 2);
        Tensor k = split_heads(linear(in[0], in[2], Tensor()), 2);
        Tensor v = split_heads(linear(in[0], in[3], Tensor()), 2);
        Tensor attn = softmax_lastdim(scale(bmm(q, k, true), 0.5));
        return mean_all(merge_heads(bmm(attn, v)));
      },
      {x, wq, wk, wv}, 1e-5);
}

TEST(TensorOps, Conv2dGradient) {
  Rng rng(7);
  auto x = random_tensor({2, 3, 5, 6}, rng);
  auto w = random_tensor({4, 3, 3, 3}, rng);
  auto b = random_tensor({4}, rng);
  check_gradients(
      [](const std::vector<Tensor>& in) { return mean_all(relu(conv2d(in[0], in[1], in[2], 1, 1))); },
      {x, w, b}, 1e-5);
}

TEST(TensorOps, Conv1x1Gradient) {
  Rng rng(8);
  auto x = random_tensor({2, 3, 4, 5}, rng);
  auto w = random_tensor({2, 3, 1, 1}, rng);
  auto b = random_tensor({2}, rng);
  check_gradients(
      [](const std::vector<Tensor>& in) { return mean_all(conv2d(in[0], in[1], in[2], 0, 0)); },
      {x, w, b});
}

TEST(TensorOps, DepthwiseConvTimeGradient) {
  Rng rng(9);
  auto x = random_tensor({2, 7, 3}, rng);
  auto w = random_tensor({3, 5}, rng);
  auto b = random_tensor({3}, rng);
  check_gradients(
      [](const std::vector<Tensor>& in) {
        return mean_all(depthwise_conv_time(in[0], in[1], in[2]));
      },
      {x, w, b});
}

TEST(TensorOps, PoolingGradients) {
  Rng rng(10);
  auto x = random_tensor({2, 3, 4, 8}, rng);
  check_gradients([](const std::vector<Tensor>& in) { return mean_all(maxpool_freq(in[0], 4)); }, {x});
  check_gradients(
      [](const std::vector<Tensor>& in) { return mean_all(adaptive_avgpool2d(in[0], 2, 2)); }, {x});
  auto seq = random_tensor({2, 10, 3}, rng);
  check_gradients([](const std::vector<Tensor>& in) { return mean_all(avgpool_time(in[0], 5)); },
                  {seq});
}

TEST(TensorOps, UpsampleConcatFlattenGradients) {
  Rng rng(11);
  auto a = random_tensor({2, 3, 4, 2}, rng);
  auto b = random_tensor({2, 2, 4, 2}, rng);
  check_gradients(
      [](const std::vector<Tensor>& in) {
        return mean_all(concat_channels(upsample_freq_nearest(in[0], 4),
                                        upsample_freq_nearest(in[1], 4)));
      },
      {a, b});
  check_gradients([](const std::vector<Tensor>& in) { return mean_all(flatten_to_seq(in[0])); }, {a});
}

TEST(TensorOps, BatchNormTrainGradient) {
  Rng rng(12);
  auto x = random_tensor({3, 2, 4, 5}, rng);
  auto gamma = random_tensor({2}, rng);
  auto beta = random_tensor({2}, rng);
  auto state = std::make_shared<BnState>();
  check_gradients(
      [state](const std::vector<Tensor>& in) {
        return mean_all(swish(batchnorm2d(in[0], in[1], in[2], *state, true)));
      },
      {x, gamma, beta}, 1e-5);
}

TEST(TensorOps, BatchNormEvalGradient) {
  Rng rng(13);
  auto x = random_tensor({3, 2, 4, 5}, rng);
  auto gamma = random_tensor({2}, rng);
  auto beta = random_tensor({2}, rng);
  auto state = std::make_shared<BnState>();
  state->running_mean = {0.3, -0.2};
  state->running_var = {1.1, 0.7};
  check_gradients(
      [state](const std::vector<Tensor>& in) {
        return mean_all(swish(batchnorm2d(in[0], in[1], in[2], *state, false)));
      },
      {x, gamma, beta});
}

TEST(TensorOps, BatchNormLastdimAndLayerNormGradients) {
  Rng rng(14);
  auto x = random_tensor({2, 6, 3}, rng);
  auto gamma = random_tensor({3}, rng);
  auto beta = random_tensor({3}, rng);
  auto state = std::make_shared<BnState>();
  check_gradients(
      [state](const std::vector<Tensor>& in) {
        return mean_all(swish(batchnorm_lastdim(in[0], in[1], in[2], *state, true)));
      },
      {x, gamma, beta}, 1e-5);
  check_gradients(
      [](const std::vector<Tensor>& in) {
        return mean_all(swish(layernorm(in[0], in[1], in[2])));
      },
      {x, gamma, beta}, 1e-5);
}

TEST(TensorOps, GluAndChannelSoftmaxGradients) {
  Rng rng(15);
  auto x = random_tensor({2, 5, 6}, rng);
  check_gradients([](const std::vector<Tensor>& in) { return mean_all(glu_lastdim(in[0])); }, {x});
  auto m = random_tensor({2, 2, 3, 4}, rng);
  auto other = random_tensor({2, 2, 3, 4}, rng);
  check_gradients(
      [](const std::vector<Tensor>& in) { return mean_all(mul(softmax_channel2(in[0]), in[1])); },
      {m, other});
}

TEST(TensorOps, PermuteBatchAndMaskMixGradients) {
  Rng rng(16);
  auto x = random_tensor({4, 2, 3, 2}, rng);
  std::vector<int> perm{2, 0, 3, 1};
  check_gradients(
      [perm](const std::vector<Tensor>& in) { return mean_all(permute_batch(in[0], perm)); }, {x});
  auto b = random_tensor({4, 2, 3, 2}, rng);
  std::vector<std::uint8_t> mask{1, 0, 0, 1};  // (C=2, F=2)
  check_gradients(
      [mask](const std::vector<Tensor>& in) {
        return mean_all(mix_mask_cf(in[0], in[1], mask));
      },
      {x, b});
}

TEST(TensorOps, MulBroadcastChannelGradient) {
  Rng rng(17);
  auto x = random_tensor({2, 3, 4, 2}, rng);
  auto w = random_tensor({2, 1, 4, 2}, rng);
  check_gradients(
      [](const std::vector<Tensor>& in) { return mean_all(mul_bcast_channel(in[0], in[1])); },
      {x, w});
}

TEST(TensorOps, LossGradients) {
  Rng rng(18);
  auto logits = random_tensor({2, 4, 3}, rng);
  std::vector<double> targets(2 * 4 * 3);
  for (auto& t : targets) t = rng.uniform() < 0.4 ? 1.0 : 0.0;
  check_gradients(
      [&targets](const std::vector<Tensor>& in) { return bce_mean(sigmoid(in[0]), targets); },
      {logits}, 1e-5);

  std::vector<double> teacher(2 * 4 * 3);
  for (auto& t : teacher) t = rng.uniform(0.05, 0.95);
  check_gradients(
      [&teacher](const std::vector<Tensor>& in) { return binary_kl_mean(teacher, sigmoid(in[0])); },
      {logits}, 1e-5);

  auto y = random_tensor({2, 4, 6}, rng);  // N=2 classes, 3 coords each
  std::vector<double> ref(2 * 4 * 6);
  for (auto& r : ref) r = rng.normal();
  std::vector<double> act(2 * 4 * 2);
  for (auto& a : act) a = rng.uniform();
  check_gradients(
      [&ref, &act](const std::vector<Tensor>& in) { return masked_sq_mean(in[0], ref, act); }, {y});
  check_gradients([](const std::vector<Tensor>& in) { return mse_mean(in[0], in[1]); },
                  {y, random_tensor({2, 4, 6}, rng)});
}

TEST(TensorOps, NoGradModeRecordsNothing) {
  Rng rng(19);
  auto x = random_tensor({2, 2}, rng);
  NoGradGuard guard;
  Tensor y = mean_all(mul(x, x));
  EXPECT_FALSE(y.requires_grad());
}

TEST(TensorOps, DetachedInputSkipsGradient) {
  Rng rng(20);
  auto a = random_tensor({2, 2}, rng, true);
  auto b = random_tensor({2, 2}, rng, false);
  Tensor loss = mse_mean(a, b);
  loss.backward();
  EXPECT_TRUE(b.grad_values().empty());
  EXPECT_FALSE(a.grad_values().empty());
}

TEST(Adam, ConvergesOnQuadratic) {
  Rng rng(21);
  ParamStore store;
  Tensor w = store.add_param("w", random_tensor({4}, rng, true));
  Adam opt(store);
  Tensor target = Tensor::from({4}, {1.0, -2.0, 0.5, 3.0});
  for (int i = 0; i < 2000; ++i) {
    store.zero_grad();
    Tensor loss = mse_mean(w, target);
    loss.backward();
    opt.step(0.01);
  }
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(w.data()[i], target.data()[i], 1e-4);
}

TEST(Rng, BetaOneOneIsUniform) {
  Rng rng(22);
  const int n = 10000;
  std::vector<double> draws(n);
  for (auto& d : draws) d = rng.beta(1.0, 1.0);
  std::sort(draws.begin(), draws.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double ecdf_hi = static_cast<double>(i + 1) / n;
    const double ecdf_lo = static_cast<double>(i) / n;
    ks = std::max({ks, std::abs(ecdf_hi - draws[i]), std::abs(draws[i] - ecdf_lo)});
  }
  EXPECT_LT(ks, 0.03);
}

TEST(Rng, DeterministicStreams) {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  Rng base(7);
  Rng f1 = base.fork(1);
  Rng f2 = base.fork(2);
  EXPECT_NE(f1.next_u64(), f2.next_u64());
}
