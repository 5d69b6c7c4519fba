#include "seldkd/model/backbone.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace seldkd::model {

using nn::Tensor;

void BackboneConfig::validate() const {
  if (in_channels <= 0) throw std::invalid_argument("BackboneConfig: in_channels must be positive");
  if (resblock_channels.size() != 4)
    throw std::invalid_argument("BackboneConfig: expected 4 ResBlock channel widths");
  if (pool_freq.size() != 3)
    throw std::invalid_argument("BackboneConfig: expected 3 max-pool kernels");
  if (embed_dim % attn_heads != 0)
    throw std::invalid_argument("BackboneConfig: embed_dim must be divisible by attn_heads");
  if (conv_kernel % 2 == 0) throw std::invalid_argument("BackboneConfig: conv_kernel must be odd");
  int f = n_mel;
  for (int k : pool_freq) {
    if (k <= 0 || f % k != 0)
      throw std::invalid_argument("BackboneConfig: pool kernels must divide the frequency axis");
    f /= k;
  }
}

std::vector<int> BackboneConfig::stage_freqs() const {
  std::vector<int> freqs;
  int f = n_mel;
  for (int s = 0; s < 4; ++s) {
    if (s < 3) f /= pool_freq[s];
    freqs.push_back(f);
  }
  return freqs;
}

int BackboneConfig::flattened_dim() const { return resblock_channels[3] * stage_freqs()[3]; }

BackboneConfig BackboneConfig::desk(int in_channels) {
  BackboneConfig cfg;
  cfg.in_channels = in_channels;
  cfg.resblock_channels = {8, 16, 32, 64};
  cfg.embed_dim = 64;
  cfg.conformer_layers = 2;
  cfg.attn_heads = 4;
  cfg.conv_kernel = 15;
  cfg.head_hidden = 64;
  cfg.dropout = 0.0;
  return cfg;
}

BackboneConfig BackboneConfig::tiny(int in_channels) {
  BackboneConfig cfg;
  cfg.in_channels = in_channels;
  cfg.resblock_channels = {8, 16, 32, 64};
  cfg.embed_dim = 32;
  cfg.conformer_layers = 2;
  cfg.attn_heads = 4;
  cfg.conv_kernel = 7;
  cfg.head_hidden = 32;
  cfg.dropout = 0.0;
  return cfg;
}

std::vector<std::pair<int, int>> Backbone::layer_dims(const BackboneConfig& cfg,
                                                      mix::LayerLevel level) {
  cfg.validate();
  const auto& ch = cfg.resblock_channels;
  // Frequency extent while a stage's blocks run (pooling happens after).
  std::vector<int> run_freq(4);
  int f = cfg.n_mel;
  for (int s = 0; s < 4; ++s) {
    run_freq[s] = f;
    if (s < 3) f /= cfg.pool_freq[s];
  }
  const auto post = cfg.stage_freqs();
  std::vector<std::pair<int, int>> dims;
  dims.emplace_back(cfg.n_mel, cfg.in_channels);  // input layer
  switch (level) {
    case mix::LayerLevel::kConv:
      dims.emplace_back(cfg.n_mel, ch[0]);  // stem conv 1
      dims.emplace_back(cfg.n_mel, ch[0]);  // stem conv 2
      for (int s = 0; s < 4; ++s)
        for (int b = 0; b < 2; ++b) {
          dims.emplace_back(run_freq[s], ch[s]);
          dims.emplace_back(run_freq[s], ch[s]);
        }
      break;
    case mix::LayerLevel::kBasicBlock:
      for (int s = 0; s < 4; ++s)
        for (int b = 0; b < 2; ++b) dims.emplace_back(run_freq[s], ch[s]);
      break;
    case mix::LayerLevel::kResBlock:
      for (int s = 0; s < 4; ++s) dims.emplace_back(post[s], ch[s]);
      break;
  }
  return dims;
}

Backbone::Backbone(const BackboneConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const auto& ch = cfg.resblock_channels;
  stem1_ = nn::Conv2d(store_, "stem1", cfg.in_channels, ch[0], 3, 3, rng);
  stem1_bn_ = nn::BatchNorm2d(store_, "stem1_bn", ch[0]);
  stem2_ = nn::Conv2d(store_, "stem2", ch[0], ch[0], 3, 3, rng);
  stem2_bn_ = nn::BatchNorm2d(store_, "stem2_bn", ch[0]);

  stages_.resize(4);
  int in_ch = ch[0];
  for (int s = 0; s < 4; ++s) {
    for (int b = 0; b < 2; ++b) {
      const int block_in = b == 0 ? in_ch : ch[s];
      const std::string name = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1);
      BasicBlock blk;
      blk.conv1 = nn::Conv2d(store_, name + ".conv1", block_in, ch[s], 3, 3, rng);
      blk.bn1 = nn::BatchNorm2d(store_, name + ".bn1", ch[s]);
      blk.conv2 = nn::Conv2d(store_, name + ".conv2", ch[s], ch[s], 3, 3, rng);
      blk.bn2 = nn::BatchNorm2d(store_, name + ".bn2", ch[s]);
      blk.has_proj = block_in != ch[s];
      if (blk.has_proj) {
        blk.proj = nn::Conv2d(store_, name + ".proj", block_in, ch[s], 1, 1, rng);
        blk.proj_bn = nn::BatchNorm2d(store_, name + ".proj_bn", ch[s]);
      }
      stages_[s].push_back(std::move(blk));
    }
    in_ch = ch[s];
  }

  proj_ = nn::Linear(store_, "proj", cfg_.flattened_dim(), cfg.embed_dim, rng);
  conformer_.resize(cfg.conformer_layers);
  const int d = cfg.embed_dim;
  for (int l = 0; l < cfg.conformer_layers; ++l) {
    const std::string name = "conformer" + std::to_string(l + 1);
    ConformerLayer& layer = conformer_[l];
    layer.ln_ffn1 = nn::LayerNorm(store_, name + ".ln_ffn1", d);
    layer.ffn1_in = nn::Linear(store_, name + ".ffn1_in", d, 4 * d, rng);
    layer.ffn1_out = nn::Linear(store_, name + ".ffn1_out", 4 * d, d, rng);
    layer.ln_attn = nn::LayerNorm(store_, name + ".ln_attn", d);
    layer.wq = nn::Linear(store_, name + ".wq", d, d, rng);
    layer.wk = nn::Linear(store_, name + ".wk", d, d, rng);
    layer.wv = nn::Linear(store_, name + ".wv", d, d, rng);
    layer.wo = nn::Linear(store_, name + ".wo", d, d, rng);
    layer.ln_conv = nn::LayerNorm(store_, name + ".ln_conv", d);
    layer.conv_pw1 = nn::Linear(store_, name + ".conv_pw1", d, 2 * d, rng);
    layer.conv_dw = nn::DepthwiseConv1d(store_, name + ".conv_dw", d, cfg.conv_kernel, rng);
    layer.conv_bn = nn::BatchNorm1d(store_, name + ".conv_bn", d);
    layer.conv_pw2 = nn::Linear(store_, name + ".conv_pw2", d, d, rng);
    layer.ln_ffn2 = nn::LayerNorm(store_, name + ".ln_ffn2", d);
    layer.ffn2_in = nn::Linear(store_, name + ".ffn2_in", d, 4 * d, rng);
    layer.ffn2_out = nn::Linear(store_, name + ".ffn2_out", 4 * d, d, rng);
    layer.ln_out = nn::LayerNorm(store_, name + ".ln_out", d);
  }

  cls_fc1_ = nn::Linear(store_, "cls_fc1", d, cfg.head_hidden, rng);
  cls_fc2_ = nn::Linear(store_, "cls_fc2", cfg.head_hidden, cfg.n_classes, rng);
  reg_fc1_ = nn::Linear(store_, "reg_fc1", d, cfg.head_hidden, rng);
  reg_fc2_ = nn::Linear(store_, "reg_fc2", cfg.head_hidden, 3 * cfg.n_classes, rng);
}

Tensor Backbone::maybe_mix(const Tensor& h, const mix::MixPlan* plan, mix::LayerLevel level,
                           int index) const {
  if (plan == nullptr || !plan->active()) return h;
  // The input layer belongs to every eligible set as member 0.
  const bool hit = index == 0 ? plan->layer == 0 : (plan->level == level && plan->layer == index);
  if (!hit) return h;
  return mix::apply_mix(*plan, h, nn::permute_batch(h, plan->pairing));
}

Tensor Backbone::basic_block_forward(const BasicBlock& blk, const Tensor& x, bool training,
                                     const mix::MixPlan* plan, int conv_base) {
  Tensor h = relu(blk.bn1.forward(blk.conv1.forward(x), training));
  h = maybe_mix(h, plan, mix::LayerLevel::kConv, conv_base);
  h = blk.bn2.forward(blk.conv2.forward(h), training);
  h = maybe_mix(h, plan, mix::LayerLevel::kConv, conv_base + 1);
  Tensor shortcut = blk.has_proj ? blk.proj_bn.forward(blk.proj.forward(x), training) : x;
  return relu(add(h, shortcut));
}

std::pair<Tensor, std::vector<Tensor>> Backbone::resnet_forward(const Tensor& x, bool training,
                                                                const mix::MixPlan* plan) {
  if (x.shape().size() != 4 || x.dim(1) != cfg_.in_channels || x.dim(3) != cfg_.n_mel)
    throw std::invalid_argument("Backbone: input must be [B," + std::to_string(cfg_.in_channels) +
                                ",T," + std::to_string(cfg_.n_mel) + "]");
  if (plan != nullptr && plan->active()) {
    const int set_size = mix::make_eligible_set(plan->level).size;
    if (plan->layer < 0 || plan->layer >= set_size)
      throw std::invalid_argument("Backbone: mix layer index outside the eligible set");
    if (static_cast<int>(plan->pairing.size()) != x.dim(0))
      throw std::invalid_argument("Backbone: mix pairing does not match batch size");
  }
  std::vector<Tensor> pyramid;
  Tensor h = maybe_mix(x, plan, mix::LayerLevel::kResBlock, 0);
  pyramid.push_back(h);

  h = relu(stem1_bn_.forward(stem1_.forward(h), training));
  h = maybe_mix(h, plan, mix::LayerLevel::kConv, 1);
  h = relu(stem2_bn_.forward(stem2_.forward(h), training));
  h = maybe_mix(h, plan, mix::LayerLevel::kConv, 2);

  for (int s = 0; s < 4; ++s) {
    for (int b = 0; b < 2; ++b) {
      h = basic_block_forward(stages_[s][b], h, training, plan, 3 + (s * 2 + b) * 2);
      h = maybe_mix(h, plan, mix::LayerLevel::kBasicBlock, s * 2 + b + 1);
    }
    if (s < 3) h = maxpool_freq(h, cfg_.pool_freq[s]);
    h = maybe_mix(h, plan, mix::LayerLevel::kResBlock, s + 1);
    pyramid.push_back(h);
  }
  return {flatten_to_seq(h), std::move(pyramid)};
}

Tensor Backbone::conformer_layer_forward(const ConformerLayer& l, const Tensor& x, bool training,
                                         Rng* rng, bool capture) {
  const double p = cfg_.dropout;
  if (training && p > 0.0 && rng == nullptr)
    throw std::invalid_argument("Backbone: dropout enabled but no RNG supplied");
  auto drop = [&](const Tensor& t) { return rng ? nn::dropout(t, p, *rng, training) : t; };

  auto ffn = [&](const nn::Linear& in, const nn::Linear& out, const Tensor& z) {
    return out.forward(drop(swish(in.forward(z))));
  };

  Tensor h = add(x, scale(drop(ffn(l.ffn1_in, l.ffn1_out, l.ln_ffn1.forward(x))), 0.5));

  {
    const int heads = cfg_.attn_heads;
    const int dh = cfg_.embed_dim / heads;
    Tensor attn_in = l.ln_attn.forward(h);
    Tensor q = split_heads(l.wq.forward(attn_in), heads);
    Tensor k = split_heads(l.wk.forward(attn_in), heads);
    Tensor v = split_heads(l.wv.forward(attn_in), heads);
    Tensor attn = softmax_lastdim(scale(bmm(q, k, true), 1.0 / std::sqrt(static_cast<double>(dh))));
    if (capture) last_attention.push_back(attn.values());
    Tensor ctx = l.wo.forward(merge_heads(bmm(attn, v)));
    h = add(h, drop(ctx));
  }

  {
    Tensor z = glu_lastdim(l.conv_pw1.forward(l.ln_conv.forward(h)));
    z = l.conv_dw.forward(z);
    z = l.conv_bn.forward(z, training);
    z = l.conv_pw2.forward(swish(z));
    h = add(h, drop(z));
  }

  h = add(h, scale(drop(ffn(l.ffn2_in, l.ffn2_out, l.ln_ffn2.forward(h))), 0.5));
  return l.ln_out.forward(h);
}

Tensor Backbone::conformer_forward(const Tensor& e, bool training, Rng* dropout_rng,
                                   bool capture_attention) {
  if (e.shape().size() != 3 || e.dim(2) != cfg_.embed_dim)
    throw std::invalid_argument("Backbone: conformer input must be [B,T,D]");
  if (capture_attention) last_attention.clear();
  Tensor h = e;
  for (const auto& layer : conformer_)
    h = conformer_layer_forward(layer, h, training, dropout_rng, capture_attention);
  return h;
}

SeldOutput Backbone::heads_forward(const Tensor& c_a) {
  Tensor c = avgpool_time(c_a, cfg_.label_downsample);
  SeldOutput out;
  out.p = sigmoid(cls_fc2_.forward(relu(cls_fc1_.forward(c))));
  out.y = reg_fc2_.forward(relu(reg_fc1_.forward(c)));
  return out;
}

ForwardResult Backbone::forward(const Tensor& x, bool training, const mix::MixPlan* plan,
                                Rng* dropout_rng, bool capture_attention) {
  auto [e_a, pyramid] = resnet_forward(x, training, plan);
  Tensor e = proj_.forward(e_a);
  Tensor c_a = conformer_forward(e, training, dropout_rng, capture_attention);
  ForwardResult result;
  result.out = heads_forward(c_a);
  result.pyramid = std::move(pyramid);
  result.context = c_a;
  return result;
}

void init_student_from_teacher(Backbone& student, const Backbone& teacher) {
  const auto& tp = teacher.params().params();
  auto& sp = student.params().params();
  if (tp.size() != sp.size())
    throw std::invalid_argument("init_student_from_teacher: parameter registries differ");
  for (std::size_t i = 0; i < tp.size(); ++i) {
    const auto& [tname, tt] = tp[i];
    auto& [sname, st] = sp[i];
    if (tname != sname)
      throw std::invalid_argument("init_student_from_teacher: parameter order mismatch at " + tname);
    if (tt.shape() == st.shape()) {
      st.values() = tt.values();
      continue;
    }
    if (tname != "stem1.weight")
      throw std::invalid_argument("init_student_from_teacher: unexpected shape mismatch at " + tname);
    // [Cout, Cin, 3, 3]: copy the audio channels, zero the visual ones.
    const int c_out = st.dim(0), s_in = st.dim(1), t_in = tt.dim(1);
    const int kk = st.dim(2) * st.dim(3);
    if (t_in > s_in)
      throw std::invalid_argument("init_student_from_teacher: teacher has more input channels");
    std::fill(st.values().begin(), st.values().end(), 0.0);
    for (int o = 0; o < c_out; ++o)
      for (int c = 0; c < t_in; ++c)
        std::memcpy(st.data() + (static_cast<std::int64_t>(o) * s_in + c) * kk,
                    tt.data() + (static_cast<std::int64_t>(o) * t_in + c) * kk,
                    sizeof(double) * kk);
  }
  const auto& tb = teacher.params().buffers();
  auto& sb = student.params().buffers();
  if (tb.size() != sb.size())
    throw std::invalid_argument("init_student_from_teacher: buffer registries differ");
  for (std::size_t i = 0; i < tb.size(); ++i) {
    if (tb[i].first != sb[i].first)
      throw std::invalid_argument("init_student_from_teacher: buffer order mismatch");
    *sb[i].second = *tb[i].second;
  }
}

}  // namespace seldkd::model
