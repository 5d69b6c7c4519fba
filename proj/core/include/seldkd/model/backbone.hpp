#pragma once

#include <memory>
#include <vector>

#include "seldkd/mix/mixaug.hpp"
#include "seldkd/nn/module.hpp"

namespace seldkd::model {

struct BackboneConfig {
  int in_channels = 7;  // 7 audio-only teacher, 19 audio-visual student
  std::vector<int> resblock_channels{64, 128, 256, 512};
  std::vector<int> pool_freq{4, 4, 2};  // freq-only max-pool after ResBlocks 1-3
  int n_mel = 64;
  int embed_dim = 256;  // D
  int conformer_layers = 8;
  int attn_heads = 8;
  int conv_kernel = 31;  // conformer depthwise kernel, odd
  int n_classes = 13;
  int label_downsample = 5;
  int head_hidden = 256;
  double dropout = 0.05;  // conformer blocks only

  void validate() const;
  // Frequency extent of each pyramid stage (post-pooling): e.g. 16,4,2,2.
  std::vector<int> stage_freqs() const;
  int flattened_dim() const;  // D_a = last channels * last freq

  // Small presets used by the desk-scale experiments and gradient checks.
  static BackboneConfig desk(int in_channels);
  static BackboneConfig tiny(int in_channels);
};

struct SeldOutput {
  nn::Tensor p;  // [B, L, N] activity probabilities
  nn::Tensor y;  // [B, L, 3N] Cartesian coordinates, xyz per class
};

struct ForwardResult {
  SeldOutput out;
  // pyramid[0] is the input tensor, pyramid[1..4] the post-pool stage maps.
  std::vector<nn::Tensor> pyramid;
  nn::Tensor context;  // C_a [B, T, D]
};

// ResNet-Conformer with SED classification and SSL regression heads.
class Backbone {
 public:
  Backbone(const BackboneConfig& cfg, std::uint64_t seed);

  // Full pass; plan (optional) injects feature mixing at its layer using the
  // batch pairing, so partner activations come from the same pass.
  ForwardResult forward(const nn::Tensor& x, bool training, const mix::MixPlan* plan = nullptr,
                        Rng* dropout_rng = nullptr, bool capture_attention = false);

  // (E_a [B,T,D_a], pyramid) through the convolutional encoder.
  std::pair<nn::Tensor, std::vector<nn::Tensor>> resnet_forward(const nn::Tensor& x, bool training,
                                                                const mix::MixPlan* plan = nullptr);
  nn::Tensor conformer_forward(const nn::Tensor& e, bool training, Rng* dropout_rng = nullptr,
                               bool capture_attention = false);
  SeldOutput heads_forward(const nn::Tensor& c_a);

  const BackboneConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  void set_frozen(bool frozen) { store_.set_requires_grad(!frozen); }

  // (F_d, C_d) of every eligible mixing layer at the given level, index 0
  // being the input layer. Sizes are 19 / 9 / 5 for conv / basicblock /
  // resblock.
  static std::vector<std::pair<int, int>> layer_dims(const BackboneConfig& cfg,
                                                     mix::LayerLevel level);

  // Attention maps captured by the last forward with capture_attention=true,
  // one [B,H,T,T] value array per conformer layer.
  std::vector<std::vector<double>> last_attention;

 private:
  struct BasicBlock {
    nn::Conv2d conv1, conv2;
    nn::BatchNorm2d bn1, bn2;
    nn::Conv2d proj;          // 1x1 shortcut when channels change
    nn::BatchNorm2d proj_bn;
    bool has_proj = false;
  };
  struct ConformerLayer {
    nn::LayerNorm ln_ffn1, ln_attn, ln_conv, ln_ffn2, ln_out;
    nn::Linear ffn1_in, ffn1_out, ffn2_in, ffn2_out;
    nn::Linear wq, wk, wv, wo;
    nn::Linear conv_pw1, conv_pw2;
    nn::DepthwiseConv1d conv_dw;
    nn::BatchNorm1d conv_bn;
  };

  nn::Tensor basic_block_forward(const BasicBlock& b, const nn::Tensor& x, bool training,
                                 const mix::MixPlan* plan, int conv_base);
  nn::Tensor conformer_layer_forward(const ConformerLayer& l, const nn::Tensor& x, bool training,
                                     Rng* rng, bool capture);
  nn::Tensor maybe_mix(const nn::Tensor& h, const mix::MixPlan* plan, mix::LayerLevel level,
                       int index) const;

  BackboneConfig cfg_;
  nn::ParamStore store_;
  nn::Conv2d stem1_, stem2_;
  nn::BatchNorm2d stem1_bn_, stem2_bn_;
  std::vector<std::vector<BasicBlock>> stages_;  // 4 stages x 2 blocks
  nn::Linear proj_;
  std::vector<ConformerLayer> conformer_;
  nn::Linear cls_fc1_, cls_fc2_, reg_fc1_, reg_fc2_;
};

// Copies all parameters and buffers; the visual input-channel slices of the
// first conv are zeroed so the student's initial function matches the
// teacher's on the audio channels.
void init_student_from_teacher(Backbone& student, const Backbone& teacher);

}  // namespace seldkd::model
