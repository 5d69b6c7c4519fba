#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seldkd/nn/tensor.hpp"
#include "seldkd/util/rng.hpp"

namespace seldkd::mix {

enum class MixMethod {
  kNone,
  kMixup,
  kLossMix,
  kManifoldMixup,
  kPointMix,
  kCutMix,
  kCutLossMix,
  kPatchMix,
};

enum class LayerLevel { kConv, kBasicBlock, kResBlock };

MixMethod parse_mix_method(const std::string& name);
std::string to_string(MixMethod m);
LayerLevel parse_layer_level(const std::string& name);
std::string to_string(LayerLevel l);

// Granularity / layer / supervision attributes of each method.
struct MethodTraits {
  bool patch = false;        // point otherwise
  bool hidden = false;       // input-layer only otherwise
  bool label_mixing = false; // loss mixing otherwise
};
MethodTraits method_traits(MixMethod m);

// Eligible mixing layers; member 0 is always the input layer.
struct EligibleLayerSet {
  LayerLevel level = LayerLevel::kResBlock;
  int size = 0;  // conv: 19, basicblock: 9, resblock: 5
};
EligibleLayerSet make_eligible_set(LayerLevel level);

// Patch bounding box over (freq, channel) cells of the mixed layer.
struct PatchBox {
  int f1 = 0, f2 = 0, c1 = 0, c2 = 0;
  std::int64_t area() const { return std::int64_t(f2 - f1) * (c2 - c1); }
};

// One per-batch augmentation decision.
struct MixPlan {
  MixMethod method = MixMethod::kNone;
  LayerLevel level = LayerLevel::kResBlock;
  int layer = 0;            // index into the eligible set; 0 = input layer
  double lambda = 1.0;      // Beta(alpha, alpha) draw
  double lambda_eff = 1.0;  // realized mixing proportion used for supervision
  int feat_f = 0, feat_c = 0;  // (F_d, C_d) of the mixed layer
  std::optional<PatchBox> patch_box;
  std::vector<int> pairing;    // batch permutation

  bool active() const { return method != MixMethod::kNone; }
  bool is_patch() const { return patch_box.has_value(); }
  // Binary keep-mask over (channels, freq) for a layer with the given dims;
  // channels beyond feat_c never occur, channels below it may be restricted
  // (the audio-only teacher mixes the audio sub-tensor of an input-layer plan).
  std::vector<std::uint8_t> mask_cf(int channels, int freq) const;
};

// Samples one plan for a batch. layer_dims[i] = (F_d, C_d) of eligible
// member i; input-layer methods always pick member 0.
MixPlan sample_mix_plan(MixMethod method, double alpha, const EligibleLayerSet& layers,
                        const std::vector<std::pair<int, int>>& layer_dims, int batch, Rng& rng);

// M * a + (1 - M) * b, where b holds the pairing partners' activations.
nn::Tensor apply_mix(const MixPlan& plan, const nn::Tensor& x, const nn::Tensor& partner);

// lambda_eff * loss_a + (1 - lambda_eff) * loss_b.
nn::Tensor mix_supervision(const nn::Tensor& loss_a, const nn::Tensor& loss_b, const MixPlan& plan);
double mix_supervision(double loss_a, double loss_b, const MixPlan& plan);

// Elementwise label interpolation for the label-supervision methods.
std::vector<double> mix_labels(const std::vector<double>& a, const std::vector<double>& b,
                               double lambda);

}  // namespace seldkd::mix
