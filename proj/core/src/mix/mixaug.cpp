#include "seldkd/mix/mixaug.hpp"

#include <cmath>
#include <stdexcept>

#include "seldkd/nn/ops.hpp"

namespace seldkd::mix {

MixMethod parse_mix_method(const std::string& name) {
  if (name == "none") return MixMethod::kNone;
  if (name == "mixup") return MixMethod::kMixup;
  if (name == "lossmix") return MixMethod::kLossMix;
  if (name == "manifoldmixup") return MixMethod::kManifoldMixup;
  if (name == "pointmix") return MixMethod::kPointMix;
  if (name == "cutmix") return MixMethod::kCutMix;
  if (name == "cutlossmix") return MixMethod::kCutLossMix;
  if (name == "patchmix") return MixMethod::kPatchMix;
  throw std::invalid_argument("unknown mix method: " + name);
}

std::string to_string(MixMethod m) {
  switch (m) {
    case MixMethod::kNone: return "none";
    case MixMethod::kMixup: return "mixup";
    case MixMethod::kLossMix: return "lossmix";
    case MixMethod::kManifoldMixup: return "manifoldmixup";
    case MixMethod::kPointMix: return "pointmix";
    case MixMethod::kCutMix: return "cutmix";
    case MixMethod::kCutLossMix: return "cutlossmix";
    case MixMethod::kPatchMix: return "patchmix";
  }
  return "none";
}

LayerLevel parse_layer_level(const std::string& name) {
  if (name == "conv") return LayerLevel::kConv;
  if (name == "basicblock") return LayerLevel::kBasicBlock;
  if (name == "resblock") return LayerLevel::kResBlock;
  throw std::invalid_argument("unknown mix layer set: " + name);
}

std::string to_string(LayerLevel l) {
  switch (l) {
    case LayerLevel::kConv: return "conv";
    case LayerLevel::kBasicBlock: return "basicblock";
    case LayerLevel::kResBlock: return "resblock";
  }
  return "resblock";
}

MethodTraits method_traits(MixMethod m) {
  switch (m) {
    case MixMethod::kNone: return {};
    case MixMethod::kMixup: return {false, false, true};
    case MixMethod::kLossMix: return {false, false, false};
    case MixMethod::kManifoldMixup: return {false, true, true};
    case MixMethod::kPointMix: return {false, true, false};
    case MixMethod::kCutMix: return {true, false, true};
    case MixMethod::kCutLossMix: return {true, false, false};
    case MixMethod::kPatchMix: return {true, true, false};
  }
  return {};
}

EligibleLayerSet make_eligible_set(LayerLevel level) {
  switch (level) {
    case LayerLevel::kConv: return {level, 19};
    case LayerLevel::kBasicBlock: return {level, 9};
    case LayerLevel::kResBlock: return {level, 5};
  }
  return {LayerLevel::kResBlock, 5};
}

std::vector<std::uint8_t> MixPlan::mask_cf(int channels, int freq) const {
  if (freq != feat_f)
    throw std::invalid_argument("MixPlan::mask_cf: frequency dim does not match the plan");
  if (channels > feat_c)
    throw std::invalid_argument("MixPlan::mask_cf: tensor has more channels than the plan");
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(channels) * freq, 1);
  if (patch_box) {
    for (int c = std::max(0, patch_box->c1); c < std::min(channels, patch_box->c2); ++c)
      for (int f = patch_box->f1; f < patch_box->f2; ++f)
        mask[static_cast<std::size_t>(c) * freq + f] = 0;
  }
  return mask;
}

MixPlan sample_mix_plan(MixMethod method, double alpha, const EligibleLayerSet& layers,
                        const std::vector<std::pair<int, int>>& layer_dims, int batch, Rng& rng) {
  if (batch <= 0) throw std::invalid_argument("sample_mix_plan: empty batch");
  if (alpha <= 0.0) throw std::invalid_argument("sample_mix_plan: alpha must be positive");
  if (static_cast<int>(layer_dims.size()) != layers.size)
    throw std::invalid_argument("sample_mix_plan: layer_dims size must match the eligible set");

  MixPlan plan;
  plan.method = method;
  plan.level = layers.level;
  if (method == MixMethod::kNone) {
    plan.pairing.resize(batch);
    for (int i = 0; i < batch; ++i) plan.pairing[i] = i;
    return plan;
  }
  const MethodTraits traits = method_traits(method);
  plan.lambda = rng.beta(alpha, alpha);
  plan.layer = traits.hidden ? static_cast<int>(rng.uniform_int(layers.size)) : 0;
  plan.feat_f = layer_dims[plan.layer].first;
  plan.feat_c = layer_dims[plan.layer].second;
  if (traits.patch) {
    const double fd = plan.feat_f, cd = plan.feat_c;
    const double rf = fd * std::sqrt(1.0 - plan.lambda);
    const double rc = cd * std::sqrt(1.0 - plan.lambda);
    const double cf = rng.uniform(0.0, fd);
    const double cc = rng.uniform(0.0, cd);
    PatchBox box;
    box.f1 = static_cast<int>(std::lround(std::max(0.0, cf - rf / 2.0)));
    box.f2 = static_cast<int>(std::lround(std::min(fd, cf + rf / 2.0)));
    box.c1 = static_cast<int>(std::lround(std::max(0.0, cc - rc / 2.0)));
    box.c2 = static_cast<int>(std::lround(std::min(cd, cc + rc / 2.0)));
    plan.patch_box = box;
    plan.lambda_eff =
        1.0 - static_cast<double>(box.area()) / (static_cast<double>(plan.feat_f) * plan.feat_c);
  } else {
    plan.lambda_eff = plan.lambda;
  }
  plan.pairing = rng.permutation(batch);
  return plan;
}

nn::Tensor apply_mix(const MixPlan& plan, const nn::Tensor& x, const nn::Tensor& partner) {
  if (!plan.active()) return x;
  if (x.shape() != partner.shape())
    throw std::invalid_argument("apply_mix: operand shapes differ");
  if (plan.is_patch()) {
    const auto& s = x.shape();
    if (s.size() != 4) throw std::invalid_argument("apply_mix: patch mixing expects [B,C,T,F]");
    return nn::mix_mask_cf(x, partner, plan.mask_cf(s[1], s[3]));
  }
  return nn::add_scaled(x, partner, plan.lambda, 1.0 - plan.lambda);
}

nn::Tensor mix_supervision(const nn::Tensor& loss_a, const nn::Tensor& loss_b, const MixPlan& plan) {
  if (!std::isfinite(loss_a.item()) || !std::isfinite(loss_b.item()))
    throw std::runtime_error("mix_supervision: non-finite loss");
  return nn::add_scaled(loss_a, loss_b, plan.lambda_eff, 1.0 - plan.lambda_eff);
}

double mix_supervision(double loss_a, double loss_b, const MixPlan& plan) {
  if (!std::isfinite(loss_a) || !std::isfinite(loss_b))
    throw std::runtime_error("mix_supervision: non-finite loss");
  return plan.lambda_eff * loss_a + (1.0 - plan.lambda_eff) * loss_b;
}

std::vector<double> mix_labels(const std::vector<double>& a, const std::vector<double>& b,
                               double lambda) {
  if (a.size() != b.size()) throw std::invalid_argument("mix_labels: size mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = lambda * a[i] + (1.0 - lambda) * b[i];
  return out;
}

}  // namespace seldkd::mix
