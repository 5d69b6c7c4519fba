#include "seldkd/kd/distill.hpp"

#include <stdexcept>

namespace seldkd::kd {

using nn::Tensor;

nn::Tensor rkd_loss(const model::SeldOutput& teacher, const model::SeldOutput& student,
                    const RkdWeights& w) {
  if (teacher.p.shape() != student.p.shape() || teacher.y.shape() != student.y.shape())
    throw std::invalid_argument("rkd_loss: teacher/student output shapes differ");
  if (teacher.p.requires_grad() || teacher.y.requires_grad())
    throw std::invalid_argument("rkd_loss: teacher outputs must be detached");
  Tensor sed = nn::binary_kl_mean(teacher.p.values(), student.p);
  Tensor ssl = nn::masked_sq_mean(student.y, teacher.y.values(), teacher.p.values());
  return nn::add_scaled(sed, ssl, w.beta1, w.beta2);
}

AbfFusion::AbfFusion(const std::vector<int>& stage_channels, std::uint64_t seed) {
  if (stage_channels.size() != 4) throw std::invalid_argument("AbfFusion: expected 4 stages");
  Rng rng(seed);
  stages_.resize(4);
  for (int j = 0; j < 4; ++j) {
    const int c = stage_channels[j];
    const std::string name = "abf.stage" + std::to_string(j + 1);
    stages_[j].transform = nn::Conv2d(store_, name + ".transform", c, c, 1, 1, rng);
    stages_[j].has_attention = j != 3;
    if (stages_[j].has_attention)
      stages_[j].attention = nn::Conv2d(store_, name + ".attention", 2 * c, 2, 1, 1, rng);
    stages_[j].output = nn::Conv2d(store_, name + ".output", c, c, 3, 3, rng);
  }
}

std::pair<std::vector<Tensor>, std::vector<Tensor>> AbfFusion::fuse(
    const std::vector<Tensor>& student_stages) {
  if (student_stages.size() != 4) throw std::invalid_argument("AbfFusion: expected 4 stage maps");
  std::vector<Tensor> fused(4), residuals(4);
  // Top stage: residual is just the transformed feature.
  residuals[3] = stages_[3].transform.forward(student_stages[3]);
  fused[3] = stages_[3].output.forward(residuals[3]);
  for (int j = 2; j >= 0; --j) {
    Tensor transformed = stages_[j].transform.forward(student_stages[j]);
    Tensor upper = nn::upsample_freq_nearest(residuals[j + 1], transformed.dim(3));
    Tensor z = nn::softmax_channel2(
        stages_[j].attention.forward(nn::concat_channels(transformed, upper)));
    Tensor z0 = nn::slice_channels(z, 0, 1);
    Tensor z1 = nn::slice_channels(z, 1, 2);
    residuals[j] =
        nn::add(nn::mul_bcast_channel(transformed, z0), nn::mul_bcast_channel(upper, z1));
    fused[j] = stages_[j].output.forward(residuals[j]);
  }
  return {std::move(fused), std::move(residuals)};
}

nn::Tensor hcl_loss(const std::vector<Tensor>& teacher_stages,
                    const std::vector<Tensor>& fused_stages, const SppConfig& spp) {
  if (teacher_stages.size() != fused_stages.size() || teacher_stages.empty())
    throw std::invalid_argument("hcl_loss: stage-count mismatch");
  if (spp.grids.size() != spp.weights.size())
    throw std::invalid_argument("hcl_loss: SPP grids/weights mismatch");
  const int n_stages = static_cast<int>(teacher_stages.size());
  double weight_sum = 0.0;
  for (double w : spp.weights) weight_sum += w;

  Tensor total = Tensor::scalar(0.0);
  for (int j = 0; j < n_stages; ++j) {
    if (teacher_stages[j].shape() != fused_stages[j].shape())
      throw std::invalid_argument("hcl_loss: stage shape mismatch at stage " + std::to_string(j + 1));
    // Full-resolution alignment term, all stages.
    total = nn::add(total, nn::mse_mean(fused_stages[j], teacher_stages[j]));
    if (j == n_stages - 1) continue;  // top stage carries no SPP terms
    for (std::size_t m = 0; m < spp.grids.size(); ++m) {
      const double alpha = spp.weights[m] / weight_sum;
      Tensor term;
      if (spp.grids[m] == 0) {
        term = nn::mse_mean(fused_stages[j], teacher_stages[j]);
      } else {
        const int g = spp.grids[m];
        term = nn::mse_mean(nn::adaptive_avgpool2d(fused_stages[j], g, g),
                            nn::adaptive_avgpool2d(teacher_stages[j], g, g));
      }
      total = nn::add(total, nn::scale(term, alpha));
    }
  }
  return total;
}

DistillOutputs distill_step(model::Backbone& teacher, model::Backbone& student, AbfFusion* fusion,
                            const nn::Tensor& teacher_input, const nn::Tensor& student_input,
                            const mix::MixPlan* plan, const RkdWeights& weights,
                            const SppConfig& spp, bool student_training, Rng* dropout_rng) {
  DistillOutputs out;
  {
    nn::NoGradGuard no_grad;
    out.teacher = teacher.forward(teacher_input, /*training=*/false, plan);
  }
  out.student = student.forward(student_input, student_training, plan, dropout_rng);
  out.rkd = rkd_loss(out.teacher.out, out.student.out, weights);
  if (fusion != nullptr) {
    std::vector<Tensor> student_stages(out.student.pyramid.begin() + 1, out.student.pyramid.end());
    std::vector<Tensor> teacher_stages(out.teacher.pyramid.begin() + 1, out.teacher.pyramid.end());
    auto [fused, residuals] = fusion->fuse(student_stages);
    out.fkd = hcl_loss(teacher_stages, fused, spp);
  } else {
    out.fkd = Tensor::scalar(0.0);
  }
  return out;
}

}  // namespace seldkd::kd
