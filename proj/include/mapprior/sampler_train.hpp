#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mapprior/config.hpp"
#include "mapprior/dataset.hpp"
#include "mapprior/rng.hpp"
#include "mapprior/sampler_model.hpp"
#include "mapprior/vq_model.hpp"

namespace mapprior {

struct SamplerStepReport {
    double ce = 0.0;        // teacher-forced token cross-entropy
    double out = 0.0;       // relaxed decode vs. ground truth
    double ce_one = 0.0;    // parallel-prediction head
    double total = 0.0;
};

// Mean cross-entropy of per-slot logits [B,n,K] against token ids [B,n].
torch::Tensor token_cross_entropy(const torch::Tensor& logits, const torch::Tensor& targets);

// Optimizes the transformer against a frozen prior:
//   total = ce + out_loss_weight * out (+ one-step ce when the head is on).
// The out term pushes Gumbel-relaxed token choices through the prior's
// decoder; the prior's parameters take no updates.
class SamplerTrainer {
public:
    SamplerTrainer(SamplerModel model, PriorModel prior, const RunConfig& cfg);

    // y_gt: [B,C,H,W]; features: [B,Cf,H,W] or undefined (ablation);
    // gt_tokens / guid_tokens: [B, n_tok] int64 codebook indices.
    SamplerStepReport step(const torch::Tensor& y_gt, const torch::Tensor& features,
                           const torch::Tensor& gt_tokens, const torch::Tensor& guid_tokens);

    SamplerModel& model() { return model_; }
    int64_t steps_done() const { return step_count_; }

private:
    SamplerModel model_;
    PriorModel prior_;
    RunConfig cfg_;
    std::unique_ptr<torch::optim::Adam> opt_;
    Rng drop_rng_;
    Rng gumbel_rng_;
    int64_t step_count_ = 0;
};

// Full loop over example triples; writes sampler_loss.csv, periodic
// sampler_last_good.ckpt and final sampler.ckpt under cfg.output_dir.
SamplerModel train_sampler(const std::vector<Example>& train, PriorModel prior,
                           const RunConfig& cfg);

// Rebuilds a model from a checkpoint. The prior's metadata must carry the
// same config hash the sampler was trained against.
SamplerModel load_sampler(const std::string& path, const RunConfig& cfg,
                          const std::map<std::string, std::string>& prior_meta);

}  // namespace mapprior
