#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mapprior/config.hpp"
#include "mapprior/layout.hpp"
#include "mapprior/rng.hpp"
#include "mapprior/vq_model.hpp"

namespace mapprior {

struct PriorStepReport {
    double recon = 0.0;
    double gan_g = 0.0;
    double gan_d = 0.0;
    double latent = 0.0;
    double lambda = 0.0;
    double total = 0.0;
    bool warmup = false;
};

// Alternating generator / discriminator optimization of the prior. The
// generator side (encoder, decoder, codebook) minimizes
//   recon + lambda * gan_g + latent
// with lambda derived from last-layer gradient norms after the warm-up
// window, during which lambda is pinned to 0 and the discriminator is left
// untouched. Codes unused for a full epoch are re-seeded from recent encoder
// outputs.
class PriorTrainer {
public:
    // dataset_size drives the epoch length for dead-code revival; 0 means
    // "use cfg.dataset_train".
    PriorTrainer(PriorModel model, const RunConfig& cfg, int64_t dataset_size = 0);

    // batch: [B,C,H,W] float. Throws NumericError if any component goes
    // non-finite.
    PriorStepReport step(const torch::Tensor& batch);

    int64_t steps_done() const { return step_count_; }
    int64_t warmup_steps() const { return warmup_steps_; }
    PriorModel& model() { return model_; }

private:
    void reseed_dead_codes();

    PriorModel model_;
    RunConfig cfg_;
    std::unique_ptr<torch::optim::Adam> opt_g_;
    std::unique_ptr<torch::optim::Adam> opt_d_;
    int64_t step_count_ = 0;
    int64_t warmup_steps_ = 0;
    int64_t steps_per_epoch_ = 0;
    std::vector<int64_t> usage_;
    torch::Tensor last_e_;  // [N,D] detached encoder outputs, reseed pool
    Rng reseed_rng_;
};

// Full training loop: deterministic batch order, per-step loss CSV
// (prior_loss.csv), periodic prior_last_good.ckpt, final prior.ckpt plus
// codebook.bin under cfg.output_dir. Returns the trained model.
PriorModel train_prior(const std::vector<LayoutGrid>& train, const RunConfig& cfg);

// Rebuilds a prior from a checkpoint; refuses non-prior checkpoints and
// checkpoints whose recorded config hash differs from cfg's.
PriorModel load_prior(const std::string& path, const RunConfig& cfg);

}  // namespace mapprior
