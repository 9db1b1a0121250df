#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "mapprior/rng.hpp"
#include "mapprior/sampler_model.hpp"
#include "mapprior/vq_ops.hpp"

namespace mapprior {

struct SamplingParams {
    double nucleus_p = 0.9;
    double temperature = 1.0;
    int k_samples = 15;
    uint64_t seed = 0;

    void validate() const;  // p in (0,1], temperature > 0, k >= 1
};

// Guidance token ids for the sequence: a quantized grid row-major, or the
// learned null row everywhere (the unconditional case).
std::vector<int64_t> guidance_ids(const TokenGrid& z);
std::vector<int64_t> null_guidance(const SamplerModel& model);

// Distribution over the K codes at target position prefix.size(), computed
// from one transformer forward (future target slots carry mask tokens, which
// the causal mask hides). Returned in double precision, normalized to sum 1.
// guidance ids lie in [0, K] where K selects the null row.
std::vector<double> next_token_dist(SamplerModel& model, const std::vector<int64_t>& guidance,
                                    const torch::Tensor& features,
                                    const std::vector<int32_t>& prefix,
                                    double temperature = 1.0);

// Nucleus (top-p) truncation: keep the smallest descending-sorted prefix
// whose cumulative mass reaches p (ties keep the smaller index first;
// comparisons carry 1e-12 slack for accumulated rounding), then renormalize.
std::vector<double> nucleus_filter(const std::vector<double>& probs, double p);

// Draws h*w tokens sequentially, each from the nucleus-filtered next-token
// distribution. Deterministic per params.seed; equals row 0 of the batch
// variant.
TokenGrid sample_autoregressive(SamplerModel& model, const std::vector<int64_t>& guidance,
                                const torch::Tensor& features, const SamplingParams& params);
TokenGrid sample_autoregressive(SamplerModel& model, const TokenGrid& guidance,
                                const torch::Tensor& features, const SamplingParams& params);

// k rows sampled in lockstep with one batched forward per position; row i
// draws from an independent stream derived as (seed, i).
std::vector<TokenGrid> sample_autoregressive_batch(SamplerModel& model,
                                                   const std::vector<int64_t>& guidance,
                                                   const torch::Tensor& features,
                                                   const SamplingParams& params, int k);
std::vector<TokenGrid> sample_autoregressive_batch(SamplerModel& model, const TokenGrid& guidance,
                                                   const torch::Tensor& features,
                                                   const SamplingParams& params, int k);

// Parallel prediction: every target slot carries the learned mask token, one
// forward, per-position arg-max. guidance may be empty (all-null row, the
// unconditional case). Throws CapabilityError when the model was trained
// without the one-step head.
TokenGrid sample_one_step(SamplerModel& model, const torch::Tensor& features,
                          const std::vector<int64_t>& guidance = {});

// Relaxed one-hot over the last dimension: softmax((logits + g)/tau) with
// g = -log(-log(u)) drawn from rng. Differentiable in logits.
torch::Tensor gumbel_softmax(const torch::Tensor& logits, double tau, Rng& rng);

}  // namespace mapprior
