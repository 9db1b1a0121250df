#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mapprior/config.hpp"
#include "mapprior/corruption.hpp"
#include "mapprior/layout.hpp"
#include "mapprior/sampler_model.hpp"
#include "mapprior/sampler_ops.hpp"
#include "mapprior/vq_model.hpp"

namespace mapprior {

// Desk-scale stand-in for a perception backbone: three convolutions with a
// sigmoid head, mapping sensor features to per-class probabilities.
struct PerceptionNetImpl : torch::nn::Module {
    PerceptionNetImpl(int in_channels, int out_channels, int hidden = 32);

    torch::Tensor forward(const torch::Tensor& x);  // [B,Cin,H,W] -> [B,Cout,H,W] in (0,1)

    torch::nn::Conv2d c1{nullptr}, c2{nullptr}, c3{nullptr};
    bool trained = false;  // prediction before any training step is refused
};
TORCH_MODULE(PerceptionNet);

// Mean binary cross-entropy of probabilities against 0/1 targets; one_sided
// drops the (1 - y) term.
torch::Tensor perception_bce(const torch::Tensor& y_gt, const torch::Tensor& y_prob,
                             bool one_sided = false);

// One optimizer step on the net; returns the loss value and marks the net
// trained.
double train_perception_step(PerceptionNet& net, torch::optim::Optimizer& opt,
                             const torch::Tensor& x, const torch::Tensor& y_gt,
                             bool one_sided = false);

// Initial layout estimate + sensor features. Mode comes from cfg.infer_mode:
// "corruptor" replays the layout corruptor at the given seed; "toy-net" runs
// a trained PerceptionNet on the corruptor's sensor features.
std::pair<SoftLayout, PseudoSensor> predict_initial(const LayoutGrid& gt, const RunConfig& cfg,
                                                    uint64_t seed,
                                                    PerceptionNet net = nullptr);

// K refined layouts plus their per-cell aggregates.
struct SampleBundle {
    std::vector<LayoutGrid> samples;  // binarized refined outputs
    SoftLayout confidence;            // per-cell mean over samples
    SoftLayout uncertainty;           // per-cell population variance
    LayoutGrid final;                 // confidence thresholded at 0.5

    // K >= 1, shared shapes, confidence in [0,1], uncertainty in [0,0.25],
    // final == binarize(confidence, 0.5).
    void validate() const;
};

// Encodes the noisy estimate into guidance tokens, draws params.k_samples
// autoregressive completions, decodes and binarizes each, and aggregates.
// Deterministic given (inputs, params.seed).
SampleBundle refine(const SoftLayout& noisy, const PseudoSensor& x, PriorModel& prior,
                    SamplerModel& sampler, const RunConfig& cfg, const SamplingParams& params);

// Single-forward variant: parallel token prediction, one decoded layout, no
// uncertainty map.
SoftLayout refine_one_step(const SoftLayout& noisy, const PseudoSensor& x, PriorModel& prior,
                           SamplerModel& sampler, const RunConfig& cfg);

// Bundle directory: sample_<k>.bml, confidence.bml, uncertainty.bml,
// final.bml, meta.json (sample count plus caller-provided strings: seeds,
// sampling params, checkpoint hashes).
void save_bundle(const std::filesystem::path& dir, const SampleBundle& bundle,
                 const std::map<std::string, std::string>& meta);
SampleBundle load_bundle(const std::filesystem::path& dir);

}  // namespace mapprior
