#pragma once

#include <torch/torch.h>

#include <cstdint>

#include "mapprior/config.hpp"
#include "mapprior/vq_model.hpp"

namespace mapprior {

// One multi-head self-attention layer taking an explicit boolean visibility
// mask (true = may attend).
struct SelfAttentionImpl : torch::nn::Module {
    SelfAttentionImpl(int n_embd, int n_head);
    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& mask);

    torch::nn::Linear qkv{nullptr}, proj{nullptr};
    int n_head;
};
TORCH_MODULE(SelfAttention);

struct TransformerBlockImpl : torch::nn::Module {
    TransformerBlockImpl(int n_embd, int n_head);
    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& mask);

    torch::nn::LayerNorm ln1{nullptr}, ln2{nullptr};
    SelfAttention attn{nullptr};
    torch::nn::Linear fc{nullptr}, out{nullptr};
};
TORCH_MODULE(TransformerBlock);

// Convolutional stack mirroring the prior encoder's downsampling chain; maps
// sensor features onto one embedding vector per latent-grid cell.
struct FeatureExtractorImpl : torch::nn::Module {
    explicit FeatureExtractorImpl(const RunConfig& cfg);
    torch::Tensor forward(const torch::Tensor& x);  // [B,Cf,H,W] -> [B, h*w, n_embd]

    torch::nn::Conv2d stem{nullptr}, out{nullptr};
    torch::nn::GroupNorm out_norm{nullptr};
    torch::nn::ModuleList levels;
    int in_channels;
};
TORCH_MODULE(FeatureExtractor);

// Latent transformer over the sequence
//   [feature tokens][guidance tokens][start + shifted target tokens]
// Guidance and target tokens share one embedding table with three reserved
// rows past the codebook: null-guidance, start, and mask (parallel
// prediction). The causal mask constrains attention only within the target
// segment; conditioning rows see conditioning rows alone.
struct SamplerModelImpl : torch::nn::Module {
    explicit SamplerModelImpl(const RunConfig& cfg);

    // guidance: [B, n_tok] int64 with values in [0, K] (K = null row).
    // features: [B, Cf, H, W]; must be defined iff the model conditions on
    // features. target_in: [B, n_tok] int64, may contain start/mask ids.
    // Returns logits over the K codes at every target slot: [B, n_tok, K].
    torch::Tensor forward(const torch::Tensor& guidance, const torch::Tensor& features,
                          const torch::Tensor& target_in);

    int64_t forward_count() const { return forward_count_; }
    void reset_forward_count() { forward_count_ = 0; }

    int64_t null_id() const { return codebook_size; }
    int64_t start_id() const { return codebook_size + 1; }
    int64_t mask_id() const { return codebook_size + 2; }

    torch::nn::Embedding tok_embed{nullptr};
    torch::Tensor pos_embed;  // parameter [tf_block, n_embd]
    FeatureExtractor extractor{nullptr};  // null when not conditioning
    torch::nn::ModuleList blocks;
    torch::nn::LayerNorm ln_f{nullptr};
    torch::nn::Linear head{nullptr};

    int codebook_size;
    int latent_h;
    int latent_w;
    int n_feat;   // 0 when feature conditioning is off
    int n_tok;    // latent_h * latent_w
    bool one_step_head;

private:
    torch::Tensor mask_;  // [n_seq, n_seq] bool, rebuilt on construction
    int64_t forward_count_ = 0;
};
TORCH_MODULE(SamplerModel);

}  // namespace mapprior
