#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <utility>
#include <vector>

#include "mapprior/layout.hpp"
#include "mapprior/vq_model.hpp"

namespace mapprior {

// Discrete latent: codebook indices on the latent grid, row-major.
struct TokenGrid {
    int h = 0;
    int w = 0;
    std::vector<int32_t> indices;

    int32_t at(int r, int c) const { return indices[static_cast<std::size_t>(r) * w + c]; }
    int32_t& at(int r, int c) { return indices[static_cast<std::size_t>(r) * w + c]; }
    std::size_t count() const { return indices.size(); }

    void validate(int codebook_size) const;  // size == h*w, all indices in [0, K)

    bool operator==(const TokenGrid& other) const = default;
};

// Nearest-code assignment. Distances are evaluated in double precision with a
// first-minimum scan, so ties resolve to the smallest index and the result
// matches an exhaustive search exactly. features: [B,D,h,w]; codebook: [K,D].
std::vector<TokenGrid> quantize_indices(const torch::Tensor& features,
                                        const torch::Tensor& codebook);

// Embeds a token grid back to feature space: [D,h,w] (differentiable w.r.t.
// the codebook).
torch::Tensor embed_tokens(const torch::Tensor& codebook, const TokenGrid& tokens);

// quantize = indices + embedded vectors, batched. Returns z_q as [B,D,h,w].
std::pair<std::vector<TokenGrid>, torch::Tensor> quantize(const torch::Tensor& features,
                                                          const torch::Tensor& codebook);

// Gradient bypass for the discretization step: forward value z_q, backward
// gradient flows to e.
torch::Tensor straight_through(const torch::Tensor& e, const torch::Tensor& z_q);

TokenGrid encode(PriorModel& model, const torch::Tensor& layout_chw);
TokenGrid encode(PriorModel& model, const SoftLayout& layout);
TokenGrid encode(PriorModel& model, const LayoutGrid& layout);

SoftLayout decode(PriorModel& model, const TokenGrid& tokens);
torch::Tensor decode_tensor(PriorModel& model, const TokenGrid& tokens);  // [C,H,W]

// Mean squared error over every cell (mean reduction).
torch::Tensor recon_loss(const torch::Tensor& target, const torch::Tensor& recon);

struct GanLosses {
    torch::Tensor d_loss;  // -[log D(real) + log(1 - D(fake))]
    torch::Tensor g_loss;  // -log D(fake)
};

// Probabilities are sigmoid(discriminator logits) clamped to [1e-6, 1-1e-6]
// and averaged over the patch map.
GanLosses gan_losses_from_logits(const torch::Tensor& real_logits,
                                 const torch::Tensor& fake_logits);
GanLosses gan_losses(const torch::Tensor& real, const torch::Tensor& fake,
                     PatchDiscriminator& disc);

// Generator-side term alone (one discriminator forward, no real pass).
torch::Tensor generator_loss(const torch::Tensor& fake, PatchDiscriminator& disc);

// lambda = g_rec / (g_gan + sigma), clamped to [0, 1e4].
double adaptive_gan_weight(double g_rec, double g_gan, double sigma);

// L2 norm of d loss / d last_layer_weight, leaving the graph alive.
double last_layer_grad_norm(const torch::Tensor& loss, const torch::Tensor& last_layer_weight);

// |sg[e] - z_q|^2 + |e - sg[z_q]|^2, mean reduction per term; the forward
// value equals twice the squared quantization residual.
torch::Tensor latent_loss(const torch::Tensor& z_q, const torch::Tensor& e);

}  // namespace mapprior
