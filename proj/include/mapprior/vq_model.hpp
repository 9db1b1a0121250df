#pragma once

#include <torch/torch.h>

#include <vector>

#include "mapprior/config.hpp"

namespace mapprior {

inline int norm_groups(int channels) { return channels % 32 == 0 ? 32 : channels; }

inline torch::Tensor swish(const torch::Tensor& x) { return x * torch::sigmoid(x); }

struct ResBlockImpl : torch::nn::Module {
    ResBlockImpl(int in_ch, int out_ch);
    torch::Tensor forward(torch::Tensor x);

    torch::nn::GroupNorm norm1{nullptr}, norm2{nullptr};
    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
    torch::nn::Conv2d skip{nullptr};  // 1x1 when channel count changes
};
TORCH_MODULE(ResBlock);

// Single-head self-attention over spatial positions (used at the bottleneck).
struct AttnBlockImpl : torch::nn::Module {
    explicit AttnBlockImpl(int ch);
    torch::Tensor forward(torch::Tensor x);

    torch::nn::GroupNorm norm{nullptr};
    torch::nn::Conv2d q{nullptr}, k{nullptr}, v{nullptr}, proj{nullptr};
};
TORCH_MODULE(AttnBlock);

// Stride-2 conv with (0,1,0,1) padding, so odd extents floor-halve (200 -> 100
// -> 50 -> 25 -> 12 under four applications).
struct DownsampleImpl : torch::nn::Module {
    explicit DownsampleImpl(int ch);
    torch::Tensor forward(torch::Tensor x);

    torch::nn::Conv2d conv{nullptr};
};
TORCH_MODULE(Downsample);

// Nearest-neighbor resize to an explicit target size followed by a 3x3 conv;
// exact mirror of the floor-halving downsample chain.
struct UpsampleImpl : torch::nn::Module {
    UpsampleImpl(int ch, int target_h, int target_w);
    torch::Tensor forward(torch::Tensor x);

    torch::nn::Conv2d conv{nullptr};
    int target_h, target_w;
};
TORCH_MODULE(Upsample);

struct EncoderImpl : torch::nn::Module {
    explicit EncoderImpl(const RunConfig& cfg);
    torch::Tensor forward(torch::Tensor x);  // [B,C,H,W] -> [B,D,h,w]

    torch::nn::Conv2d stem{nullptr}, out{nullptr};
    torch::nn::GroupNorm out_norm{nullptr};
    torch::nn::ModuleList levels;  // ResBlocks and Downsamples interleaved
    ResBlock mid1{nullptr}, mid2{nullptr};
    AttnBlock mid_attn{nullptr};
};
TORCH_MODULE(Encoder);

struct DecoderImpl : torch::nn::Module {
    explicit DecoderImpl(const RunConfig& cfg);
    torch::Tensor forward(torch::Tensor z);  // [B,D,h,w] -> [B,C,H,W] in [0,1]

    torch::nn::Conv2d stem{nullptr}, out{nullptr};
    torch::nn::GroupNorm out_norm{nullptr};
    torch::nn::ModuleList levels;
    ResBlock mid1{nullptr}, mid2{nullptr};
    AttnBlock mid_attn{nullptr};
};
TORCH_MODULE(Decoder);

// 3-layer patch discriminator (pix2pix layout): strided convs, batch norm on
// the inner layers, leaky ReLU, 1-channel logit map output.
struct PatchDiscriminatorImpl : torch::nn::Module {
    PatchDiscriminatorImpl(int in_ch, int base_ch);
    torch::Tensor forward(torch::Tensor x);  // logits [B,1,h',w']

    torch::nn::Sequential net;
};
TORCH_MODULE(PatchDiscriminator);

struct PriorModelImpl : torch::nn::Module {
    explicit PriorModelImpl(const RunConfig& cfg);

    Encoder encoder{nullptr};
    Decoder decoder{nullptr};
    PatchDiscriminator disc{nullptr};
    torch::nn::Embedding codebook{nullptr};  // weight is the K x D code matrix

    int codebook_size;
    int codebook_dim;
    int latent_h;
    int latent_w;
    std::vector<std::string> channels;
    double resolution;
};
TORCH_MODULE(PriorModel);

}  // namespace mapprior
