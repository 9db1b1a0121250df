#include "mapprior/vq_model.hpp"

#include <cmath>

namespace mapprior {

namespace {


}  // namespace

ResBlockImpl::ResBlockImpl(int in_ch, int out_ch) {
    norm1 = register_module("norm1", torch::nn::GroupNorm(norm_groups(in_ch), in_ch));
    conv1 = register_module(
        "conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_ch, out_ch, 3).padding(1)));
    norm2 = register_module("norm2", torch::nn::GroupNorm(norm_groups(out_ch), out_ch));
    conv2 = register_module(
        "conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(out_ch, out_ch, 3).padding(1)));
    if (in_ch != out_ch) {
        skip = register_module("skip", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_ch, out_ch, 1)));
    }
}

torch::Tensor ResBlockImpl::forward(torch::Tensor x) {
    torch::Tensor h = conv1(swish(norm1(x)));
    h = conv2(swish(norm2(h)));
    return (skip ? skip(x) : x) + h;
}

AttnBlockImpl::AttnBlockImpl(int ch) {
    norm = register_module("norm", torch::nn::GroupNorm(norm_groups(ch), ch));
    q = register_module("q", torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, ch, 1)));
    k = register_module("k", torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, ch, 1)));
    v = register_module("v", torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, ch, 1)));
    proj = register_module("proj", torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, ch, 1)));
}

torch::Tensor AttnBlockImpl::forward(torch::Tensor x) {
    const auto B = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
    torch::Tensor h = norm(x);
    torch::Tensor qq = q(h).reshape({B, C, H * W});
    torch::Tensor kk = k(h).reshape({B, C, H * W});
    torch::Tensor vv = v(h).reshape({B, C, H * W});
    torch::Tensor attn = torch::bmm(qq.transpose(1, 2), kk) / std::sqrt(static_cast<double>(C));
    attn = torch::softmax(attn, 2);
    torch::Tensor out = torch::bmm(vv, attn.transpose(1, 2)).reshape({B, C, H, W});
    return x + proj(out);
}

DownsampleImpl::DownsampleImpl(int ch) {
    conv = register_module("conv",
                           torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, ch, 3).stride(2)));
}

torch::Tensor DownsampleImpl::forward(torch::Tensor x) {
    x = torch::nn::functional::pad(x, torch::nn::functional::PadFuncOptions({0, 1, 0, 1}));
    return conv(x);
}

UpsampleImpl::UpsampleImpl(int ch, int th, int tw) : target_h(th), target_w(tw) {
    conv = register_module(
        "conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, ch, 3).padding(1)));
}

torch::Tensor UpsampleImpl::forward(torch::Tensor x) {
    x = torch::nn::functional::interpolate(
        x, torch::nn::functional::InterpolateFuncOptions()
               .size(std::vector<int64_t>{target_h, target_w})
               .mode(torch::kNearest));
    return conv(x);
}

EncoderImpl::EncoderImpl(const RunConfig& cfg) {
    const int C = static_cast<int>(cfg.channels.size());
    stem = register_module(
        "stem",
        torch::nn::Conv2d(torch::nn::Conv2dOptions(C, cfg.enc_channels.front(), 3).padding(1)));

    int prev = cfg.enc_channels.front();
    for (std::size_t i = 0; i < cfg.enc_channels.size(); ++i) {
        const int ch = cfg.enc_channels[i];
        for (int r = 0; r < cfg.enc_resblocks; ++r) {
            levels->push_back(ResBlock(r == 0 ? prev : ch, ch));
        }
        if (static_cast<int>(i) < cfg.enc_downsamples) levels->push_back(Downsample(ch));
        prev = ch;
    }
    register_module("levels", levels);

    mid1 = register_module("mid1", ResBlock(prev, prev));
    mid_attn = register_module("mid_attn", AttnBlock(prev));
    mid2 = register_module("mid2", ResBlock(prev, prev));
    out_norm = register_module("out_norm", torch::nn::GroupNorm(norm_groups(prev), prev));
    out = register_module(
        "out", torch::nn::Conv2d(torch::nn::Conv2dOptions(prev, cfg.codebook_dim, 3).padding(1)));
}

torch::Tensor EncoderImpl::forward(torch::Tensor x) {
    x = stem(x);
    for (auto& m : *levels) {
        if (auto* r = m->as<ResBlock>()) x = r->forward(x);
        else x = m->as<Downsample>()->forward(x);
    }
    x = mid2(mid_attn(mid1(x)));
    return out(swish(out_norm(x)));
}

DecoderImpl::DecoderImpl(const RunConfig& cfg) {
    // encoder size chain, e.g. 200 -> 100 -> 50 -> 25 -> 12; the decoder
    // replays it in reverse with explicit interpolation targets
    std::vector<int> hs{cfg.grid_h}, ws{cfg.grid_w};
    for (int i = 0; i < cfg.enc_downsamples; ++i) {
        hs.push_back(hs.back() / 2);
        ws.push_back(ws.back() / 2);
    }

    const int C = static_cast<int>(cfg.channels.size());
    const int top = cfg.enc_channels.back();
    stem = register_module(
        "stem", torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg.codebook_dim, top, 3).padding(1)));
    mid1 = register_module("mid1", ResBlock(top, top));
    mid_attn = register_module("mid_attn", AttnBlock(top));
    mid2 = register_module("mid2", ResBlock(top, top));

    int prev = top;
    int up_level = cfg.enc_downsamples;  // index into the size chain
    for (int i = static_cast<int>(cfg.enc_channels.size()) - 1; i >= 0; --i) {
        const int ch = cfg.enc_channels[i];
        for (int r = 0; r < cfg.enc_resblocks; ++r) {
            levels->push_back(ResBlock(r == 0 ? prev : ch, ch));
        }
        if (i < cfg.enc_downsamples) {
            --up_level;
            levels->push_back(Upsample(ch, hs[up_level], ws[up_level]));
        }
        prev = ch;
    }
    register_module("levels", levels);

    out_norm = register_module("out_norm", torch::nn::GroupNorm(norm_groups(prev), prev));
    out = register_module("out",
                          torch::nn::Conv2d(torch::nn::Conv2dOptions(prev, C, 3).padding(1)));
}

torch::Tensor DecoderImpl::forward(torch::Tensor z) {
    torch::Tensor x = stem(z);
    x = mid2(mid_attn(mid1(x)));
    for (auto& m : *levels) {
        if (auto* r = m->as<ResBlock>()) x = r->forward(x);
        else x = m->as<Upsample>()->forward(x);
    }
    return torch::sigmoid(out(swish(out_norm(x))));
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(int in_ch, int base_ch) {
    using torch::nn::BatchNorm2d;
    using torch::nn::Conv2d;
    using torch::nn::Conv2dOptions;
    using torch::nn::LeakyReLU;
    using torch::nn::LeakyReLUOptions;

    net->push_back(Conv2d(Conv2dOptions(in_ch, base_ch, 4).stride(2).padding(1)));
    net->push_back(LeakyReLU(LeakyReLUOptions().negative_slope(0.2)));
    int prev = base_ch;
    for (int layer = 0; layer < 3; ++layer) {
        const int ch = base_ch * (1 << std::min(layer + 1, 3));
        const int stride = layer < 2 ? 2 : 1;
        net->push_back(Conv2d(Conv2dOptions(prev, ch, 4).stride(stride).padding(1).bias(false)));
        net->push_back(BatchNorm2d(ch));
        net->push_back(LeakyReLU(LeakyReLUOptions().negative_slope(0.2)));
        prev = ch;
    }
    net->push_back(Conv2d(Conv2dOptions(prev, 1, 4).stride(1).padding(1)));
    register_module("net", net);
}

torch::Tensor PatchDiscriminatorImpl::forward(torch::Tensor x) { return net->forward(x); }

PriorModelImpl::PriorModelImpl(const RunConfig& cfg)
    : codebook_size(cfg.codebook_size),
      codebook_dim(cfg.codebook_dim),
      latent_h(cfg.latent_h),
      latent_w(cfg.latent_w),
      channels(cfg.channels),
      resolution(cfg.resolution) {
    encoder = register_module("encoder", Encoder(cfg));
    decoder = register_module("decoder", Decoder(cfg));
    disc = register_module("disc",
                           PatchDiscriminator(static_cast<int>(cfg.channels.size()), cfg.disc_channels));
    codebook = register_module("codebook",
                               torch::nn::Embedding(cfg.codebook_size, cfg.codebook_dim));
    // small-uniform init keeps early quantization residuals well-scaled
    torch::NoGradGuard no_grad;
    const double b = 1.0 / cfg.codebook_size;
    codebook->weight.uniform_(-b, b);
}

}  // namespace mapprior
