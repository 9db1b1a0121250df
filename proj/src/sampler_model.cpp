#include "mapprior/sampler_model.hpp"

#include <cmath>

#include "mapprior/errors.hpp"

namespace mapprior {

SelfAttentionImpl::SelfAttentionImpl(int n_embd, int n_head_) : n_head(n_head_) {
    qkv = register_module("qkv", torch::nn::Linear(n_embd, 3 * n_embd));
    proj = register_module("proj", torch::nn::Linear(n_embd, n_embd));
}

torch::Tensor SelfAttentionImpl::forward(const torch::Tensor& x, const torch::Tensor& mask) {
    const auto B = x.size(0), T = x.size(1), C = x.size(2);
    const auto hd = C / n_head;
    auto chunks = qkv(x).chunk(3, /*dim=*/2);
    auto q = chunks[0].view({B, T, n_head, hd}).transpose(1, 2);
    auto k = chunks[1].view({B, T, n_head, hd}).transpose(1, 2);
    auto v = chunks[2].view({B, T, n_head, hd}).transpose(1, 2);

    auto att = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(hd));
    att = att.masked_fill(mask.logical_not(), -std::numeric_limits<float>::infinity());
    att = torch::softmax(att, -1);
    auto y = torch::matmul(att, v).transpose(1, 2).contiguous().view({B, T, C});
    return proj(y);
}

TransformerBlockImpl::TransformerBlockImpl(int n_embd, int n_head) {
    ln1 = register_module("ln1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({n_embd})));
    ln2 = register_module("ln2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({n_embd})));
    attn = register_module("attn", SelfAttention(n_embd, n_head));
    fc = register_module("fc", torch::nn::Linear(n_embd, 4 * n_embd));
    out = register_module("out", torch::nn::Linear(4 * n_embd, n_embd));
}

torch::Tensor TransformerBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& mask) {
    auto h = x + attn(ln1(x), mask);
    return h + out(torch::gelu(fc(ln2(h))));
}

FeatureExtractorImpl::FeatureExtractorImpl(const RunConfig& cfg) {
    in_channels = static_cast<int>(cfg.channels.size()) + 2;  // layout + range + noise planes
    stem = register_module("stem",
                            torch::nn::Conv2d(torch::nn::Conv2dOptions(
                                in_channels, cfg.enc_channels.front(), 3).padding(1)));
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
    out_norm = register_module("out_norm", torch::nn::GroupNorm(norm_groups(prev), prev));
    out = register_module(
        "out", torch::nn::Conv2d(torch::nn::Conv2dOptions(prev, cfg.tf_embd, 3).padding(1)));
}

torch::Tensor FeatureExtractorImpl::forward(const torch::Tensor& x) {
    auto h = stem(x);
    for (auto& m : *levels) {
        if (auto* r = m->as<ResBlock>()) h = r->forward(h);
        else h = m->as<Downsample>()->forward(h);
    }
    h = out(swish(out_norm(h)));                       // [B, n_embd, h, w]
    return h.flatten(2).transpose(1, 2).contiguous();  // [B, h*w, n_embd]
}

SamplerModelImpl::SamplerModelImpl(const RunConfig& cfg) {
    codebook_size = cfg.codebook_size;
    latent_h = cfg.latent_h;
    latent_w = cfg.latent_w;
    n_tok = latent_h * latent_w;
    n_feat = cfg.condition_on_features ? n_tok : 0;
    one_step_head = cfg.one_step_head;

    tok_embed = register_module(
        "tok_embed", torch::nn::Embedding(codebook_size + 3, cfg.tf_embd));
    pos_embed = register_parameter("pos_embed", torch::zeros({cfg.tf_block, cfg.tf_embd}));
    {
        torch::NoGradGuard ng;
        tok_embed->weight.normal_(0.0, 0.02);
        pos_embed.normal_(0.0, 0.02);
    }
    if (cfg.condition_on_features) {
        extractor = register_module("extractor", FeatureExtractor(cfg));
    }
    for (int i = 0; i < cfg.tf_layers; ++i) {
        blocks->push_back(TransformerBlock(cfg.tf_embd, cfg.tf_heads));
    }
    register_module("blocks", blocks);
    ln_f = register_module(
        "ln_f", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg.tf_embd})));
    head = register_module(
        "head",
        torch::nn::Linear(torch::nn::LinearOptions(cfg.tf_embd, codebook_size).bias(false)));

    // Visibility: conditioning rows attend to conditioning columns only;
    // target row i additionally sees target columns <= i.
    const int n_cond = n_feat + n_tok;
    const int n_seq = n_cond + n_tok;
    mask_ = torch::zeros({n_seq, n_seq}, torch::kBool);
    auto m = mask_.accessor<bool, 2>();
    for (int i = 0; i < n_seq; ++i) {
        for (int j = 0; j < n_cond; ++j) m[i][j] = true;
        if (i >= n_cond) {
            for (int j = n_cond; j <= i; ++j) m[i][j] = true;
        }
    }
}

torch::Tensor SamplerModelImpl::forward(const torch::Tensor& guidance,
                                        const torch::Tensor& features,
                                        const torch::Tensor& target_in) {
    if (guidance.dim() != 2 || guidance.size(1) != n_tok) {
        throw ShapeError("guidance tokens must be [B, n_tok]");
    }
    if (target_in.dim() != 2 || target_in.size(1) != n_tok ||
        target_in.size(0) != guidance.size(0)) {
        throw ShapeError("target tokens must be [B, n_tok] matching guidance");
    }
    std::vector<torch::Tensor> segments;
    if (n_feat > 0) {
        if (!features.defined()) {
            throw ContractError("model conditions on features but none were given");
        }
        auto ft = extractor(features);
        if (ft.size(1) != n_feat) throw ShapeError("feature tokens do not match the latent grid");
        segments.push_back(ft);
    } else if (features.defined()) {
        throw ContractError("model was built without feature conditioning");
    }
    segments.push_back(tok_embed(guidance));
    segments.push_back(tok_embed(target_in));

    auto x = torch::cat(segments, 1);
    const auto T = x.size(1);
    x = x + pos_embed.slice(0, 0, T).unsqueeze(0);
    for (auto& b : *blocks) x = b->as<TransformerBlock>()->forward(x, mask_);
    x = ln_f(x);
    forward_count_++;
    return head(x.slice(1, n_feat + n_tok, T));
}

}  // namespace mapprior
