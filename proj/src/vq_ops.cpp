#include "mapprior/vq_ops.hpp"

#include <cmath>

#include "mapprior/errors.hpp"
#include "mapprior/tensor_bridge.hpp"

namespace mapprior {

void TokenGrid::validate(int codebook_size) const {
    if (h < 1 || w < 1) throw ShapeError("token grid dims must be positive");
    if (indices.size() != static_cast<std::size_t>(h) * w) {
        throw ShapeError("token grid index count does not match dims");
    }
    for (const int32_t idx : indices) {
        if (idx < 0 || idx >= codebook_size) throw DataError("token index out of codebook range");
    }
}

std::vector<TokenGrid> quantize_indices(const torch::Tensor& features,
                                        const torch::Tensor& codebook) {
    if (features.dim() != 4) throw ShapeError("quantize expects [B,D,h,w] features");
    if (codebook.dim() != 2) throw ShapeError("codebook must be K x D");
    if (features.size(1) != codebook.size(1)) {
        throw ShapeError("feature dim does not match codebook dim");
    }
    const int B = static_cast<int>(features.size(0));
    const int D = static_cast<int>(features.size(1));
    const int h = static_cast<int>(features.size(2));
    const int w = static_cast<int>(features.size(3));
    const int K = static_cast<int>(codebook.size(0));

    // [B,h,w,D] doubles for a clean per-position scan
    torch::Tensor f =
        features.detach().to(torch::kFloat64).permute({0, 2, 3, 1}).contiguous().cpu();
    torch::Tensor cb = codebook.detach().to(torch::kFloat64).contiguous().cpu();
    const double* fp = f.data_ptr<double>();
    const double* cp = cb.data_ptr<double>();

    std::vector<TokenGrid> out(B);
    for (int b = 0; b < B; ++b) {
        TokenGrid& tg = out[b];
        tg.h = h;
        tg.w = w;
        tg.indices.resize(static_cast<std::size_t>(h) * w);
        for (int t = 0; t < h * w; ++t) {
            const double* feat = fp + (static_cast<std::size_t>(b) * h * w + t) * D;
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int j = 0; j < K; ++j) {
                const double* code = cp + static_cast<std::size_t>(j) * D;
                double d = 0.0;
                for (int k = 0; k < D; ++k) {
                    const double diff = feat[k] - code[k];
                    d += diff * diff;
                }
                if (d < best_d) {  // strict: ties stay at the smaller index
                    best_d = d;
                    best = j;
                }
            }
            tg.indices[t] = best;
        }
    }
    return out;
}

torch::Tensor embed_tokens(const torch::Tensor& codebook, const TokenGrid& tokens) {
    tokens.validate(static_cast<int>(codebook.size(0)));
    torch::Tensor idx = torch::empty({static_cast<int64_t>(tokens.count())}, torch::kInt64);
    int64_t* ip = idx.data_ptr<int64_t>();
    for (std::size_t i = 0; i < tokens.count(); ++i) ip[i] = tokens.indices[i];
    // [h*w, D] -> [D, h, w]
    return codebook.index_select(0, idx)
        .reshape({tokens.h, tokens.w, codebook.size(1)})
        .permute({2, 0, 1});
}

std::pair<std::vector<TokenGrid>, torch::Tensor> quantize(const torch::Tensor& features,
                                                          const torch::Tensor& codebook) {
    std::vector<TokenGrid> grids = quantize_indices(features, codebook);
    std::vector<torch::Tensor> embedded;
    embedded.reserve(grids.size());
    for (const TokenGrid& g : grids) embedded.push_back(embed_tokens(codebook, g));
    return {std::move(grids), torch::stack(embedded, 0)};
}

torch::Tensor straight_through(const torch::Tensor& e, const torch::Tensor& z_q) {
    return e + (z_q - e).detach();
}

TokenGrid encode(PriorModel& model, const torch::Tensor& layout_chw) {
    if (layout_chw.dim() != 3) throw ShapeError("encode expects a [C,H,W] tensor");
    torch::NoGradGuard no_grad;
    torch::Tensor e = model->encoder(layout_chw.unsqueeze(0));
    return quantize_indices(e, model->codebook->weight)[0];
}

TokenGrid encode(PriorModel& model, const SoftLayout& layout) {
    return encode(model, to_tensor(layout));
}

TokenGrid encode(PriorModel& model, const LayoutGrid& layout) {
    return encode(model, to_tensor(layout));
}

torch::Tensor decode_tensor(PriorModel& model, const TokenGrid& tokens) {
    tokens.validate(model->codebook_size);
    torch::NoGradGuard no_grad;
    torch::Tensor z = embed_tokens(model->codebook->weight, tokens).unsqueeze(0);
    return model->decoder(z).squeeze(0);
}

SoftLayout decode(PriorModel& model, const TokenGrid& tokens) {
    return to_soft_layout(decode_tensor(model, tokens), model->channels, model->resolution);
}

torch::Tensor recon_loss(const torch::Tensor& target, const torch::Tensor& recon) {
    if (target.sizes() != recon.sizes()) throw ShapeError("reconstruction shape mismatch");
    return torch::mse_loss(recon, target);
}

namespace {
constexpr double kProbEps = 1e-6;

torch::Tensor clamped_prob(const torch::Tensor& logits) {
    return torch::sigmoid(logits).clamp(kProbEps, 1.0 - kProbEps);
}
}  // namespace

GanLosses gan_losses_from_logits(const torch::Tensor& real_logits,
                                 const torch::Tensor& fake_logits) {
    torch::Tensor p_real = clamped_prob(real_logits);
    torch::Tensor p_fake = clamped_prob(fake_logits);
    GanLosses out;
    out.d_loss = -(torch::log(p_real).mean() + torch::log(1.0 - p_fake).mean());
    out.g_loss = -torch::log(p_fake).mean();
    return out;
}

GanLosses gan_losses(const torch::Tensor& real, const torch::Tensor& fake,
                     PatchDiscriminator& disc) {
    if (real.sizes() != fake.sizes()) throw ShapeError("discriminator input shape mismatch");
    return gan_losses_from_logits(disc(real), disc(fake));
}

torch::Tensor generator_loss(const torch::Tensor& fake, PatchDiscriminator& disc) {
    return -torch::log(clamped_prob(disc(fake))).mean();
}

double adaptive_gan_weight(double g_rec, double g_gan, double sigma) {
    if (g_rec < 0 || g_gan < 0) throw ContractError("gradient norms must be non-negative");
    if (sigma <= 0) throw ContractError("stabilizer sigma must be positive");
    const double lambda = g_rec / (g_gan + sigma);
    return std::clamp(lambda, 0.0, 1e4);
}

double last_layer_grad_norm(const torch::Tensor& loss, const torch::Tensor& last_layer_weight) {
    auto grads = torch::autograd::grad({loss}, {last_layer_weight},
                                       /*grad_outputs=*/{}, /*retain_graph=*/true,
                                       /*create_graph=*/false, /*allow_unused=*/false);
    return grads[0].norm().item<double>();
}

torch::Tensor latent_loss(const torch::Tensor& z_q, const torch::Tensor& e) {
    if (z_q.sizes() != e.sizes()) throw ShapeError("latent loss shape mismatch");
    return torch::mse_loss(z_q, e.detach()) + torch::mse_loss(z_q.detach(), e);
}

}  // namespace mapprior
