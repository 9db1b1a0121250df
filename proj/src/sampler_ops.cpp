#include "mapprior/sampler_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mapprior/errors.hpp"

namespace mapprior {

void SamplingParams::validate() const {
    if (!(nucleus_p > 0.0 && nucleus_p <= 1.0)) {
        throw ConfigError("nucleus p must lie in (0, 1]");
    }
    if (!(temperature > 0.0)) throw ConfigError("sampling temperature must be positive");
    if (k_samples < 1) throw ConfigError("sample count must be at least 1");
}

std::vector<int64_t> guidance_ids(const TokenGrid& z) {
    return std::vector<int64_t>(z.indices.begin(), z.indices.end());
}

std::vector<int64_t> null_guidance(const SamplerModel& model) {
    return std::vector<int64_t>(static_cast<std::size_t>(model->n_tok), model->null_id());
}

namespace {

torch::Tensor ids_to_row(const std::vector<int64_t>& ids) {
    return torch::tensor(ids, torch::kInt64).unsqueeze(0);
}

torch::Tensor to_batched(const torch::Tensor& features) {
    if (!features.defined() || features.dim() != 3) return features;
    return features.unsqueeze(0);
}

void check_guidance(const SamplerModelImpl& m, const std::vector<int64_t>& guidance) {
    if (static_cast<int>(guidance.size()) != m.n_tok) {
        throw ShapeError("guidance length does not match the latent grid");
    }
    for (int64_t g : guidance) {
        if (g < 0 || g > m.null_id()) throw DataError("guidance token id out of range");
    }
}

// softmax of logits/temperature in double precision
std::vector<double> softmax_row(const torch::Tensor& logits_row, double temperature) {
    auto row = logits_row.detach().to(torch::kFloat64) / temperature;
    row = row - row.max();
    auto probs = row.exp();
    probs = probs / probs.sum();
    probs = probs.contiguous();
    const double* p = probs.data_ptr<double>();
    return std::vector<double>(p, p + probs.numel());
}

int draw_from(const std::vector<double>& probs, double u) {
    double cum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        cum += probs[i];
        if (u < cum) return static_cast<int>(i);
    }
    // guard against cum < 1 from rounding: last supported index
    for (std::size_t i = probs.size(); i-- > 0;) {
        if (probs[i] > 0.0) return static_cast<int>(i);
    }
    return 0;
}

}  // namespace

std::vector<double> next_token_dist(SamplerModel& model, const std::vector<int64_t>& guidance,
                                    const torch::Tensor& features,
                                    const std::vector<int32_t>& prefix, double temperature) {
    check_guidance(*model, guidance);
    const int n = model->n_tok;
    if (static_cast<int>(prefix.size()) >= n) {
        throw ContractError("prefix already covers every target position");
    }
    if (!(temperature > 0.0)) throw ConfigError("sampling temperature must be positive");

    torch::NoGradGuard ng;
    std::vector<int64_t> target(static_cast<std::size_t>(n), model->mask_id());
    target[0] = model->start_id();
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (i + 1 < static_cast<std::size_t>(n)) target[i + 1] = prefix[i];
    }
    auto logits = model->forward(ids_to_row(guidance), to_batched(features), ids_to_row(target));
    return softmax_row(logits[0][static_cast<int64_t>(prefix.size())], temperature);
}

std::vector<double> nucleus_filter(const std::vector<double>& probs, double p) {
    if (!(p > 0.0 && p <= 1.0)) throw ContractError("nucleus p must lie in (0, 1]");
    double sum = 0.0;
    for (double q : probs) {
        if (!(q >= 0.0) || !std::isfinite(q)) {
            throw ContractError("nucleus filter needs a probability vector");
        }
        sum += q;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw ContractError("nucleus filter input does not sum to 1");
    }

    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });

    std::vector<double> kept(probs.size(), 0.0);
    double cum = 0.0;
    for (std::size_t i : order) {
        kept[i] = probs[i];
        cum += probs[i];
        if (cum >= p - 1e-12) break;
    }
    for (double& q : kept) q /= cum;
    return kept;
}

std::vector<TokenGrid> sample_autoregressive_batch(SamplerModel& model,
                                                   const std::vector<int64_t>& guidance,
                                                   const torch::Tensor& features,
                                                   const SamplingParams& params, int k) {
    params.validate();
    check_guidance(*model, guidance);
    if (k < 1) throw ContractError("batch sample count must be at least 1");
    const int n = model->n_tok;

    torch::NoGradGuard ng;
    auto guid = ids_to_row(guidance).repeat({k, 1});
    torch::Tensor feats;
    if (features.defined()) {
        feats = features.dim() == 3 ? features.unsqueeze(0).repeat({k, 1, 1, 1})
                                    : features.repeat({k, 1, 1, 1});
    }
    auto target = torch::full({k, n}, model->mask_id(), torch::kInt64);
    target.index_put_({torch::indexing::Slice(), 0}, model->start_id());

    std::vector<Rng> rows;
    rows.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) rows.emplace_back(derive_seed(params.seed, static_cast<uint64_t>(i)));

    std::vector<TokenGrid> grids(static_cast<std::size_t>(k));
    for (auto& g : grids) {
        g.h = model->latent_h;
        g.w = model->latent_w;
        g.indices.resize(static_cast<std::size_t>(n));
    }

    for (int t = 0; t < n; ++t) {
        auto logits = model->forward(guid, feats, target);  // [k, n, K]
        for (int i = 0; i < k; ++i) {
            auto probs = softmax_row(logits[i][t], params.temperature);
            auto filtered = nucleus_filter(probs, params.nucleus_p);
            const int code = draw_from(filtered, rows[static_cast<std::size_t>(i)].uniform());
            grids[static_cast<std::size_t>(i)].indices[static_cast<std::size_t>(t)] =
                static_cast<int32_t>(code);
            if (t + 1 < n) target.index_put_({i, t + 1}, code);
        }
    }
    return grids;
}

std::vector<TokenGrid> sample_autoregressive_batch(SamplerModel& model, const TokenGrid& guidance,
                                                   const torch::Tensor& features,
                                                   const SamplingParams& params, int k) {
    return sample_autoregressive_batch(model, guidance_ids(guidance), features, params, k);
}

TokenGrid sample_autoregressive(SamplerModel& model, const std::vector<int64_t>& guidance,
                                const torch::Tensor& features, const SamplingParams& params) {
    return sample_autoregressive_batch(model, guidance, features, params, 1)[0];
}

TokenGrid sample_autoregressive(SamplerModel& model, const TokenGrid& guidance,
                                const torch::Tensor& features, const SamplingParams& params) {
    return sample_autoregressive_batch(model, guidance_ids(guidance), features, params, 1)[0];
}

TokenGrid sample_one_step(SamplerModel& model, const torch::Tensor& features,
                          const std::vector<int64_t>& guidance) {
    if (!model->one_step_head) {
        throw CapabilityError("this sampler was trained without the one-step head");
    }
    auto guid = guidance.empty() ? null_guidance(model) : guidance;
    check_guidance(*model, guid);
    const int n = model->n_tok;

    torch::NoGradGuard ng;
    auto target = torch::full({1, n}, model->mask_id(), torch::kInt64);
    auto logits = model->forward(ids_to_row(guid), to_batched(features), target);
    auto best = logits.argmax(-1)[0].contiguous();  // [n]

    TokenGrid out;
    out.h = model->latent_h;
    out.w = model->latent_w;
    out.indices.resize(static_cast<std::size_t>(n));
    const int64_t* bp = best.data_ptr<int64_t>();
    for (int i = 0; i < n; ++i) out.indices[static_cast<std::size_t>(i)] = static_cast<int32_t>(bp[i]);
    return out;
}

torch::Tensor gumbel_softmax(const torch::Tensor& logits, double tau, Rng& rng) {
    if (!(tau > 0.0)) throw ContractError("gumbel temperature must be positive");
    auto noise = torch::empty(logits.sizes(), torch::kFloat64);
    auto flat = noise.view(-1);
    double* np = flat.data_ptr<double>();
    for (int64_t i = 0; i < flat.numel(); ++i) {
        double u = rng.uniform();
        if (u <= 0.0) u = 0x1.0p-53;
        np[i] = -std::log(-std::log(u));
    }
    return torch::softmax((logits + noise.to(logits.scalar_type())) / tau, -1);
}

}  // namespace mapprior
