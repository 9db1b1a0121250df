#include "mapprior/sampler_train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mapprior/checkpoint.hpp"
#include "mapprior/errors.hpp"
#include "mapprior/sampler_ops.hpp"
#include "mapprior/tensor_bridge.hpp"
#include "mapprior/vq_ops.hpp"

namespace mapprior {

torch::Tensor token_cross_entropy(const torch::Tensor& logits, const torch::Tensor& targets) {
    if (logits.dim() != 3 || targets.dim() != 2 || logits.size(0) != targets.size(0) ||
        logits.size(1) != targets.size(1)) {
        throw ShapeError("cross-entropy expects [B,n,K] logits and [B,n] targets");
    }
    return torch::nn::functional::cross_entropy(logits.reshape({-1, logits.size(2)}),
                                                targets.reshape(-1));
}

SamplerTrainer::SamplerTrainer(SamplerModel model, PriorModel prior, const RunConfig& cfg)
    : model_(std::move(model)),
      prior_(std::move(prior)),
      cfg_(cfg),
      drop_rng_(derive_seed(cfg.seed, 21)),
      gumbel_rng_(derive_seed(cfg.seed, 22)) {
    for (auto& p : prior_->parameters()) p.requires_grad_(false);
    prior_->eval();
    opt_ = std::make_unique<torch::optim::Adam>(model_->parameters(),
                                                torch::optim::AdamOptions(cfg_.lr_sampler));
}

SamplerStepReport SamplerTrainer::step(const torch::Tensor& y_gt, const torch::Tensor& features,
                                       const torch::Tensor& gt_tokens,
                                       const torch::Tensor& guid_tokens) {
    const auto B = gt_tokens.size(0);
    const auto n = gt_tokens.size(1);
    if (n != model_->n_tok) throw ShapeError("token grid does not match the model");
    model_->train();

    // guidance dropout trains the null row
    auto guid = guid_tokens.clone();
    for (int64_t b = 0; b < B; ++b) {
        if (drop_rng_.bernoulli(cfg_.guidance_dropout)) {
            guid[b].fill_(model_->null_id());
        }
    }

    auto start = torch::full({B, 1}, model_->start_id(), torch::kInt64);
    auto target_in = torch::cat({start, gt_tokens.slice(1, 0, n - 1)}, 1);
    auto logits = model_->forward(guid, features, target_in);
    auto ce = token_cross_entropy(logits, gt_tokens);

    SamplerStepReport rep;
    auto total = ce;
    if (cfg_.output_loss) {
        auto soft = gumbel_softmax(logits, cfg_.gumbel_tau, gumbel_rng_);  // [B,n,K]
        auto z = torch::matmul(soft, prior_->codebook->weight)            // [B,n,D]
                     .reshape({B, model_->latent_h, model_->latent_w, -1})
                     .permute({0, 3, 1, 2});
        auto recon = prior_->decoder(z);
        auto out = recon_loss(y_gt, recon);
        rep.out = out.item<double>();
        total = total + cfg_.out_loss_weight * out;
    }
    if (model_->one_step_head) {
        auto masked = torch::full({B, n}, model_->mask_id(), torch::kInt64);
        auto ce_one = token_cross_entropy(model_->forward(guid, features, masked), gt_tokens);
        rep.ce_one = ce_one.item<double>();
        total = total + ce_one;
    }

    opt_->zero_grad();
    total.backward();
    opt_->step();

    rep.ce = ce.item<double>();
    rep.total = rep.ce + cfg_.out_loss_weight * rep.out + rep.ce_one;
    for (double v : {rep.ce, rep.out, rep.ce_one, rep.total}) {
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "non-finite sampler loss at step " << step_count_ << ": ce=" << rep.ce
               << " out=" << rep.out << " ce_one=" << rep.ce_one;
            throw NumericError(os.str());
        }
    }
    step_count_++;
    return rep;
}

namespace {

torch::Tensor tokens_to_tensor(const std::vector<TokenGrid>& grids) {
    const auto B = static_cast<int64_t>(grids.size());
    const auto n = static_cast<int64_t>(grids.front().count());
    auto out = torch::empty({B, n}, torch::kInt64);
    auto a = out.accessor<int64_t, 2>();
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t i = 0; i < n; ++i) a[b][i] = grids[static_cast<std::size_t>(b)].indices[i];
    }
    return out;
}

}  // namespace

SamplerModel train_sampler(const std::vector<Example>& train, PriorModel prior,
                           const RunConfig& cfg) {
    if (train.empty()) throw DataError("sampler training set is empty");
    fix_determinism(derive_seed(cfg.seed, 17));

    SamplerModel model(cfg);
    SamplerTrainer trainer(model, prior, cfg);

    // the prior is frozen, so every token grid is fixed: encode once
    std::vector<torch::Tensor> gts, feats;
    std::vector<TokenGrid> gt_tok, guid_tok;
    for (const auto& ex : train) {
        gts.push_back(to_tensor(ex.gt));
        feats.push_back(to_tensor(ex.features));
        gt_tok.push_back(encode(prior, ex.gt));
        guid_tok.push_back(encode(prior, ex.noisy));
    }

    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream csv(cfg.output_dir + "/sampler_loss.csv");
    if (!csv) throw DataError("cannot write sampler_loss.csv under " + cfg.output_dir);
    csv << "step,ce,out,ce_one,total\n";

    std::map<std::string, std::string> meta{
        {"kind", "sampler"},
        {"preset", cfg.preset},
        {"config_hash", cfg.config_hash()},
        {"prior_config_hash", cfg.config_hash()},
        {"one_step_head", cfg.one_step_head ? "1" : "0"},
    };

    Rng order(derive_seed(cfg.seed, 18));
    const int b = std::max(1, cfg.batch_size);
    for (int s = 0; s < cfg.sampler_steps; ++s) {
        std::vector<torch::Tensor> yb, fb;
        std::vector<TokenGrid> tb, gb;
        for (int i = 0; i < b; ++i) {
            const auto pick = static_cast<std::size_t>(
                order.uniform_int(0, static_cast<int64_t>(train.size()) - 1));
            yb.push_back(gts[pick]);
            fb.push_back(feats[pick]);
            tb.push_back(gt_tok[pick]);
            gb.push_back(guid_tok[pick]);
        }
        torch::Tensor features;
        if (cfg.condition_on_features) features = torch::stack(fb, 0);
        auto rep = trainer.step(torch::stack(yb, 0), features, tokens_to_tensor(tb),
                                tokens_to_tensor(gb));
        char row[192];
        std::snprintf(row, sizeof(row), "%d,%.8f,%.8f,%.8f,%.8f\n", s, rep.ce, rep.out,
                      rep.ce_one, rep.total);
        csv << row;
        if ((s + 1) % 100 == 0) {
            meta["steps"] = std::to_string(s + 1);
            save_checkpoint(cfg.output_dir + "/sampler_last_good.ckpt", *model, meta);
        }
    }
    csv.close();

    meta["steps"] = std::to_string(cfg.sampler_steps);
    save_checkpoint(cfg.output_dir + "/sampler.ckpt", *model, meta);
    return model;
}

SamplerModel load_sampler(const std::string& path, const RunConfig& cfg,
                          const std::map<std::string, std::string>& prior_meta) {
    // Metadata first, so a prior mismatch reads as a config problem rather
    // than a tensor-shape failure.
    auto meta = read_checkpoint_meta(path);
    if (meta.count("kind") == 0 || meta.at("kind") != "sampler") {
        throw FormatError("checkpoint is not a sampler checkpoint", 0);
    }
    const auto it = meta.find("prior_config_hash");
    const auto pit = prior_meta.find("config_hash");
    if (it == meta.end() || pit == prior_meta.end() || it->second != pit->second) {
        throw ConfigError("sampler checkpoint was trained against a different prior");
    }
    SamplerModel model(cfg);
    load_checkpoint(path, *model);
    return model;
}

}  // namespace mapprior
