#include "mapprior/vq_train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mapprior/checkpoint.hpp"
#include "mapprior/errors.hpp"
#include "mapprior/tensor_bridge.hpp"
#include "mapprior/vq_ops.hpp"

namespace mapprior {

namespace {

std::vector<torch::Tensor> generator_params(PriorModel& m) {
    std::vector<torch::Tensor> ps;
    for (auto& p : m->encoder->parameters()) ps.push_back(p);
    for (auto& p : m->decoder->parameters()) ps.push_back(p);
    for (auto& p : m->codebook->parameters()) ps.push_back(p);
    return ps;
}

}  // namespace

PriorTrainer::PriorTrainer(PriorModel model, const RunConfig& cfg, int64_t dataset_size)
    : model_(std::move(model)),
      cfg_(cfg),
      reseed_rng_(derive_seed(cfg.seed, 11)) {
    opt_g_ = std::make_unique<torch::optim::Adam>(generator_params(model_),
                                                  torch::optim::AdamOptions(cfg_.lr_prior));
    const double d_lr = cfg_.lr_disc > 0 ? cfg_.lr_disc : cfg_.lr_prior;
    opt_d_ = std::make_unique<torch::optim::Adam>(model_->disc->parameters(),
                                                  torch::optim::AdamOptions(d_lr));
    warmup_steps_ = llround(cfg_.gan_warmup_frac * cfg_.prior_steps);
    int64_t n = dataset_size > 0 ? dataset_size : cfg_.dataset_train;
    steps_per_epoch_ = std::max<int64_t>(1, n / std::max(1, cfg_.batch_size));
    usage_.assign(static_cast<std::size_t>(cfg_.codebook_size), 0);
}

PriorStepReport PriorTrainer::step(const torch::Tensor& batch) {
    if (batch.dim() != 4 || batch.size(0) < 1) {
        throw ShapeError("prior training batch must be [B,C,H,W]");
    }
    model_->train();

    auto e = model_->encoder->forward(batch);
    auto [grids, z_q] = quantize(e, model_->codebook->weight);
    for (const auto& g : grids) {
        for (int32_t idx : g.indices) usage_[static_cast<std::size_t>(idx)]++;
    }
    auto st = straight_through(e, z_q);
    auto recon = model_->decoder->forward(st);

    auto l_recon = recon_loss(batch, recon);
    auto l_latent = latent_loss(z_q, e);

    PriorStepReport rep;
    rep.warmup = step_count_ < warmup_steps_;

    torch::Tensor total;
    if (rep.warmup) {
        total = l_recon + l_latent;
        opt_g_->zero_grad();
        total.backward();
        opt_g_->step();
    } else {
        auto g_loss = generator_loss(recon, model_->disc);

        auto& last_w = model_->decoder->out->weight;
        double g_rec = last_layer_grad_norm(l_recon, last_w);
        double g_gan = last_layer_grad_norm(g_loss, last_w);
        rep.lambda = adaptive_gan_weight(g_rec, g_gan, cfg_.gan_sigma);

        total = l_recon + rep.lambda * g_loss + l_latent;
        opt_g_->zero_grad();
        total.backward();
        opt_g_->step();
        rep.gan_g = g_loss.item<double>();

        auto d = gan_losses(batch, recon.detach(), model_->disc);
        opt_d_->zero_grad();  // also clears grads leaked through g_loss
        d.d_loss.backward();
        opt_d_->step();
        rep.gan_d = d.d_loss.item<double>();
    }

    rep.recon = l_recon.item<double>();
    rep.latent = l_latent.item<double>();
    rep.total = rep.recon + rep.lambda * rep.gan_g + rep.latent;

    for (double v : {rep.recon, rep.gan_g, rep.gan_d, rep.latent, rep.lambda, rep.total}) {
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "non-finite loss at step " << step_count_ << ": recon=" << rep.recon
               << " gan_g=" << rep.gan_g << " gan_d=" << rep.gan_d
               << " latent=" << rep.latent << " lambda=" << rep.lambda;
            throw NumericError(os.str());
        }
    }

    last_e_ = e.detach().permute({0, 2, 3, 1}).reshape({-1, cfg_.codebook_dim}).contiguous();
    step_count_++;
    if (step_count_ % steps_per_epoch_ == 0) reseed_dead_codes();
    return rep;
}

void PriorTrainer::reseed_dead_codes() {
    torch::NoGradGuard ng;
    auto pool_size = last_e_.size(0);
    auto w = model_->codebook->weight;
    for (int k = 0; k < cfg_.codebook_size; ++k) {
        if (usage_[static_cast<std::size_t>(k)] == 0) {
            auto pick = reseed_rng_.uniform_int(0, pool_size - 1);
            w[k].copy_(last_e_[pick]);
        }
        usage_[static_cast<std::size_t>(k)] = 0;
    }
}

PriorModel train_prior(const std::vector<LayoutGrid>& train, const RunConfig& cfg) {
    if (train.empty()) throw DataError("prior training set is empty");
    fix_determinism(derive_seed(cfg.seed, 7));

    PriorModel model(cfg);
    PriorTrainer trainer(model, cfg, static_cast<int64_t>(train.size()));

    std::vector<torch::Tensor> tensors;
    tensors.reserve(train.size());
    for (const auto& g : train) tensors.push_back(to_tensor(g));

    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream csv(cfg.output_dir + "/prior_loss.csv");
    if (!csv) throw DataError("cannot write prior_loss.csv under " + cfg.output_dir);
    csv << "step,recon,gan_g,gan_d,latent,lambda,total\n";

    std::map<std::string, std::string> meta{
        {"kind", "prior"},
        {"preset", cfg.preset},
        {"config_hash", cfg.config_hash()},
    };

    Rng order(derive_seed(cfg.seed, 8));
    const int b = std::max(1, cfg.batch_size);
    for (int s = 0; s < cfg.prior_steps; ++s) {
        std::vector<torch::Tensor> picks;
        picks.reserve(static_cast<std::size_t>(b));
        for (int i = 0; i < b; ++i) {
            picks.push_back(tensors[static_cast<std::size_t>(order.uniform_int(0, static_cast<int64_t>(tensors.size()) - 1))]);
        }
        auto rep = trainer.step(torch::stack(picks, 0));
        char row[256];
        std::snprintf(row, sizeof(row), "%d,%.8f,%.8f,%.8f,%.8f,%.8f,%.8f\n", s, rep.recon,
                      rep.gan_g, rep.gan_d, rep.latent, rep.lambda, rep.total);
        csv << row;
        if ((s + 1) % 100 == 0) {
            meta["steps"] = std::to_string(s + 1);
            save_checkpoint(cfg.output_dir + "/prior_last_good.ckpt", *model, meta);
        }
    }
    csv.close();

    meta["steps"] = std::to_string(cfg.prior_steps);
    save_checkpoint(cfg.output_dir + "/prior.ckpt", *model, meta);
    export_codebook(cfg.output_dir + "/codebook.bin", model->codebook->weight);
    return model;
}

PriorModel load_prior(const std::string& path, const RunConfig& cfg) {
    // Metadata first: a config mismatch must surface as such even when it
    // would also change tensor shapes.
    auto meta = read_checkpoint_meta(path);
    if (meta.count("kind") == 0 || meta.at("kind") != "prior") {
        throw FormatError("checkpoint is not a prior checkpoint", 0);
    }
    if (meta.count("config_hash") == 0 || meta.at("config_hash") != cfg.config_hash()) {
        throw ConfigError("prior checkpoint was trained with a different config");
    }
    PriorModel model(cfg);
    load_checkpoint(path, *model);
    return model;
}

}  // namespace mapprior
