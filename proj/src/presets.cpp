#include "mapprior/config.hpp"
#include "mapprior/errors.hpp"
#include "mapprior/layout.hpp"

namespace mapprior {

namespace {

RunConfig toy_preset() {
    RunConfig c;
    c.preset = "toy";
    c.channels = default_channels();
    c.grid_h = 64;
    c.grid_w = 64;
    c.resolution = 1.5625;  // 100 m square scene
    c.dataset_train = 256;
    c.dataset_val = 40;

    c.codebook_size = 256;
    c.codebook_dim = 64;
    c.latent_h = 8;
    c.latent_w = 8;
    c.enc_channels = {64, 128, 256};
    c.enc_downsamples = 3;
    c.enc_resblocks = 1;
    c.disc_channels = 64;

    c.tf_layers = 4;
    c.tf_heads = 4;
    c.tf_embd = 128;
    c.tf_block = 192;  // feature + guidance + target segments

    c.prior_steps = 1200;
    c.sampler_steps = 800;
    c.batch_size = 4;
    c.lr_prior = 1e-3;
    c.lr_sampler = 3e-4;

    c.perp_window = 8;
    c.perp_stride = 4;
    c.perp_steps = 30;
    return c;
}

RunConfig paper_preset() {
    RunConfig c = toy_preset();
    c.preset = "paper";
    c.grid_h = 200;
    c.grid_w = 200;
    c.resolution = 0.5;
    c.dataset_train = 1024;
    c.dataset_val = 128;

    c.codebook_size = 1024;
    c.codebook_dim = 256;
    c.latent_h = 12;
    c.latent_w = 12;
    c.enc_channels = {128, 128, 256, 256, 512};
    c.enc_downsamples = 4;
    c.enc_resblocks = 2;

    c.tf_layers = 24;
    c.tf_heads = 16;
    c.tf_embd = 1024;
    c.tf_block = 512;

    c.prior_steps = 20000;
    c.sampler_steps = 20000;
    c.batch_size = 2;
    c.lr_prior = 9.0e-6;
    c.lr_sampler = 9.0e-6;

    c.perp_window = 12;
    c.perp_stride = 6;
    return c;
}

RunConfig smoke_preset() {
    RunConfig c = toy_preset();
    c.preset = "smoke";
    c.grid_h = 32;
    c.grid_w = 32;
    c.resolution = 3.125;
    c.dataset_train = 32;
    c.dataset_val = 8;

    c.codebook_size = 64;
    c.codebook_dim = 32;
    c.latent_h = 4;
    c.latent_w = 4;
    c.enc_channels = {16, 32, 64};
    c.enc_downsamples = 3;
    c.enc_resblocks = 1;
    c.disc_channels = 16;

    c.tf_layers = 2;
    c.tf_heads = 2;
    c.tf_embd = 64;
    c.tf_block = 48;

    c.prior_steps = 200;
    c.sampler_steps = 200;
    c.batch_size = 4;

    c.perp_window = 4;
    c.perp_stride = 2;
    c.perp_steps = 8;
    return c;
}

}  // namespace

RunConfig preset_config(const std::string& name) {
    if (name == "toy") return toy_preset();
    if (name == "paper") return paper_preset();
    if (name == "smoke") return smoke_preset();
    throw ConfigError("unknown preset: " + name);
}

}  // namespace mapprior
