#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mapprior/corruption.hpp"

namespace mapprior {

// Flat run configuration. A preset supplies every default; a config file (or
// CLI flag) overrides individual keys. Unknown keys are rejected.
struct RunConfig {
    std::string preset = "toy";  // toy | paper | smoke
    uint64_t seed = 0;

    // data
    std::vector<std::string> channels;
    int grid_h = 0;
    int grid_w = 0;
    double resolution = 1.0;
    int dataset_train = 0;
    int dataset_val = 0;
    std::string data_dir = "data";
    std::string output_dir = "out";

    // codebook / encoder geometry
    int codebook_size = 0;
    int codebook_dim = 0;
    int latent_h = 0;
    int latent_w = 0;
    std::vector<int> enc_channels;
    int enc_downsamples = 0;
    int enc_resblocks = 1;
    int disc_channels = 64;

    // transformer
    int tf_layers = 0;
    int tf_heads = 0;
    int tf_embd = 0;
    int tf_block = 0;

    // training
    int prior_steps = 0;
    int sampler_steps = 0;
    int batch_size = 0;
    double lr_prior = 0.0;
    double lr_sampler = 0.0;
    double lr_disc = 0.0;  // 0 = match lr_prior
    double gan_warmup_frac = 0.25;
    double gan_sigma = 1e-6;
    double guidance_dropout = 0.1;
    double out_loss_weight = 100.0;
    double gumbel_tau = 1.0;

    // corruption profile used for dataset generation / the corruptor stage
    CorruptionParams corruption;

    // sampling / inference
    int num_samples = 15;
    double nucleus_p = 0.9;
    double threshold = 0.5;
    std::string infer_mode = "corruptor";     // corruptor | toy-net
    std::string sample_mode = "autoregressive";  // autoregressive | one_step

    // evaluation
    int ece_bins = 10;
    int mmd_pool = 25;
    bool ece_per_class = false;
    bool iou_empty_empty_is_one = true;
    bool soft_uncertainty = false;

    // perpetual generation
    int perp_window = 8;
    int perp_stride = 4;
    int perp_steps = 30;

    // ablation axes
    bool output_loss = true;
    bool condition_on_features = true;
    bool one_step_head = true;

    // Downsampled extent after `downs` halvings (stride-2 conv, k3, (0,1) pad).
    static int downsampled(int extent, int downs);

    void validate() const;  // throws ConfigError on inconsistent values

    // Canonical flat JSON of every field.
    std::string to_json() const;

    // Hash of the resolved config with location fields (data_dir, output_dir)
    // blanked, so moving artifacts does not change identity.
    std::string config_hash() const;
};

// Baked-in preset defaults; throws ConfigError for unknown names.
RunConfig preset_config(const std::string& name);

// Loads a flat JSON config file. Field "preset" (default "toy") picks the
// baseline; every other present key overrides it. Unknown keys, wrong types,
// or failed validation throw ConfigError.
RunConfig load_config_file(const std::string& path);
RunConfig load_config_text(const std::string& text);

// Writes cfg.to_json() to <output_dir>/resolved_config.json.
void write_resolved_config(const RunConfig& cfg);

}  // namespace mapprior
