#include "mapprior/config.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "mapprior/errors.hpp"
#include "mapprior/hashing.hpp"

namespace mapprior {

using nlohmann::json;

int RunConfig::downsampled(int extent, int downs) {
    for (int i = 0; i < downs; ++i) extent = extent / 2;
    return extent;
}

void RunConfig::validate() const {
    if (preset != "toy" && preset != "paper" && preset != "smoke") {
        throw ConfigError("unknown preset: " + preset);
    }
    if (channels.empty()) throw ConfigError("channels must be non-empty");
    if (grid_h <= 0 || grid_w <= 0) throw ConfigError("grid dims must be positive");
    if (resolution <= 0) throw ConfigError("resolution must be positive");
    if (dataset_train < 1 || dataset_val < 1) {
        throw ConfigError("dataset sizes must be at least 1");
    }
    if (codebook_size < 2) throw ConfigError("codebook_size must be >= 2");
    if (codebook_dim < 1) throw ConfigError("codebook_dim must be >= 1");
    if (enc_channels.empty()) throw ConfigError("enc_channels must be non-empty");
    if (enc_downsamples < 1 || enc_downsamples > static_cast<int>(enc_channels.size())) {
        throw ConfigError("enc_downsamples must lie in [1, len(enc_channels)]");
    }
    if (enc_resblocks < 1) throw ConfigError("enc_resblocks must be >= 1");
    if (downsampled(grid_h, enc_downsamples) != latent_h ||
        downsampled(grid_w, enc_downsamples) != latent_w) {
        throw ConfigError("latent dims are inconsistent with grid size and enc_downsamples");
    }
    if (latent_h < 1 || latent_w < 1) throw ConfigError("latent dims must be positive");
    if (tf_layers < 1 || tf_heads < 1 || tf_embd < 1) {
        throw ConfigError("transformer dims must be positive");
    }
    if (tf_embd % tf_heads != 0) throw ConfigError("tf_embd must be divisible by tf_heads");
    if (tf_block < 3 * latent_h * latent_w) {
        throw ConfigError("tf_block too small for feature+guidance+target segments");
    }
    if (prior_steps < 1 || sampler_steps < 1 || batch_size < 1) {
        throw ConfigError("training steps and batch size must be positive");
    }
    if (lr_prior <= 0 || lr_sampler <= 0) throw ConfigError("learning rates must be positive");
    if (lr_disc < 0) throw ConfigError("lr_disc must be >= 0 (0 = match lr_prior)");
    if (gan_warmup_frac < 0 || gan_warmup_frac > 1) {
        throw ConfigError("gan_warmup_frac must lie in [0,1]");
    }
    if (gan_sigma <= 0) throw ConfigError("gan_sigma must be positive");
    if (guidance_dropout < 0 || guidance_dropout > 1) {
        throw ConfigError("guidance_dropout must lie in [0,1]");
    }
    if (out_loss_weight < 0) throw ConfigError("out_loss_weight must be >= 0");
    if (gumbel_tau <= 0) throw ConfigError("gumbel_tau must be positive");
    corruption.validate();
    if (num_samples < 1) throw ConfigError("num_samples must be >= 1");
    if (nucleus_p <= 0 || nucleus_p > 1) throw ConfigError("nucleus_p must lie in (0,1]");
    if (threshold < 0 || threshold > 1) throw ConfigError("threshold must lie in [0,1]");
    if (infer_mode != "corruptor" && infer_mode != "toy-net") {
        throw ConfigError("infer_mode must be corruptor or toy-net");
    }
    if (sample_mode != "autoregressive" && sample_mode != "one_step") {
        throw ConfigError("sample_mode must be autoregressive or one_step");
    }
    if (ece_bins < 1) throw ConfigError("ece_bins must be >= 1");
    if (mmd_pool < 1) throw ConfigError("mmd_pool must be >= 1");
    if (perp_window != latent_w) {
        throw ConfigError("perp_window must equal latent_w (the model's token-grid width)");
    }
    if (perp_stride < 1 || perp_stride >= perp_window) {
        throw ConfigError("perp_stride must satisfy 1 <= stride < window");
    }
    if (perp_steps < 0) throw ConfigError("perp_steps must be >= 0");
}

namespace {

json to_flat_json(const RunConfig& c) {
    json j;
    j["preset"] = c.preset;
    j["seed"] = c.seed;
    j["channels"] = c.channels;
    j["grid_h"] = c.grid_h;
    j["grid_w"] = c.grid_w;
    j["resolution"] = c.resolution;
    j["dataset_train"] = c.dataset_train;
    j["dataset_val"] = c.dataset_val;
    j["data_dir"] = c.data_dir;
    j["output_dir"] = c.output_dir;
    j["codebook_size"] = c.codebook_size;
    j["codebook_dim"] = c.codebook_dim;
    j["latent_h"] = c.latent_h;
    j["latent_w"] = c.latent_w;
    j["enc_channels"] = c.enc_channels;
    j["enc_downsamples"] = c.enc_downsamples;
    j["enc_resblocks"] = c.enc_resblocks;
    j["disc_channels"] = c.disc_channels;
    j["tf_layers"] = c.tf_layers;
    j["tf_heads"] = c.tf_heads;
    j["tf_embd"] = c.tf_embd;
    j["tf_block"] = c.tf_block;
    j["prior_steps"] = c.prior_steps;
    j["sampler_steps"] = c.sampler_steps;
    j["batch_size"] = c.batch_size;
    j["lr_prior"] = c.lr_prior;
    j["lr_sampler"] = c.lr_sampler;
    j["lr_disc"] = c.lr_disc;
    j["gan_warmup_frac"] = c.gan_warmup_frac;
    j["gan_sigma"] = c.gan_sigma;
    j["guidance_dropout"] = c.guidance_dropout;
    j["out_loss_weight"] = c.out_loss_weight;
    j["gumbel_tau"] = c.gumbel_tau;
    j["corrupt_dropout_patch_rate"] = c.corruption.dropout_patch_rate;
    j["corrupt_patch_min"] = c.corruption.patch_size_range.first;
    j["corrupt_patch_max"] = c.corruption.patch_size_range.second;
    j["corrupt_boundary_jitter_px"] = c.corruption.boundary_jitter_px;
    j["corrupt_speckle_rate"] = c.corruption.speckle_rate;
    j["corrupt_radial_attenuation"] = c.corruption.radial_attenuation;
    j["num_samples"] = c.num_samples;
    j["nucleus_p"] = c.nucleus_p;
    j["threshold"] = c.threshold;
    j["infer_mode"] = c.infer_mode;
    j["sample_mode"] = c.sample_mode;
    j["ece_bins"] = c.ece_bins;
    j["mmd_pool"] = c.mmd_pool;
    j["ece_per_class"] = c.ece_per_class;
    j["iou_empty_empty_is_one"] = c.iou_empty_empty_is_one;
    j["soft_uncertainty"] = c.soft_uncertainty;
    j["perp_window"] = c.perp_window;
    j["perp_stride"] = c.perp_stride;
    j["perp_steps"] = c.perp_steps;
    j["output_loss"] = c.output_loss;
    j["condition_on_features"] = c.condition_on_features;
    j["one_step_head"] = c.one_step_head;
    return j;
}

template <typename T>
T get_as(const json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key has wrong type: " + key);
    }
}

void apply_key(RunConfig& c, const std::string& key, const json& v) {
    if (key == "preset") return;  // handled by the caller
    if (key == "seed") c.seed = get_as<uint64_t>(v, key);
    else if (key == "channels") c.channels = get_as<std::vector<std::string>>(v, key);
    else if (key == "grid_h") c.grid_h = get_as<int>(v, key);
    else if (key == "grid_w") c.grid_w = get_as<int>(v, key);
    else if (key == "resolution") c.resolution = get_as<double>(v, key);
    else if (key == "dataset_train") c.dataset_train = get_as<int>(v, key);
    else if (key == "dataset_val") c.dataset_val = get_as<int>(v, key);
    else if (key == "data_dir") c.data_dir = get_as<std::string>(v, key);
    else if (key == "output_dir") c.output_dir = get_as<std::string>(v, key);
    else if (key == "codebook_size") c.codebook_size = get_as<int>(v, key);
    else if (key == "codebook_dim") c.codebook_dim = get_as<int>(v, key);
    else if (key == "latent_h") c.latent_h = get_as<int>(v, key);
    else if (key == "latent_w") c.latent_w = get_as<int>(v, key);
    else if (key == "enc_channels") c.enc_channels = get_as<std::vector<int>>(v, key);
    else if (key == "enc_downsamples") c.enc_downsamples = get_as<int>(v, key);
    else if (key == "enc_resblocks") c.enc_resblocks = get_as<int>(v, key);
    else if (key == "disc_channels") c.disc_channels = get_as<int>(v, key);
    else if (key == "tf_layers") c.tf_layers = get_as<int>(v, key);
    else if (key == "tf_heads") c.tf_heads = get_as<int>(v, key);
    else if (key == "tf_embd") c.tf_embd = get_as<int>(v, key);
    else if (key == "tf_block") c.tf_block = get_as<int>(v, key);
    else if (key == "prior_steps") c.prior_steps = get_as<int>(v, key);
    else if (key == "sampler_steps") c.sampler_steps = get_as<int>(v, key);
    else if (key == "batch_size") c.batch_size = get_as<int>(v, key);
    else if (key == "lr_prior") c.lr_prior = get_as<double>(v, key);
    else if (key == "lr_sampler") c.lr_sampler = get_as<double>(v, key);
    else if (key == "lr_disc") c.lr_disc = get_as<double>(v, key);
    else if (key == "gan_warmup_frac") c.gan_warmup_frac = get_as<double>(v, key);
    else if (key == "gan_sigma") c.gan_sigma = get_as<double>(v, key);
    else if (key == "guidance_dropout") c.guidance_dropout = get_as<double>(v, key);
    else if (key == "out_loss_weight") c.out_loss_weight = get_as<double>(v, key);
    else if (key == "gumbel_tau") c.gumbel_tau = get_as<double>(v, key);
    else if (key == "corrupt_dropout_patch_rate") c.corruption.dropout_patch_rate = get_as<double>(v, key);
    else if (key == "corrupt_patch_min") c.corruption.patch_size_range.first = get_as<int>(v, key);
    else if (key == "corrupt_patch_max") c.corruption.patch_size_range.second = get_as<int>(v, key);
    else if (key == "corrupt_boundary_jitter_px") c.corruption.boundary_jitter_px = get_as<int>(v, key);
    else if (key == "corrupt_speckle_rate") c.corruption.speckle_rate = get_as<double>(v, key);
    else if (key == "corrupt_radial_attenuation") c.corruption.radial_attenuation = get_as<double>(v, key);
    else if (key == "num_samples") c.num_samples = get_as<int>(v, key);
    else if (key == "nucleus_p") c.nucleus_p = get_as<double>(v, key);
    else if (key == "threshold") c.threshold = get_as<double>(v, key);
    else if (key == "infer_mode") c.infer_mode = get_as<std::string>(v, key);
    else if (key == "sample_mode") c.sample_mode = get_as<std::string>(v, key);
    else if (key == "ece_bins") c.ece_bins = get_as<int>(v, key);
    else if (key == "mmd_pool") c.mmd_pool = get_as<int>(v, key);
    else if (key == "ece_per_class") c.ece_per_class = get_as<bool>(v, key);
    else if (key == "iou_empty_empty_is_one") c.iou_empty_empty_is_one = get_as<bool>(v, key);
    else if (key == "soft_uncertainty") c.soft_uncertainty = get_as<bool>(v, key);
    else if (key == "perp_window") c.perp_window = get_as<int>(v, key);
    else if (key == "perp_stride") c.perp_stride = get_as<int>(v, key);
    else if (key == "perp_steps") c.perp_steps = get_as<int>(v, key);
    else if (key == "output_loss") c.output_loss = get_as<bool>(v, key);
    else if (key == "condition_on_features") c.condition_on_features = get_as<bool>(v, key);
    else if (key == "one_step_head") c.one_step_head = get_as<bool>(v, key);
    else throw ConfigError("unknown config key: " + key);
}

}  // namespace

std::string RunConfig::to_json() const { return to_flat_json(*this).dump(2); }

std::string RunConfig::config_hash() const {
    RunConfig c = *this;
    c.data_dir.clear();
    c.output_dir.clear();
    return sha256_hex(to_flat_json(c).dump());
}

RunConfig load_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    std::string preset = "toy";
    if (j.contains("preset")) preset = get_as<std::string>(j["preset"], "preset");
    RunConfig c = preset_config(preset);
    for (const auto& [key, value] : j.items()) apply_key(c, key, value);
    c.validate();
    return c;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return load_config_text(text);
}

void write_resolved_config(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    const fs::path p = fs::path(cfg.output_dir) / "resolved_config.json";
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write resolved config: " + p.string());
    out << cfg.to_json() << "\n";
}

}  // namespace mapprior
