#include "mapprior/pipeline.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "mapprior/bml.hpp"
#include "mapprior/errors.hpp"
#include "mapprior/tensor_bridge.hpp"
#include "mapprior/vq_ops.hpp"

namespace mapprior {

PerceptionNetImpl::PerceptionNetImpl(int in_channels, int out_channels, int hidden) {
    if (in_channels <= 0 || out_channels <= 0 || hidden <= 0) {
        throw ConfigError("perception net channel counts must be positive");
    }
    c1 = register_module(
        "c1", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, hidden, 3).padding(1)));
    c2 = register_module(
        "c2", torch::nn::Conv2d(torch::nn::Conv2dOptions(hidden, hidden, 3).padding(1)));
    c3 = register_module(
        "c3", torch::nn::Conv2d(torch::nn::Conv2dOptions(hidden, out_channels, 1)));
}

torch::Tensor PerceptionNetImpl::forward(const torch::Tensor& x) {
    if (x.dim() != 4) throw ShapeError("perception net expects a [B,C,H,W] batch");
    auto h = torch::relu(c1(x));
    h = torch::relu(c2(h));
    return torch::sigmoid(c3(h));
}

torch::Tensor perception_bce(const torch::Tensor& y_gt, const torch::Tensor& y_prob,
                             bool one_sided) {
    if (y_gt.sizes() != y_prob.sizes()) {
        throw ShapeError("perception targets and predictions must share a shape");
    }
    auto p = y_prob.clamp(1e-6, 1.0 - 1e-6);
    auto y = y_gt.to(p.scalar_type());
    auto term = -y * torch::log(p);
    if (!one_sided) term = term - (1.0 - y) * torch::log(1.0 - p);
    return term.mean();
}

double train_perception_step(PerceptionNet& net, torch::optim::Optimizer& opt,
                             const torch::Tensor& x, const torch::Tensor& y_gt,
                             bool one_sided) {
    net->train();
    auto loss = perception_bce(y_gt, net->forward(x), one_sided);
    const double value = loss.item<double>();
    if (!std::isfinite(value)) throw NumericError("perception loss is not finite");
    opt.zero_grad();
    loss.backward();
    opt.step();
    net->trained = true;
    return value;
}

std::pair<SoftLayout, PseudoSensor> predict_initial(const LayoutGrid& gt, const RunConfig& cfg,
                                                    uint64_t seed, PerceptionNet net) {
    auto params = cfg.corruption;
    params.seed = seed;
    auto res = corrupt(gt, params);
    if (cfg.infer_mode == "corruptor") {
        return {std::move(res.noisy), std::move(res.features)};
    }
    if (cfg.infer_mode != "toy-net") {
        throw ConfigError("infer_mode must be 'corruptor' or 'toy-net'");
    }
    if (net.is_empty() || !net->trained) {
        throw CapabilityError("the toy perception net has not been trained");
    }
    torch::NoGradGuard ng;
    net->eval();
    auto y = net->forward(to_tensor(res.features).unsqueeze(0)).squeeze(0);
    return {to_soft_layout(y, gt.channels, gt.resolution), std::move(res.features)};
}

void SampleBundle::validate() const {
    if (samples.empty()) throw ContractError("a sample bundle holds at least one sample");
    for (const auto& s : samples) {
        s.validate();
        if (s.channels != samples[0].channels || s.height != samples[0].height ||
            s.width != samples[0].width) {
            throw ShapeError("bundle samples must share a shape");
        }
    }
    confidence.validate();
    uncertainty.validate();
    final.validate();
    if (confidence.data.size() != samples[0].data.size() ||
        uncertainty.data.size() != samples[0].data.size() ||
        final.data.size() != samples[0].data.size()) {
        throw ShapeError("bundle aggregates must match the sample shape");
    }
    for (float v : uncertainty.data) {
        if (v < 0.0f || v > 0.25f + 1e-6f) {
            throw ContractError("per-cell variance must lie in [0, 0.25]");
        }
    }
    if (!(final == confidence.binarize(0.5))) {
        throw ContractError("final must be the confidence map thresholded at 0.5");
    }
}

namespace {

void check_token_compat(const PriorModel& prior, const SamplerModel& sampler) {
    if (prior->codebook_size != sampler->codebook_size || prior->latent_h != sampler->latent_h ||
        prior->latent_w != sampler->latent_w) {
        throw ConfigError("prior and sampler disagree on the token grid");
    }
}

torch::Tensor conditioning_features(const SamplerModel& sampler, const PseudoSensor& x) {
    if (sampler->extractor.is_empty()) return {};
    return to_tensor(x);
}

}  // namespace

SampleBundle refine(const SoftLayout& noisy, const PseudoSensor& x, PriorModel& prior,
                    SamplerModel& sampler, const RunConfig& cfg, const SamplingParams& params) {
    params.validate();
    check_token_compat(prior, sampler);

    auto guidance = encode(prior, noisy);
    auto feats = conditioning_features(sampler, x);
    auto grids =
        sample_autoregressive_batch(sampler, guidance, feats, params, params.k_samples);

    SampleBundle b;
    std::vector<SoftLayout> soft;
    soft.reserve(grids.size());
    b.samples.reserve(grids.size());
    for (const auto& g : grids) {
        soft.push_back(decode(prior, g));
        b.samples.push_back(soft.back().binarize(cfg.threshold));
    }

    const auto& head = b.samples.front();
    b.confidence = SoftLayout::zeros(head.channels, head.height, head.width, head.resolution);
    b.uncertainty = SoftLayout::zeros(head.channels, head.height, head.width, head.resolution);
    const double k = static_cast<double>(b.samples.size());
    for (std::size_t i = 0; i < head.data.size(); ++i) {
        double sum = 0.0, sum_sq = 0.0, soft_sum = 0.0, soft_sq = 0.0;
        for (std::size_t s = 0; s < b.samples.size(); ++s) {
            const double hard = b.samples[s].data[i];
            sum += hard;
            sum_sq += hard * hard;
            const double sv = soft[s].data[i];
            soft_sum += sv;
            soft_sq += sv * sv;
        }
        const double mean = sum / k;
        b.confidence.data[i] = static_cast<float>(mean);
        const double var = cfg.soft_uncertainty
                               ? soft_sq / k - (soft_sum / k) * (soft_sum / k)
                               : sum_sq / k - mean * mean;
        b.uncertainty.data[i] = static_cast<float>(std::max(0.0, var));
    }
    b.final = b.confidence.binarize(0.5);
    return b;
}

SoftLayout refine_one_step(const SoftLayout& noisy, const PseudoSensor& x, PriorModel& prior,
                           SamplerModel& sampler, const RunConfig& cfg) {
    (void)cfg;
    check_token_compat(prior, sampler);
    auto guidance = encode(prior, noisy);
    auto feats = conditioning_features(sampler, x);
    auto tokens = sample_one_step(sampler, feats, guidance_ids(guidance));
    return decode(prior, tokens);
}

void save_bundle(const std::filesystem::path& dir, const SampleBundle& bundle,
                 const std::map<std::string, std::string>& meta) {
    bundle.validate();
    std::filesystem::create_directories(dir);
    for (std::size_t k = 0; k < bundle.samples.size(); ++k) {
        write_bml(bundle.samples[k], dir / ("sample_" + std::to_string(k) + ".bml"));
    }
    write_bml(bundle.confidence, dir / "confidence.bml");
    write_bml(bundle.uncertainty, dir / "uncertainty.bml");
    write_bml(bundle.final, dir / "final.bml");

    nlohmann::json j;
    j["k"] = bundle.samples.size();
    for (const auto& [key, value] : meta) j[key] = value;
    std::ofstream out(dir / "meta.json");
    if (!out) throw DataError("cannot write bundle meta.json under " + dir.string());
    out << j.dump(2) << "\n";
}

SampleBundle load_bundle(const std::filesystem::path& dir) {
    std::ifstream in(dir / "meta.json");
    if (!in) throw DataError("bundle directory has no meta.json: " + dir.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad bundle meta.json: ") + e.what(), 0);
    }
    if (!j.contains("k") || !j["k"].is_number_unsigned()) {
        throw FormatError("bundle meta.json lacks a sample count", 0);
    }
    const auto k = j["k"].get<std::size_t>();

    SampleBundle b;
    b.samples.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        b.samples.push_back(read_bml_binary(dir / ("sample_" + std::to_string(i) + ".bml")));
    }
    b.confidence = read_bml_soft(dir / "confidence.bml");
    b.uncertainty = read_bml_soft(dir / "uncertainty.bml");
    b.final = read_bml_binary(dir / "final.bml");
    b.validate();
    return b;
}

}  // namespace mapprior
