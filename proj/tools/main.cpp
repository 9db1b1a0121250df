#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mapprior/bml.hpp"
#include "mapprior/checkpoint.hpp"
#include "mapprior/config.hpp"
#include "mapprior/dataset.hpp"
#include "mapprior/errors.hpp"
#include "mapprior/hashing.hpp"
#include "mapprior/metrics.hpp"
#include "mapprior/perpetual.hpp"
#include "mapprior/pipeline.hpp"
#include "mapprior/rng.hpp"
#include "mapprior/sampler_train.hpp"
#include "mapprior/tensor_bridge.hpp"
#include "mapprior/vq_train.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace mapprior;

namespace {

struct CliArgs {
    std::string config_path;
    std::string preset;
    uint64_t seed = 0;
    bool seed_given = false;
    bool ablate_output_loss = false;
    bool no_feature_conditioning = false;
};

// Precedence: preset baseline, then config-file keys, then CLI overrides.
RunConfig resolve_config(const CliArgs& a) {
    RunConfig cfg;
    if (!a.config_path.empty()) {
        cfg = load_config_file(a.config_path);
        if (!a.preset.empty() && a.preset != cfg.preset) {
            throw ConfigError("--preset " + a.preset + " conflicts with the config file (preset " +
                              cfg.preset + "); set \"preset\" inside the file instead");
        }
    } else {
        cfg = preset_config(a.preset.empty() ? "toy" : a.preset);
    }
    if (a.seed_given) cfg.seed = a.seed;
    if (a.ablate_output_loss) cfg.output_loss = false;
    if (a.no_feature_conditioning) cfg.condition_on_features = false;
    cfg.validate();
    return cfg;
}

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string val_dir_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "val_%05d", index);
    return buf;
}

std::string prior_path(const RunConfig& cfg) {
    return (fs::path(cfg.output_dir) / "prior.ckpt").string();
}

std::string sampler_path(const RunConfig& cfg) {
    return (fs::path(cfg.output_dir) / "sampler.ckpt").string();
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << j.dump(2) << "\n";
}

void cmd_gen_data(const RunConfig& cfg) {
    write_dataset(cfg);
    // The data directory gets its own copy of the generating config.
    std::ofstream f(fs::path(cfg.data_dir) / "resolved_config.json", std::ios::binary);
    if (!f) throw DataError("cannot write resolved config under " + cfg.data_dir);
    f << cfg.to_json() << "\n";
    std::cout << "wrote " << cfg.dataset_train << " train / " << cfg.dataset_val
              << " val triples under " << cfg.data_dir << "\n";
}

void cmd_train_prior(const RunConfig& cfg) {
    auto split = read_split(cfg.data_dir, Split::train);
    std::vector<LayoutGrid> gts;
    gts.reserve(split.size());
    for (auto& ex : split) gts.push_back(std::move(ex.gt));
    train_prior(gts, cfg);
    write_resolved_config(cfg);
    std::cout << "prior trained on " << gts.size() << " layouts; artifacts under "
              << cfg.output_dir << "\n";
}

void cmd_train_sampler(const RunConfig& cfg) {
    auto split = read_split(cfg.data_dir, Split::train);
    PriorModel prior = load_prior(prior_path(cfg), cfg);
    train_sampler(split, prior, cfg);
    write_resolved_config(cfg);
    std::cout << "sampler trained on " << split.size() << " triples; artifacts under "
              << cfg.output_dir << "\n";
}

void cmd_infer(const RunConfig& cfg) {
    auto val = read_split(cfg.data_dir, Split::val);
    PriorModel prior = load_prior(prior_path(cfg), cfg);
    SamplerModel sampler = load_sampler(sampler_path(cfg), cfg, read_checkpoint_meta(prior_path(cfg)));

    const std::string prior_sha = sha256_file(prior_path(cfg));
    const std::string sampler_sha = sha256_file(sampler_path(cfg));
    const uint64_t root = derive_seed(cfg.seed, 29);  // inference stream

    for (std::size_t i = 0; i < val.size(); ++i) {
        const Example& ex = val[i];
        const uint64_t bundle_seed = derive_seed(root, i);
        SampleBundle bundle;
        if (cfg.sample_mode == "one_step") {
            SoftLayout soft = refine_one_step(ex.noisy, ex.features, prior, sampler, cfg);
            bundle.samples = {soft.binarize(cfg.threshold)};
            bundle.confidence = soft;
            bundle.uncertainty = soft;
            std::fill(bundle.uncertainty.data.begin(), bundle.uncertainty.data.end(), 0.0f);
            bundle.final = soft.binarize(0.5);
        } else {
            SamplingParams params;
            params.nucleus_p = cfg.nucleus_p;
            params.temperature = 1.0;
            params.k_samples = cfg.num_samples;
            params.seed = bundle_seed;
            bundle = refine(ex.noisy, ex.features, prior, sampler, cfg, params);
        }
        std::map<std::string, std::string> meta;
        meta["mode"] = cfg.sample_mode;
        meta["seed"] = std::to_string(bundle_seed);
        meta["nucleus_p"] = fmt_double(cfg.nucleus_p);
        meta["temperature"] = fmt_double(1.0);
        meta["threshold"] = fmt_double(cfg.threshold);
        meta["config_hash"] = cfg.config_hash();
        meta["prior_sha256"] = prior_sha;
        meta["sampler_sha256"] = sampler_sha;
        save_bundle(fs::path(cfg.output_dir) / "bundles" / val_dir_name(static_cast<int>(i)),
                    bundle, meta);
    }
    write_resolved_config(cfg);
    std::cout << "wrote " << val.size() << " bundles under "
              << (fs::path(cfg.output_dir) / "bundles").string() << "\n";
}

EvalReport make_report(const std::vector<LayoutGrid>& preds, const std::vector<SoftLayout>& confs,
                       const std::vector<LayoutGrid>& gts, const RunConfig& cfg) {
    if (preds.size() != gts.size() || confs.size() != gts.size() || gts.empty()) {
        throw DataError("evaluation needs matching non-empty prediction and gt sets");
    }
    EvalReport r;
    r.classes = cfg.channels;
    IouOptions iopt{cfg.iou_empty_empty_is_one};
    r.per_class_iou.assign(cfg.channels.size(), 0.0);
    double miou = 0.0;
    for (std::size_t i = 0; i < gts.size(); ++i) {
        miou += mean_iou(preds[i], gts[i], iopt);
        for (std::size_t c = 0; c < cfg.channels.size(); ++c) {
            r.per_class_iou[c] += iou(preds[i], gts[i], cfg.channels[c], iopt);
        }
    }
    const double n = static_cast<double>(gts.size());
    r.mean_iou = miou / n;
    for (double& v : r.per_class_iou) v /= n;
    r.chosen_thresholds.assign(cfg.channels.size(), cfg.threshold);
    r.mmd = mmd(preds, gts, MmdConfig{cfg.mmd_pool});
    EceOptions eopt;
    eopt.num_bins = cfg.ece_bins;
    eopt.per_class = cfg.ece_per_class;
    const EceResult l1 = ece(confs, gts, EceVariant::l1_guo, eopt);
    const EceResult l2 = ece(confs, gts, EceVariant::l2_kumar, eopt);
    r.ece_l1 = l1.value;
    r.ece_l2 = l2.value;
    r.bins = l1.bins;
    return r;
}

std::string method_tag(const RunConfig& cfg) {
    std::string tag = "mapprior";
    if (!cfg.output_loss) tag += "-no-outloss";
    if (!cfg.condition_on_features) tag += "-no-feat";
    if (cfg.sample_mode == "one_step") tag += "-one-step";
    return tag;
}

void cmd_eval(const RunConfig& cfg) {
    auto val = read_split(cfg.data_dir, Split::val);
    std::vector<LayoutGrid> gts, noisy_bin, finals;
    std::vector<SoftLayout> gt_conf, noisy_soft, bundle_conf;
    for (std::size_t i = 0; i < val.size(); ++i) {
        const Example& ex = val[i];
        gts.push_back(ex.gt);
        gt_conf.push_back(SoftLayout::from(ex.gt));
        noisy_bin.push_back(ex.noisy.binarize(cfg.threshold));
        noisy_soft.push_back(ex.noisy);
        SampleBundle b =
            load_bundle(fs::path(cfg.output_dir) / "bundles" / val_dir_name(static_cast<int>(i)));
        finals.push_back(b.final);
        bundle_conf.push_back(b.confidence);
    }

    nlohmann::json methods = nlohmann::json::object();
    auto add = [&](const std::string& name, const EvalReport& r) {
        nlohmann::json entry;
        entry["report"] = nlohmann::json::parse(r.to_json());
        entry["csv_header"] = r.csv_header();
        entry["csv_row"] = r.csv_row();
        methods[name] = entry;
        std::cout << name << ": mean_iou " << r.mean_iou << ", mmd " << r.mmd << ", ece_l1 "
                  << r.ece_l1 << "\n";
    };
    // The identity row pins the metric plumbing: a perfect prediction must
    // score IoU 1, MMD 0, ECE 0 on every run.
    add("gt-identity", make_report(gts, gt_conf, gts, cfg));
    add("noisy", make_report(noisy_bin, noisy_soft, gts, cfg));
    add(method_tag(cfg), make_report(finals, bundle_conf, gts, cfg));

    nlohmann::json j;
    j["methods"] = methods;
    j["config_hash"] = cfg.config_hash();
    j["num_scenes"] = val.size();
    write_json_file(fs::path(cfg.output_dir) / "eval.json", j);
    write_resolved_config(cfg);
}

void cmd_perpetual(const RunConfig& cfg) {
    PriorModel prior = load_prior(prior_path(cfg), cfg);
    SamplerModel sampler = load_sampler(sampler_path(cfg), cfg, read_checkpoint_meta(prior_path(cfg)));
    const uint64_t root = derive_seed(cfg.seed, 41);  // perpetual stream
    TokenCanvas canvas = init_canvas(prior, sampler, cfg, root);
    canvas = extend(canvas, prior, sampler, cfg, cfg.perp_steps, root);

    const fs::path dir = fs::path(cfg.output_dir) / "perpetual";
    export_strip(canvas, dir);
    nlohmann::json j;
    j["steps"] = cfg.perp_steps;
    j["rows"] = canvas.rows;
    j["cols"] = canvas.cols;
    j["strip_height_px"] = canvas.pixels.height;
    j["strip_width_px"] = canvas.pixels.width;
    j["seam_mean_abs"] = mean_seam_stat(canvas);
    j["seed"] = cfg.seed;
    write_json_file(dir / "summary.json", j);
    write_resolved_config(cfg);
    std::cout << "perpetual strip: " << canvas.cols << " token columns ("
              << canvas.pixels.width << " px), mean seam " << mean_seam_stat(canvas) << "\n";
}

void cmd_report(const RunConfig& cfg) {
    const fs::path eval_path = fs::path(cfg.output_dir) / "eval.json";
    if (!fs::exists(eval_path)) throw DataError("eval results not found: " + eval_path.string());
    std::ifstream f(eval_path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("eval.json parse error: ") + e.what(), 0);
    }
    if (!j.contains("methods") || !j["methods"].is_object() || j["methods"].empty()) {
        throw FormatError("eval.json has no methods table", 0);
    }

    std::string header;
    std::ostringstream rows, rel;
    rel.precision(6);
    rel << std::fixed;
    rel << "method,bin,count,accuracy,confidence\n";
    for (auto it = j["methods"].begin(); it != j["methods"].end(); ++it) {
        const nlohmann::json& entry = it.value();
        if (!entry.contains("csv_header") || !entry.contains("csv_row")) {
            throw FormatError("method " + it.key() + " lacks csv fields", 0);
        }
        const std::string h = entry["csv_header"].get<std::string>();
        if (header.empty()) {
            header = h;
        } else if (h != header) {
            throw FormatError("method " + it.key() + " reports a different column set", 0);
        }
        rows << it.key() << "," << entry["csv_row"].get<std::string>() << "\n";
        const nlohmann::json rep = entry.value("report", nlohmann::json::object());
        if (rep.contains("bins")) {
            int bi = 0;
            for (const nlohmann::json& b : rep["bins"]) {
                rel << it.key() << "," << bi++ << "," << b.value("n", 0) << ","
                    << b.value("acc", 0.0) << "," << b.value("conf", 0.0) << "\n";
            }
        }
    }

    const fs::path report_path = fs::path(cfg.output_dir) / "report.csv";
    std::ofstream rf(report_path, std::ios::binary);
    if (!rf) throw DataError("cannot write " + report_path.string());
    rf << "method," << header << "\n" << rows.str();
    const fs::path rel_path = fs::path(cfg.output_dir) / "reliability.csv";
    std::ofstream lf(rel_path, std::ios::binary);
    if (!lf) throw DataError("cannot write " + rel_path.string());
    lf << rel.str();
    write_resolved_config(cfg);
    std::cout << "wrote " << report_path.string() << " and " << rel_path.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic layout prior: data generation, training, refinement, evaluation"};
    app.require_subcommand(1);

    CliArgs args;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"gen-data", "generate the synthetic train/val dataset"},
        {"train-prior", "train the discrete layout autoencoder"},
        {"train-sampler", "train the latent transformer against a frozen prior"},
        {"infer", "refine every validation scene into a sample bundle"},
        {"eval", "score bundles against ground truth and the noisy baseline"},
        {"perpetual", "outpaint an endless layout strip"},
        {"report", "turn eval results into csv tables"},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [name, desc] : commands) {
        CLI::App* s = app.add_subcommand(name, desc);
        s->add_option("--config", args.config_path, "JSON run configuration");
        s->add_option("--preset", args.preset, "builtin baseline when no config file is given")
            ->check(CLI::IsMember({"toy", "paper", "smoke"}));
        s->add_option("--seed", args.seed, "override the run seed");
        s->add_flag("--ablate-output-loss", args.ablate_output_loss,
                    "drop the decoded-output loss term");
        s->add_flag("--no-feature-conditioning", args.no_feature_conditioning,
                    "ignore sensor features in the sampler");
        subs.push_back(s);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // bad arguments are configuration errors
    }

    std::string cmd;
    for (CLI::App* s : subs) {
        if (s->parsed()) {
            cmd = s->get_name();
            args.seed_given = s->count("--seed") > 0;
        }
    }

    try {
        const RunConfig cfg = resolve_config(args);
        fix_determinism(cfg.seed);
        if (cmd == "gen-data") cmd_gen_data(cfg);
        else if (cmd == "train-prior") cmd_train_prior(cfg);
        else if (cmd == "train-sampler") cmd_train_sampler(cfg);
        else if (cmd == "infer") cmd_infer(cfg);
        else if (cmd == "eval") cmd_eval(cfg);
        else if (cmd == "perpetual") cmd_perpetual(cfg);
        else if (cmd == "report") cmd_report(cfg);
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
