// End-to-end checks of the command-line binary: every subcommand runs against
// the smoke preset in a scratch directory, exit codes follow the documented
// mapping, and reruns reproduce artifacts byte for byte.
#include <cstdio>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mapprior/hashing.hpp"

#include "json.hpp"
#include "torch_doctest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
    int code = -1;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(MAPPRIOR_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    char buf[512];
    while (std::fgets(buf, sizeof(buf), pipe) != nullptr) r.output += buf;
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

// One scratch tree shared by the whole file; the first case that needs a
// trained artifact builds it, later cases reuse it.
const fs::path& root() {
    static const fs::path p = [] {
        fs::path d = fs::temp_directory_path() / "mapprior_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return p;
}

std::string config_path() {
    static const std::string path = [] {
        const fs::path p = root() / "run.json";
        json j;
        j["preset"] = "smoke";
        j["seed"] = 5;
        j["data_dir"] = (root() / "data").string();
        j["output_dir"] = (root() / "out").string();
        std::ofstream f(p);
        f << j.dump(2);
        return p.string();
    }();
    return path;
}

json read_json(const fs::path& p) {
    std::ifstream f(p);
    REQUIRE(f.good());
    return json::parse(f);
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream f(p);
    REQUIRE(f.good());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(f, line)) lines.push_back(line);
    return lines;
}

// Lazily run the pipeline stages once; every stage is cheap at smoke scale.
void ensure_dataset() {
    if (!fs::exists(root() / "data" / "manifest.json")) {
        REQUIRE(run_cli("gen-data --config " + config_path()).code == 0);
    }
}

void ensure_trained() {
    ensure_dataset();
    if (!fs::exists(root() / "out" / "sampler.ckpt")) {
        REQUIRE(run_cli("train-prior --config " + config_path()).code == 0);
        REQUIRE(run_cli("train-sampler --config " + config_path()).code == 0);
    }
}

void ensure_bundles() {
    ensure_trained();
    if (!fs::exists(root() / "out" / "bundles" / "val_00000" / "meta.json")) {
        REQUIRE(run_cli("infer --config " + config_path()).code == 0);
    }
}

void ensure_eval() {
    ensure_bundles();
    if (!fs::exists(root() / "out" / "eval.json")) {
        REQUIRE(run_cli("eval --config " + config_path()).code == 0);
    }
}

}  // namespace

TEST_CASE("gen-data writes a complete deterministic dataset") {
    ensure_dataset();
    const json manifest = read_json(root() / "data" / "manifest.json");
    CHECK(manifest["count_train"].get<int>() == 32);
    CHECK(manifest["count_val"].get<int>() == 8);
    CHECK(manifest["seed"].get<uint64_t>() == 5);
    CHECK(manifest["config_hash"].get<std::string>().size() == 64);
    CHECK(manifest["files"].size() == 3 * (32 + 8));
    for (const auto& [name, sha] : manifest["files"].items()) {
        CHECK(fs::exists(root() / "data" / name));
        CHECK(sha.get<std::string>().size() == 64);
    }
    CHECK(fs::exists(root() / "data" / "resolved_config.json"));

    // Same preset and seed into a different directory: identical manifest.
    const fs::path other_cfg = root() / "run_b.json";
    {
        json j;
        j["preset"] = "smoke";
        j["seed"] = 5;
        j["data_dir"] = (root() / "data_b").string();
        j["output_dir"] = (root() / "out_b").string();
        std::ofstream f(other_cfg);
        f << j.dump(2);
    }
    REQUIRE(run_cli("gen-data --config " + other_cfg.string()).code == 0);
    CHECK(mapprior::sha256_file((root() / "data" / "manifest.json").string()) ==
          mapprior::sha256_file((root() / "data_b" / "manifest.json").string()));
}

TEST_CASE("bad invocations exit with the config code and leave no output") {
    const fs::path bad = root() / "bad.json";
    {
        std::ofstream f(bad);
        f << R"({"preset":"smoke","dataset_train":0,"data_dir":")"
          << (root() / "never").string() << R"("})";
    }
    auto r = run_cli("gen-data --config " + bad.string());
    CHECK(r.code == 2);
    CHECK_FALSE(fs::exists(root() / "never"));

    CHECK(run_cli("gen-data --definitely-not-a-flag").code == 2);
    CHECK(run_cli("train-prior --config " + (root() / "missing.json").string()).code == 2);
    CHECK(run_cli("gen-data --config " + config_path() + " --preset toy").code == 2);
    CHECK(run_cli("--help").code == 0);
}

TEST_CASE("training commands leave checkpoints, loss curves, and the resolved config") {
    ensure_trained();
    const fs::path out = root() / "out";
    CHECK(fs::exists(out / "prior.ckpt"));
    CHECK(fs::exists(out / "sampler.ckpt"));
    CHECK(fs::exists(out / "resolved_config.json"));

    const auto prior_csv = read_lines(out / "prior_loss.csv");
    REQUIRE(prior_csv.size() == 201);  // header + one row per smoke step
    CHECK(prior_csv[0].substr(0, 5) == "step,");
    const auto sampler_csv = read_lines(out / "sampler_loss.csv");
    REQUIRE(sampler_csv.size() == 201);
    CHECK(sampler_csv[0] == "step,ce,out,ce_one,total");

    const json resolved = read_json(out / "resolved_config.json");
    CHECK(resolved["preset"].get<std::string>() == "smoke");
    CHECK(resolved["seed"].get<uint64_t>() == 5);
}

TEST_CASE("a sampler refuses to train against a mismatched prior") {
    ensure_trained();
    const fs::path out = root() / "out_mismatch";
    fs::create_directories(out);
    fs::copy_file(root() / "out" / "prior.ckpt", out / "prior.ckpt",
                  fs::copy_options::overwrite_existing);
    const fs::path cfg = root() / "mismatch.json";
    {
        json j;
        j["preset"] = "smoke";
        j["seed"] = 5;
        j["codebook_size"] = 32;  // smoke trains with 64
        j["data_dir"] = (root() / "data").string();
        j["output_dir"] = out.string();
        std::ofstream f(cfg);
        f << j.dump(2);
    }
    auto r = run_cli("train-sampler --config " + cfg.string());
    CHECK(r.code == 2);
    CHECK(r.output.find("different config") != std::string::npos);
    CHECK_FALSE(fs::exists(out / "sampler.ckpt"));
}

TEST_CASE("infer emits one bundle per validation scene") {
    ensure_bundles();
    for (int i = 0; i < 8; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "val_%05d", i);
        const fs::path dir = root() / "out" / "bundles" / name;
        CHECK(fs::exists(dir / "final.bml"));
        CHECK(fs::exists(dir / "confidence.bml"));
        CHECK(fs::exists(dir / "uncertainty.bml"));
        const json meta = read_json(dir / "meta.json");
        CHECK(meta["mode"].get<std::string>() == "autoregressive");
        CHECK(meta["prior_sha256"].get<std::string>() ==
              mapprior::sha256_file((root() / "out" / "prior.ckpt").string()));
        CHECK(meta["k"].get<int>() == 15);
    }
}

TEST_CASE("eval pins the identity row and report renders its tables") {
    ensure_eval();
    const json ev = read_json(root() / "out" / "eval.json");
    REQUIRE(ev.contains("methods"));
    const json& methods = ev["methods"];
    REQUIRE(methods.contains("gt-identity"));
    REQUIRE(methods.contains("noisy"));
    REQUIRE(methods.contains("mapprior"));

    const json& ident = methods["gt-identity"]["report"];
    CHECK(ident["mean_iou"].get<double>() == 1.0);
    CHECK(ident["mmd"].get<double>() == 0.0);
    CHECK(ident["ece_l1"].get<double>() == 0.0);
    CHECK(ident["ece_l2"].get<double>() == 0.0);
    for (const auto& [cls, v] : ident["iou"].items()) CHECK(v.get<double>() == 1.0);

    REQUIRE(run_cli("report --config " + config_path()).code == 0);
    const auto report = read_lines(root() / "out" / "report.csv");
    REQUIRE(report.size() == 4);  // header + three methods
    CHECK(report[0] ==
          "method,drivable,ped_crossing,walkway,stop_line,carpark,divider,mean_iou,mmd,ece_l1,"
          "ece_l2");
    CHECK(report[1].substr(0, 12) == "gt-identity,");

    const auto rel = read_lines(root() / "out" / "reliability.csv");
    CHECK(rel[0] == "method,bin,count,accuracy,confidence");
    CHECK(rel.size() == 1 + 3 * 10);  // ten bins per method
}

TEST_CASE("perpetual exports a strip with its step log") {
    ensure_trained();
    REQUIRE(run_cli("perpetual --config " + config_path()).code == 0);
    const fs::path dir = root() / "out" / "perpetual";
    CHECK(fs::exists(dir / "strip.bml"));
    CHECK(fs::exists(dir / "drivable.png"));
    const json summary = read_json(dir / "summary.json");
    CHECK(summary["steps"].get<int>() == 8);
    CHECK(summary["seam_mean_abs"].get<double>() >= 0.0);
    CHECK(summary["cols"].get<int>() > summary["rows"].get<int>());
    const auto steps = read_lines(dir / "steps.jsonl");
    CHECK(steps.size() == 9);  // the seeded window plus eight extensions
}

TEST_CASE("reruns reproduce artifacts byte for byte") {
    ensure_eval();
    const auto deep_hash = [](const fs::path& dir) {
        std::ostringstream all;
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(dir)) {
            if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) all << mapprior::sha256_file(f.string()) << "\n";
        return mapprior::sha256_hex(all.str());
    };

    const std::string bundles_before = deep_hash(root() / "out" / "bundles");
    const std::string eval_before = mapprior::sha256_file((root() / "out" / "eval.json").string());
    REQUIRE(run_cli("infer --config " + config_path()).code == 0);
    REQUIRE(run_cli("eval --config " + config_path()).code == 0);
    CHECK(deep_hash(root() / "out" / "bundles") == bundles_before);
    CHECK(mapprior::sha256_file((root() / "out" / "eval.json").string()) == eval_before);

    // Retraining from the same dataset and seed reproduces the checkpoint.
    const fs::path cfg = root() / "retrain.json";
    {
        json j;
        j["preset"] = "smoke";
        j["seed"] = 5;
        j["data_dir"] = (root() / "data").string();
        j["output_dir"] = (root() / "out_retrain").string();
        std::ofstream f(cfg);
        f << j.dump(2);
    }
    REQUIRE(run_cli("train-prior --config " + cfg.string()).code == 0);
    CHECK(mapprior::sha256_file((root() / "out_retrain" / "prior.ckpt").string()) ==
          mapprior::sha256_file((root() / "out" / "prior.ckpt").string()));
}
