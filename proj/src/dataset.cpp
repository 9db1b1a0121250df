#include "mapprior/dataset.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "mapprior/bml.hpp"
#include "mapprior/errors.hpp"
#include "mapprior/hashing.hpp"
#include "mapprior/rng.hpp"

namespace fs = std::filesystem;

namespace mapprior {

GeneratorSpec generator_spec(const RunConfig& cfg) {
    GeneratorSpec gs;
    gs.channels = cfg.channels;
    gs.height = cfg.grid_h;
    gs.width = cfg.grid_w;
    gs.resolution = cfg.resolution;
    gs.validate();
    return gs;
}

Example make_example(const RunConfig& cfg, Split split, int index) {
    const uint64_t tag = split == Split::train ? 1 : 2;
    const uint64_t seed = derive_seed(derive_seed(cfg.seed, tag), static_cast<uint64_t>(index));

    Example ex;
    ex.gt = generate_synthetic_layout(seed, generator_spec(cfg));
    CorruptionParams params = cfg.corruption;
    params.seed = derive_seed(seed, 0xc0ffee);
    auto res = corrupt(ex.gt, params);
    ex.noisy = std::move(res.noisy);
    ex.features = std::move(res.features);
    return ex;
}

std::vector<Example> make_dataset(const RunConfig& cfg, Split split, int count) {
    std::vector<Example> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(make_example(cfg, split, i));
    return out;
}

namespace {

constexpr char kFeatureMagic[4] = {'B', 'M', 'F', '1'};

void put_u32(std::ofstream& f, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t take_u32(std::ifstream& f, const fs::path& path, std::size_t offset) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4)) {
        throw FormatError("truncated feature file: " + path.string(), offset);
    }
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

std::string split_name(Split split) { return split == Split::train ? "train" : "val"; }

std::string triple_name(const char* stem, int index, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%05d.%s", stem, index, ext);
    return buf;
}

}  // namespace

void write_features(const PseudoSensor& x, const std::filesystem::path& path) {
    x.validate();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path.string());
    f.write(kFeatureMagic, 4);
    put_u32(f, static_cast<uint32_t>(x.feature_channels));
    put_u32(f, static_cast<uint32_t>(x.height));
    put_u32(f, static_cast<uint32_t>(x.width));
    f.write(reinterpret_cast<const char*>(x.data.data()),
            static_cast<std::streamsize>(x.data.size() * sizeof(float)));
    if (!f) throw DataError("write failed: " + path.string());
}

PseudoSensor read_features(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open feature file: " + path.string());
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, kFeatureMagic, 4) != 0) {
        throw FormatError("bad feature-file magic: " + path.string(), 0);
    }
    PseudoSensor x;
    x.feature_channels = static_cast<int>(take_u32(f, path, 4));
    x.height = static_cast<int>(take_u32(f, path, 8));
    x.width = static_cast<int>(take_u32(f, path, 12));
    if (x.feature_channels <= 0 || x.height <= 0 || x.width <= 0) {
        throw FormatError("non-positive feature dims: " + path.string(), 4);
    }
    const std::size_t n = static_cast<std::size_t>(x.feature_channels) * x.height * x.width;
    x.data.resize(n);
    if (!f.read(reinterpret_cast<char*>(x.data.data()),
                static_cast<std::streamsize>(n * sizeof(float)))) {
        throw FormatError("truncated feature payload: " + path.string(), 16);
    }
    x.validate();
    return x;
}

void write_dataset(const RunConfig& cfg) {
    cfg.validate();
    const fs::path root = cfg.data_dir;
    fs::create_directories(root / "train");
    fs::create_directories(root / "val");

    nlohmann::json files = nlohmann::json::object();
    const std::pair<Split, int> splits[] = {{Split::train, cfg.dataset_train},
                                            {Split::val, cfg.dataset_val}};
    for (const auto& [split, count] : splits) {
        const fs::path dir = root / split_name(split);
        for (int i = 0; i < count; ++i) {
            Example ex = make_example(cfg, split, i);
            const std::string gt_name = triple_name("gt", i, "bml");
            const std::string noisy_name = triple_name("noisy", i, "bml");
            const std::string feat_name = triple_name("features", i, "bmf");
            write_bml(ex.gt, dir / gt_name);
            write_bml(ex.noisy, dir / noisy_name);
            write_features(ex.features, dir / feat_name);
            const std::string prefix = split_name(split) + "/";
            files[prefix + gt_name] = sha256_file(dir / gt_name);
            files[prefix + noisy_name] = sha256_file(dir / noisy_name);
            files[prefix + feat_name] = sha256_file(dir / feat_name);
        }
    }

    nlohmann::json manifest;
    manifest["config_hash"] = cfg.config_hash();
    manifest["seed"] = cfg.seed;
    manifest["count_train"] = cfg.dataset_train;
    manifest["count_val"] = cfg.dataset_val;
    manifest["files"] = files;
    std::ofstream mf(root / "manifest.json");
    if (!mf) throw DataError("cannot write manifest under " + root.string());
    mf << manifest.dump(2) << "\n";
}

std::vector<Example> read_split(const std::string& data_dir, Split split) {
    const fs::path root = data_dir;
    const fs::path manifest_path = root / "manifest.json";
    if (!fs::exists(manifest_path)) {
        throw DataError("dataset manifest not found: " + manifest_path.string());
    }
    std::ifstream mf(manifest_path);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(mf);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest parse error: ") + e.what(), 0);
    }
    const std::string count_key = split == Split::train ? "count_train" : "count_val";
    if (!manifest.contains(count_key) || !manifest[count_key].is_number_integer()) {
        throw FormatError("manifest missing " + count_key + ": " + manifest_path.string(), 0);
    }
    const int count = manifest[count_key].get<int>();
    if (count < 0) throw FormatError(count_key + " is negative: " + manifest_path.string(), 0);

    std::vector<Example> out;
    out.reserve(static_cast<std::size_t>(count));
    const fs::path dir = root / split_name(split);
    for (int i = 0; i < count; ++i) {
        Example ex;
        ex.gt = read_bml_binary(dir / triple_name("gt", i, "bml"));
        ex.noisy = read_bml_soft(dir / triple_name("noisy", i, "bml"));
        ex.features = read_features(dir / triple_name("features", i, "bmf"));
        if (ex.noisy.height != ex.gt.height || ex.noisy.width != ex.gt.width ||
            ex.noisy.channels != ex.gt.channels || ex.features.height != ex.gt.height ||
            ex.features.width != ex.gt.width) {
            throw ShapeError("triple " + std::to_string(i) + " in " + dir.string() +
                             " has mismatched shapes");
        }
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace mapprior
