#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mapprior/config.hpp"
#include "mapprior/corruption.hpp"
#include "mapprior/synthetic.hpp"

namespace mapprior {

// One supervised triple: clean layout, degraded estimate, sensor features.
struct Example {
    LayoutGrid gt;
    SoftLayout noisy;
    PseudoSensor features;
};

enum class Split { train, val };

GeneratorSpec generator_spec(const RunConfig& cfg);

// Deterministic in (cfg.seed, split, index).
Example make_example(const RunConfig& cfg, Split split, int index);

std::vector<Example> make_dataset(const RunConfig& cfg, Split split, int count);

// Sensor features hold signed values, so they get their own container format
// ("BMF1" magic, u32 C/H/W, raw float32 payload, little-endian).
void write_features(const PseudoSensor& x, const std::filesystem::path& path);
PseudoSensor read_features(const std::filesystem::path& path);

// On-disk dataset: <data_dir>/{train,val}/ hold numbered triples
// (gt_%05d.bml, noisy_%05d.bml, features_%05d.bmf) and <data_dir>/manifest.json
// records the counts, generating seed, config hash, and a sha256 per file.
void write_dataset(const RunConfig& cfg);
std::vector<Example> read_split(const std::string& data_dir, Split split);

}  // namespace mapprior
