#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mapprior/config.hpp"
#include "mapprior/layout.hpp"
#include "mapprior/sampler_model.hpp"
#include "mapprior/vq_model.hpp"

namespace mapprior {

// One outpainting step: the context columns it read (in model sampling
// order, which is canvas column-major), the columns it appended, and the
// stream that drew them.
struct PerpetualStep {
    int index = 0;
    uint64_t seed = 0;
    int ctx_col_start = 0;
    std::vector<int32_t> context;  // empty for the initial window
    int new_col_start = 0;
    int new_cols = 0;
    double seam_mean_abs = 0.0;  // mean |delta| over overwritten overlap pixels

    bool operator==(const PerpetualStep& other) const = default;
};

// Left-to-right strip of latent tokens plus its decoded pixel canvas.
// A model window spans `window` canvas columns — one per model grid row —
// so a window's leading columns form a row-major prefix of the model's
// sampling order, and extending the strip is ordinary prefix-conditioned
// sampling. The decoded window is transposed to match before pasting;
// the newest window wins on pixel overlap.
struct TokenCanvas {
    int rows = 0;    // canvas token rows == model grid columns
    int cols = 0;    // W_tok; grows by `stride` per extension step
    int window = 0;  // model window width, in canvas columns
    int stride = 0;  // freshly sampled columns per step
    int pixels_per_token = 0;
    std::vector<int32_t> tokens;  // column-major: tokens[c * rows + r]
    SoftLayout pixels;
    std::vector<PerpetualStep> log;

    int32_t token(int r, int c) const {
        return tokens[static_cast<std::size_t>(c) * static_cast<std::size_t>(rows) + r];
    }
    void validate(int codebook_size) const;

    bool operator==(const TokenCanvas& other) const = default;
};

// Samples the first window unconditionally (null guidance, zero features).
// Deterministic per seed; random streams: the initial window consumes
// (seed, 0) and extension step i consumes (seed, log index i >= 1).
TokenCanvas init_canvas(PriorModel& prior, SamplerModel& sampler, const RunConfig& cfg,
                        uint64_t seed);

// Appends `steps` windows, each conditioned on the previous window - stride
// columns as a fixed token prefix. steps = 0 returns the canvas unchanged.
TokenCanvas extend(const TokenCanvas& canvas, PriorModel& prior, SamplerModel& sampler,
                   const RunConfig& cfg, int steps, uint64_t seed);

// Mean of per-step seam statistics over extension steps; 0 when none ran.
double mean_seam_stat(const TokenCanvas& canvas);

// dir/strip.bml (pixel canvas) + dir/<channel>.png per channel + dir/steps.jsonl.
void export_strip(const TokenCanvas& canvas, const std::filesystem::path& dir);

}  // namespace mapprior
