#include "mapprior/perpetual.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "mapprior/bml.hpp"
#include "mapprior/errors.hpp"
#include "mapprior/png_io.hpp"
#include "mapprior/rng.hpp"
#include "mapprior/sampler_ops.hpp"
#include "mapprior/tensor_bridge.hpp"
#include "mapprior/vq_ops.hpp"

namespace mapprior {

void TokenCanvas::validate(int codebook_size) const {
    if (rows <= 0 || cols <= 0) throw ShapeError("token canvas must be non-empty");
    if (window < 2 || stride < 1 || stride >= window) {
        throw ConfigError("canvas window/stride geometry is invalid");
    }
    if (cols < window) throw ShapeError("canvas narrower than one window");
    if (pixels_per_token <= 0) throw ShapeError("pixels_per_token must be positive");
    if (tokens.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
        throw ShapeError("token storage does not match the canvas shape");
    }
    for (int32_t t : tokens) {
        if (t < 0 || t >= codebook_size) throw DataError("canvas token outside the codebook");
    }
    if (pixels.height != rows * pixels_per_token || pixels.width != cols * pixels_per_token) {
        throw ShapeError("pixel canvas does not match the token canvas");
    }
}

namespace {

void check_models(const PriorModel& prior, const SamplerModel& sampler) {
    if (prior->codebook_size != sampler->codebook_size || prior->latent_h != sampler->latent_h ||
        prior->latent_w != sampler->latent_w) {
        throw ConfigError("prior and sampler disagree on the token grid");
    }
    if (prior->latent_h != prior->latent_w) {
        throw ConfigError("perpetual generation needs a square token grid");
    }
}

torch::Tensor neutral_features(const SamplerModel& sampler, const RunConfig& cfg) {
    if (sampler->extractor.is_empty()) return {};
    return torch::zeros(
        {static_cast<long>(cfg.channels.size()) + 2, cfg.grid_h, cfg.grid_w});
}

// Decoded window as [C, H_px, window*f], spatially transposed so model grid
// rows run along canvas columns; clamped like every decoded layout.
torch::Tensor decode_window(PriorModel& prior, const TokenGrid& grid) {
    return decode_tensor(prior, grid).clamp(0.0, 1.0).transpose(1, 2).contiguous();
}

int draw_index(const std::vector<double>& probs, Rng& rng) {
    const double u = rng.uniform();
    double cum = 0.0;
    int last_pos = 0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        if (probs[k] <= 0.0) continue;
        last_pos = static_cast<int>(k);
        cum += probs[k];
        if (u < cum) return static_cast<int>(k);
    }
    return last_pos;
}

void paste_window(SoftLayout& pixels, const torch::Tensor& window_px, int col_px_start) {
    const auto C = window_px.size(0);
    const auto H = window_px.size(1);
    const auto W = window_px.size(2);
    auto acc = window_px.accessor<float, 3>();
    for (int64_t c = 0; c < C; ++c) {
        for (int64_t r = 0; r < H; ++r) {
            for (int64_t x = 0; x < W; ++x) {
                pixels.at(static_cast<int>(c), static_cast<int>(r),
                          col_px_start + static_cast<int>(x)) = acc[c][r][x];
            }
        }
    }
}

}  // namespace

TokenCanvas init_canvas(PriorModel& prior, SamplerModel& sampler, const RunConfig& cfg,
                        uint64_t seed) {
    check_models(prior, sampler);

    SamplingParams params;
    params.nucleus_p = cfg.nucleus_p;
    params.seed = seed;  // the first window draws from stream (seed, 0)
    auto grid = sample_autoregressive(sampler, null_guidance(sampler),
                                      neutral_features(sampler, cfg), params);

    TokenCanvas canvas;
    canvas.rows = prior->latent_w;
    canvas.cols = prior->latent_h;
    canvas.window = prior->latent_h;
    canvas.stride = cfg.perp_stride;
    canvas.pixels_per_token = cfg.grid_h / prior->latent_h;
    canvas.tokens.resize(static_cast<std::size_t>(canvas.rows) * canvas.cols);
    for (int mr = 0; mr < grid.h; ++mr) {
        for (int mc = 0; mc < grid.w; ++mc) {
            canvas.tokens[static_cast<std::size_t>(mr) * canvas.rows + mc] =
                grid.indices[static_cast<std::size_t>(mr) * grid.w + mc];
        }
    }
    canvas.pixels = to_soft_layout(decode_window(prior, grid), cfg.channels, cfg.resolution);

    PerpetualStep first;
    first.index = 0;
    first.seed = seed;
    first.ctx_col_start = 0;
    first.new_col_start = 0;
    first.new_cols = canvas.window;
    canvas.log.push_back(std::move(first));

    canvas.validate(prior->codebook_size);
    return canvas;
}

TokenCanvas extend(const TokenCanvas& canvas, PriorModel& prior, SamplerModel& sampler,
                   const RunConfig& cfg, int steps, uint64_t seed) {
    if (steps < 0) throw ContractError("extension step count must be >= 0");
    check_models(prior, sampler);
    if (canvas.window != prior->latent_h || canvas.rows != prior->latent_w) {
        throw ConfigError("canvas geometry does not match the models");
    }
    canvas.validate(prior->codebook_size);

    TokenCanvas out = canvas;
    if (steps == 0) return out;

    const int w = out.window;
    const int s = out.stride;
    const int ctx_w = w - s;
    const int rows = out.rows;
    const int f = out.pixels_per_token;
    const int n_tok = sampler->n_tok;
    auto guidance = null_guidance(sampler);
    auto feats = neutral_features(sampler, cfg);

    for (int step = 0; step < steps; ++step) {
        PerpetualStep entry;
        entry.index = static_cast<int>(out.log.size());
        entry.seed = derive_seed(seed, static_cast<uint64_t>(entry.index));
        entry.ctx_col_start = out.cols - ctx_w;
        entry.new_col_start = out.cols;
        entry.new_cols = s;
        Rng rng(entry.seed);

        // fixed prefix: the trailing context columns in model order
        std::vector<int32_t> full;
        full.reserve(static_cast<std::size_t>(n_tok));
        for (int mr = 0; mr < ctx_w; ++mr) {
            for (int mc = 0; mc < rows; ++mc) {
                full.push_back(out.token(mc, entry.ctx_col_start + mr));
            }
        }
        entry.context = full;

        while (static_cast<int>(full.size()) < n_tok) {
            auto dist = next_token_dist(sampler, guidance, feats, full);
            full.push_back(draw_index(nucleus_filter(dist, cfg.nucleus_p), rng));
        }
        TokenGrid grid;
        grid.h = prior->latent_h;
        grid.w = prior->latent_w;
        grid.indices = full;

        // append the s fresh token columns
        out.cols += s;
        out.tokens.resize(static_cast<std::size_t>(out.rows) * out.cols);
        for (int mr = ctx_w; mr < w; ++mr) {
            const int col = entry.new_col_start + (mr - ctx_w);
            for (int mc = 0; mc < rows; ++mc) {
                out.tokens[static_cast<std::size_t>(col) * rows + mc] =
                    full[static_cast<std::size_t>(mr) * rows + mc];
            }
        }

        auto window_px = decode_window(prior, grid);  // [C, rows*f, w*f]
        auto acc = window_px.accessor<float, 3>();
        const int paste_px = entry.ctx_col_start * f;

        // seam statistic over the pixels the new window overwrites
        double seam = 0.0;
        std::size_t n_seam = 0;
        for (int c = 0; c < out.pixels.num_channels(); ++c) {
            for (int r = 0; r < out.pixels.height; ++r) {
                for (int x = 0; x < ctx_w * f; ++x) {
                    seam += std::abs(out.pixels.at(c, r, paste_px + x) - acc[c][r][x]);
                    ++n_seam;
                }
            }
        }
        entry.seam_mean_abs = n_seam ? seam / static_cast<double>(n_seam) : 0.0;

        // widen the pixel canvas, then overwrite with the newest window
        SoftLayout grown = SoftLayout::zeros(out.pixels.channels, out.pixels.height,
                                             out.cols * f, out.pixels.resolution);
        for (int c = 0; c < out.pixels.num_channels(); ++c) {
            for (int r = 0; r < out.pixels.height; ++r) {
                for (int x = 0; x < out.pixels.width; ++x) {
                    grown.at(c, r, x) = out.pixels.at(c, r, x);
                }
            }
        }
        out.pixels = std::move(grown);
        paste_window(out.pixels, window_px, paste_px);

        out.log.push_back(std::move(entry));
    }

    out.validate(prior->codebook_size);
    return out;
}

double mean_seam_stat(const TokenCanvas& canvas) {
    double sum = 0.0;
    int n = 0;
    for (const auto& e : canvas.log) {
        if (e.context.empty()) continue;
        sum += e.seam_mean_abs;
        ++n;
    }
    return n ? sum / n : 0.0;
}

void export_strip(const TokenCanvas& canvas, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_bml(canvas.pixels, dir / "strip.bml");

    std::ofstream jl(dir / "steps.jsonl");
    if (!jl) throw DataError("cannot write steps.jsonl under " + dir.string());
    for (const auto& e : canvas.log) {
        nlohmann::json j;
        j["index"] = e.index;
        j["seed"] = e.seed;
        j["ctx_col_start"] = e.ctx_col_start;
        j["context"] = e.context;
        j["new_col_start"] = e.new_col_start;
        j["new_cols"] = e.new_cols;
        j["seam_mean_abs"] = e.seam_mean_abs;
        jl << j.dump() << "\n";
    }

    const auto& px = canvas.pixels;
    std::vector<uint8_t> gray(static_cast<std::size_t>(px.height) *
                              static_cast<std::size_t>(px.width));
    for (int c = 0; c < px.num_channels(); ++c) {
        for (int r = 0; r < px.height; ++r) {
            for (int x = 0; x < px.width; ++x) {
                const float v = std::min(1.0f, std::max(0.0f, px.at(c, r, x)));
                gray[static_cast<std::size_t>(r) * px.width + x] =
                    static_cast<uint8_t>(std::lround(v * 255.0f));
            }
        }
        write_png_gray8(dir / (px.channels[static_cast<std::size_t>(c)] + ".png"), px.width,
                        px.height, gray);
    }
}

}  // namespace mapprior
