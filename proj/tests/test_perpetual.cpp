#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mapprior/bml.hpp"
#include "mapprior/config.hpp"
#include "mapprior/errors.hpp"
#include "mapprior/perpetual.hpp"
#include "mapprior/png_io.hpp"
#include "mapprior/sampler_model.hpp"
#include "mapprior/sampler_ops.hpp"
#include "mapprior/tensor_bridge.hpp"
#include "mapprior/vq_model.hpp"
#include "torch_doctest.hpp"

using namespace mapprior;

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

RunConfig quad_config() {
    auto m = preset_config("smoke");
    m.grid_h = 16;
    m.grid_w = 16;
    m.latent_h = 2;
    m.latent_w = 2;
    m.enc_channels = {8, 16, 32};
    m.enc_downsamples = 3;
    m.codebook_size = 8;
    m.codebook_dim = 8;
    m.tf_layers = 1;
    m.tf_heads = 1;
    m.tf_embd = 16;
    m.tf_block = 16;
    m.perp_window = 2;
    m.perp_stride = 1;
    m.validate();
    return m;
}

}  // namespace

TEST_CASE("png writer emits stable well-formed files") {
    const auto dir = std::filesystem::temp_directory_path() / "mapprior_png";
    std::filesystem::create_directories(dir);

    std::vector<uint8_t> px{0, 64, 128, 192, 255, 32};
    write_png_gray8(dir / "a.png", 3, 2, px);
    auto bytes = slurp(dir / "a.png");
    // signature + IHDR(25) + IDAT(8 raw rows -> 31) + IEND(12)
    CHECK(bytes.size() == 76);
    const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    for (int i = 0; i < 8; ++i) CHECK(static_cast<uint8_t>(bytes[i]) == sig[i]);
    CHECK(bytes.substr(12, 4) == "IHDR");
    CHECK(bytes.find("IDAT") != std::string::npos);
    CHECK(bytes.substr(bytes.size() - 8, 4) == "IEND");

    write_png_gray8(dir / "b.png", 3, 2, px);
    CHECK(slurp(dir / "b.png") == bytes);

    CHECK_THROWS_AS(write_png_gray8(dir / "c.png", 4, 2, px), ShapeError);
    CHECK_THROWS_AS(write_png_gray8(dir / "c.png", 0, 2, {}), ShapeError);
}

TEST_CASE("initial canvas fills one window deterministically") {
    auto cfg = preset_config("smoke");
    fix_determinism(37);
    PriorModel prior(cfg);
    SamplerModel sampler(cfg);

    auto canvas = init_canvas(prior, sampler, cfg, 5);
    canvas.validate(cfg.codebook_size);
    CHECK(canvas.rows == cfg.latent_w);
    CHECK(canvas.cols == cfg.latent_h);
    CHECK(canvas.window == cfg.latent_h);
    CHECK(canvas.stride == cfg.perp_stride);
    CHECK(canvas.pixels_per_token == cfg.grid_h / cfg.latent_h);
    CHECK(canvas.pixels.height == cfg.grid_w);
    CHECK(canvas.pixels.width == cfg.grid_h);
    REQUIRE(canvas.log.size() == 1);
    CHECK(canvas.log[0].context.empty());
    CHECK(canvas.log[0].new_cols == canvas.window);

    // the canvas is the transposed model window
    SamplingParams params;
    params.nucleus_p = cfg.nucleus_p;
    params.seed = 5;
    auto feats = torch::zeros({static_cast<long>(cfg.channels.size()) + 2, cfg.grid_h, cfg.grid_w});
    auto grid = sample_autoregressive(sampler, null_guidance(sampler), feats, params);
    for (int mr = 0; mr < grid.h; ++mr)
        for (int mc = 0; mc < grid.w; ++mc)
            CHECK(canvas.token(mc, mr) == grid.indices[static_cast<std::size_t>(mr) * grid.w + mc]);

    CHECK(init_canvas(prior, sampler, cfg, 5) == canvas);
    CHECK_FALSE(init_canvas(prior, sampler, cfg, 6) == canvas);

    // geometry guards
    auto quad = quad_config();
    fix_determinism(37);
    PriorModel qprior(quad);
    SamplerModel qsampler(quad);
    CHECK_THROWS_AS(init_canvas(qprior, sampler, cfg, 5), ConfigError);
}

TEST_CASE("extension grows the canvas and preserves context bit-exactly") {
    auto cfg = preset_config("smoke");
    fix_determinism(41);
    PriorModel prior(cfg);
    SamplerModel sampler(cfg);

    auto canvas = init_canvas(prior, sampler, cfg, 11);
    CHECK(extend(canvas, prior, sampler, cfg, 0, 11) == canvas);
    CHECK_THROWS_AS(extend(canvas, prior, sampler, cfg, -1, 11), ContractError);

    const int steps = cfg.perp_steps;  // 8 on the smoke preset
    auto grown = extend(canvas, prior, sampler, cfg, steps, 11);
    grown.validate(cfg.codebook_size);
    const int s = cfg.perp_stride;
    const int f = grown.pixels_per_token;
    CHECK(grown.cols == canvas.cols + s * steps);
    CHECK(grown.pixels.width == grown.cols * f);
    REQUIRE(grown.log.size() == static_cast<std::size_t>(steps) + 1);

    // scan the log: every step's context equals the canvas columns it sat on
    const int ctx_w = grown.window - s;
    for (std::size_t e = 1; e < grown.log.size(); ++e) {
        const auto& entry = grown.log[e];
        CHECK(entry.new_cols == s);
        CHECK(entry.ctx_col_start == entry.new_col_start - ctx_w);
        REQUIRE(entry.context.size() == static_cast<std::size_t>(ctx_w) * grown.rows);
        std::size_t i = 0;
        for (int mr = 0; mr < ctx_w; ++mr)
            for (int mc = 0; mc < grown.rows; ++mc)
                CHECK(entry.context[i++] == grown.token(mc, entry.ctx_col_start + mr));
        CHECK(entry.seam_mean_abs >= 0.0);
        CHECK(std::isfinite(entry.seam_mean_abs));
    }
    CHECK(mean_seam_stat(grown) >= 0.0);

    // deterministic, and indifferent to chunking
    CHECK(extend(canvas, prior, sampler, cfg, steps, 11) == grown);
    auto half = extend(canvas, prior, sampler, cfg, steps / 2, 11);
    CHECK(extend(half, prior, sampler, cfg, steps - steps / 2, 11) == grown);

    // models with a different token geometry are refused
    auto quad = quad_config();
    fix_determinism(41);
    PriorModel qprior(quad);
    SamplerModel qsampler(quad);
    CHECK_THROWS_AS(extend(canvas, qprior, qsampler, quad, 1, 11), ConfigError);
}

TEST_CASE("strips export and round-trip") {
    auto cfg = preset_config("smoke");
    fix_determinism(43);
    PriorModel prior(cfg);
    SamplerModel sampler(cfg);
    auto canvas = extend(init_canvas(prior, sampler, cfg, 3), prior, sampler, cfg, 4, 3);

    const auto dir = std::filesystem::temp_directory_path() / "mapprior_strip";
    std::filesystem::remove_all(dir);
    export_strip(canvas, dir);

    auto pixels = read_bml_soft(dir / "strip.bml");
    CHECK(pixels == canvas.pixels);

    std::ifstream jl(dir / "steps.jsonl");
    REQUIRE(jl.good());
    std::string line;
    std::size_t lines = 0;
    while (std::getline(jl, line)) {
        auto j = nlohmann::json::parse(line);
        CHECK(j["index"] == static_cast<int>(lines));
        if (lines == 0) CHECK(j["context"].empty());
        ++lines;
    }
    CHECK(lines == canvas.log.size());

    for (const auto& name : cfg.channels) {
        CHECK(std::filesystem::exists(dir / (name + ".png")));
    }

    // re-export is byte-stable
    auto strip_bytes = slurp(dir / "strip.bml");
    auto png_bytes = slurp(dir / (cfg.channels[0] + ".png"));
    export_strip(canvas, dir);
    CHECK(slurp(dir / "strip.bml") == strip_bytes);
    CHECK(slurp(dir / (cfg.channels[0] + ".png")) == png_bytes);
}
