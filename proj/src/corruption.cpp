#include "mapprior/corruption.hpp"

#include <algorithm>
#include <cmath>

#include "mapprior/errors.hpp"
#include "mapprior/rng.hpp"

namespace mapprior {

void CorruptionParams::validate() const {
    if (dropout_patch_rate < 0 || dropout_patch_rate > 1) {
        throw ConfigError("dropout_patch_rate must lie in [0,1]");
    }
    if (speckle_rate < 0 || speckle_rate > 1) throw ConfigError("speckle_rate must lie in [0,1]");
    if (radial_attenuation < 0 || radial_attenuation > 1) {
        throw ConfigError("radial_attenuation must lie in [0,1]");
    }
    if (boundary_jitter_px < 0) throw ConfigError("boundary_jitter_px must be >= 0");
    if (patch_size_range.first < 1 || patch_size_range.second < patch_size_range.first) {
        throw ConfigError("bad patch_size_range");
    }
}

CorruptionResult corrupt(const LayoutGrid& gt, const CorruptionParams& params) {
    params.validate();
    gt.validate();

    const int C = gt.num_channels();
    const int H = gt.height;
    const int W = gt.width;

    SoftLayout noisy = SoftLayout::from(gt);

    // Stage streams are derived separately so that disabling one stage never
    // shifts the randomness of another.
    Rng jitter_rng = Rng(derive_seed(params.seed, 1));
    Rng patch_rng = Rng(derive_seed(params.seed, 2));
    Rng radial_rng = Rng(derive_seed(params.seed, 3));
    Rng speckle_rng = Rng(derive_seed(params.seed, 4));
    Rng sensor_rng = Rng(derive_seed(params.seed, 5));

    // 1. Boundary jitter: cells within jitter_px of a class boundary flip
    // with probability 1/2. Boundaries are computed against the clean grid.
    if (params.boundary_jitter_px > 0) {
        const int J = params.boundary_jitter_px;
        for (int ch = 0; ch < C; ++ch) {
            for (int r = 0; r < H; ++r) {
                for (int c = 0; c < W; ++c) {
                    const uint8_t v = gt.at(ch, r, c);
                    bool near_edge = false;
                    for (int dr = -J; dr <= J && !near_edge; ++dr) {
                        for (int dc = -J; dc <= J && !near_edge; ++dc) {
                            const int rr = r + dr;
                            const int cc = c + dc;
                            if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
                            if (gt.at(ch, rr, cc) != v) near_edge = true;
                        }
                    }
                    if (near_edge && jitter_rng.bernoulli(0.5)) {
                        noisy.data[noisy.idx(ch, r, c)] = v ? 0.f : 1.f;
                    }
                }
            }
        }
    }

    // 2. Patch dropout, shared across channels: rectangular regions are wiped
    // to zero in every class. Patch count is sized from the rate and the mean
    // patch area.
    if (params.dropout_patch_rate > 0) {
        const double mean_side = 0.5 * (params.patch_size_range.first + params.patch_size_range.second);
        const double mean_area = mean_side * mean_side;
        const int n_patches = std::max(
            1, static_cast<int>(std::lround(params.dropout_patch_rate * H * W / mean_area)));
        for (int p = 0; p < n_patches; ++p) {
            const int ph = static_cast<int>(
                patch_rng.uniform_int(params.patch_size_range.first, params.patch_size_range.second));
            const int pw = static_cast<int>(
                patch_rng.uniform_int(params.patch_size_range.first, params.patch_size_range.second));
            const int r0 = static_cast<int>(patch_rng.uniform_int(0, std::max(0, H - ph)));
            const int c0 = static_cast<int>(patch_rng.uniform_int(0, std::max(0, W - pw)));
            for (int ch = 0; ch < C; ++ch) {
                for (int r = r0; r < std::min(H, r0 + ph); ++r) {
                    for (int c = c0; c < std::min(W, c0 + pw); ++c) {
                        noisy.data[noisy.idx(ch, r, c)] = 0.f;
                    }
                }
            }
        }
    }

    // 3. Radial erasure: cells far from the ego center are dropped with
    // probability ramping from 0 at the center to radial_attenuation at the
    // corner radius. One draw per cell, shared across channels.
    if (params.radial_attenuation > 0) {
        const double cy = (H - 1) / 2.0;
        const double cx = (W - 1) / 2.0;
        const double max_r = std::sqrt(cy * cy + cx * cx);
        for (int r = 0; r < H; ++r) {
            for (int c = 0; c < W; ++c) {
                const double rel = std::sqrt((r - cy) * (r - cy) + (c - cx) * (c - cx)) / max_r;
                if (radial_rng.bernoulli(params.radial_attenuation * rel)) {
                    for (int ch = 0; ch < C; ++ch) noisy.data[noisy.idx(ch, r, c)] = 0.f;
                }
            }
        }
    }

    // 4. Speckle: independent per-cell, per-channel value replacement with a
    // random probability — mimics softmax confusion rather than hard flips.
    if (params.speckle_rate > 0) {
        for (int ch = 0; ch < C; ++ch) {
            for (int r = 0; r < H; ++r) {
                for (int c = 0; c < W; ++c) {
                    if (speckle_rng.bernoulli(params.speckle_rate)) {
                        noisy.data[noisy.idx(ch, r, c)] = static_cast<float>(speckle_rng.uniform());
                    }
                }
            }
        }
    }

    // Feature stack: noisy channels, normalized distance-from-center map, and
    // one seeded Gaussian noise channel.
    PseudoSensor features;
    features.feature_channels = C + 2;
    features.height = H;
    features.width = W;
    features.data.resize(static_cast<std::size_t>(C + 2) * H * W);
    std::copy(noisy.data.begin(), noisy.data.end(), features.data.begin());
    const double cy = (H - 1) / 2.0;
    const double cx = (W - 1) / 2.0;
    const double max_r = std::max(1e-12, std::sqrt(cy * cy + cx * cx));
    float* dist_plane = features.data.data() + static_cast<std::size_t>(C) * H * W;
    float* noise_plane = features.data.data() + static_cast<std::size_t>(C + 1) * H * W;
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            dist_plane[r * W + c] = static_cast<float>(
                std::sqrt((r - cy) * (r - cy) + (c - cx) * (c - cx)) / max_r);
            noise_plane[r * W + c] = static_cast<float>(sensor_rng.normal());
        }
    }

    return {std::move(noisy), std::move(features)};
}

}  // namespace mapprior
