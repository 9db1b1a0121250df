#pragma once

#include <cstdint>
#include <utility>

#include "mapprior/layout.hpp"

namespace mapprior {

// Degradation knobs for turning a clean layout into something that looks like
// the output of an imperfect segmentation head.
struct CorruptionParams {
    double dropout_patch_rate = 0.15;          // expected fraction of area hit by dropped patches
    std::pair<int, int> patch_size_range{4, 10};
    int boundary_jitter_px = 1;                // class-boundary flip radius
    double speckle_rate = 0.02;                // i.i.d. cell noise
    double radial_attenuation = 0.0;           // erasure probability ramps to this at the corners
    uint64_t seed = 0;

    void validate() const;
};

struct CorruptionResult {
    SoftLayout noisy;
    PseudoSensor features;
};

// Applies, in order: boundary jitter flips, shared patch dropout, radial
// erasure, speckle. Features = [noisy channels | distance-from-center | noise].
// Deterministic in (gt, params) including params.seed.
CorruptionResult corrupt(const LayoutGrid& gt, const CorruptionParams& params);

}  // namespace mapprior
