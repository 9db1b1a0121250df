#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mapprior/layout.hpp"

namespace mapprior {

// Road-topology knobs for the synthetic layout generator. Roads are straight
// stripes (axis-aligned or diagonal) carrying dividers, flanked by walkways,
// with crossings and stop lines at intersections and occasional carparks.
struct GeneratorSpec {
    std::vector<std::string> channels = default_channels();
    int height = 64;
    int width = 64;
    double resolution = 1.5625;

    int n_roads_min = 2;
    int n_roads_max = 4;
    int lane_width_min = 5;   // half-width is derived from this, in pixels
    int lane_width_max = 11;
    double diagonal_prob = 0.25;
    double intersection_crossing_prob = 0.75;
    double extra_crossing_prob = 0.35;  // mid-road crossing away from intersections
    double carpark_prob = 0.55;
    int walkway_width = 2;

    void validate() const;  // throws ConfigError
};

// Deterministic in (seed, spec). Postconditions: drivable channel non-empty,
// divider cells lie inside drivable, every crossing intersects drivable.
LayoutGrid generate_synthetic_layout(uint64_t seed, const GeneratorSpec& spec);

}  // namespace mapprior
