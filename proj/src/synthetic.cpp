#include "mapprior/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mapprior/errors.hpp"
#include "mapprior/rng.hpp"

namespace mapprior {

namespace {

enum class Orient { Horizontal, Vertical, DiagUp, DiagDown };

// A road is a straight stripe: all cells whose perpendicular-ish distance to
// the center line is at most half_width. For diagonals the distance is taken
// along the row axis, which keeps rasterization exact on the integer grid.
struct Road {
    Orient orient;
    int offset;      // row for horizontal, column for vertical, intercept for diagonals
    int half_width;  // >= 1

    // Signed distance proxy used for rasterization and divider placement.
    int dist(int r, int c) const {
        switch (orient) {
            case Orient::Horizontal: return std::abs(r - offset);
            case Orient::Vertical: return std::abs(c - offset);
            case Orient::DiagUp: return std::abs(r + c - offset);
            case Orient::DiagDown: return std::abs(r - c - offset);
        }
        return 0;
    }
    bool contains(int r, int c) const { return dist(r, c) <= half_width; }
};

void fill_band(LayoutGrid& g, int ch, const Road& road, int lo, int hi) {
    for (int r = 0; r < g.height; ++r) {
        for (int c = 0; c < g.width; ++c) {
            const int d = road.dist(r, c);
            if (d >= lo && d <= hi) g.at(ch, r, c) = 1;
        }
    }
}

// Axis range of the road's center line clipped to the grid; used to place
// features "along" the road.
std::pair<int, int> along_range(const Road& road, int height, int width) {
    if (road.orient == Orient::Horizontal) return {0, width - 1};
    if (road.orient == Orient::Vertical) return {0, height - 1};
    return {0, std::min(height, width) - 1};
}

}  // namespace

void GeneratorSpec::validate() const {
    if (height <= 0 || width <= 0) throw ConfigError("generator grid size must be positive");
    if (channels.empty()) throw ConfigError("generator class list is empty");
    std::set<std::string> seen(channels.begin(), channels.end());
    if (seen.size() != channels.size()) throw ConfigError("duplicate channel names in spec");
    if (n_roads_min < 1 || n_roads_max < n_roads_min) throw ConfigError("bad road count range");
    if (lane_width_min < 3 || lane_width_max < lane_width_min) {
        throw ConfigError("bad lane width range");
    }
    if (diagonal_prob < 0 || diagonal_prob > 1 || intersection_crossing_prob < 0 ||
        intersection_crossing_prob > 1 || extra_crossing_prob < 0 || extra_crossing_prob > 1 ||
        carpark_prob < 0 || carpark_prob > 1) {
        throw ConfigError("generator probabilities must lie in [0,1]");
    }
    if (resolution <= 0) throw ConfigError("resolution must be positive");
}

LayoutGrid generate_synthetic_layout(uint64_t seed, const GeneratorSpec& spec) {
    spec.validate();
    Rng rng(derive_seed(seed, 0x6c61796f7574ull));  // "layout"
    LayoutGrid g = LayoutGrid::zeros(spec.channels, spec.height, spec.width, spec.resolution);

    const int H = spec.height;
    const int W = spec.width;
    auto has = [&](const char* name) {
        return std::find(g.channels.begin(), g.channels.end(), name) != g.channels.end();
    };
    const int ch_driv = has("drivable") ? g.channel_index("drivable") : -1;
    const int ch_cross = has("ped_crossing") ? g.channel_index("ped_crossing") : -1;
    const int ch_walk = has("walkway") ? g.channel_index("walkway") : -1;
    const int ch_stop = has("stop_line") ? g.channel_index("stop_line") : -1;
    const int ch_park = has("carpark") ? g.channel_index("carpark") : -1;
    const int ch_div = has("divider") ? g.channel_index("divider") : -1;

    // Roads. The first is always axis-aligned through the middle band so the
    // drivable channel is never empty and usually covers the ego cell.
    const int n_roads = static_cast<int>(rng.uniform_int(spec.n_roads_min, spec.n_roads_max));
    std::vector<Road> roads;
    for (int i = 0; i < n_roads; ++i) {
        Road road;
        const int hw = static_cast<int>(rng.uniform_int(spec.lane_width_min, spec.lane_width_max)) / 2;
        road.half_width = std::max(1, hw);
        const bool diagonal = i > 0 && rng.bernoulli(spec.diagonal_prob);
        if (diagonal) {
            road.orient = rng.bernoulli(0.5) ? Orient::DiagUp : Orient::DiagDown;
            // keep the center line crossing the grid interior
            if (road.orient == Orient::DiagUp) {
                road.offset = static_cast<int>(rng.uniform_int(H / 4, H + W - 1 - W / 4));
            } else {
                road.offset = static_cast<int>(rng.uniform_int(-(W - W / 4), H - H / 4));
            }
        } else {
            const bool horizontal = (i % 2 == 0) ? rng.bernoulli(0.5) : roads[0].orient != Orient::Horizontal;
            road.orient = horizontal ? Orient::Horizontal : Orient::Vertical;
            const int extent = horizontal ? H : W;
            road.offset = static_cast<int>(
                rng.uniform_int(road.half_width + 2, extent - road.half_width - 3));
        }
        roads.push_back(road);
    }

    if (ch_driv >= 0) {
        for (const Road& road : roads) fill_band(g, ch_driv, road, 0, road.half_width);
    }

    // Dividers: road center line, one pixel wide, clipped to the grid; wide
    // roads also get two lane lines at half offset.
    if (ch_div >= 0) {
        for (const Road& road : roads) {
            fill_band(g, ch_div, road, 0, 0);
            if (road.half_width >= 4) {
                const int lane = road.half_width / 2 + 1;
                fill_band(g, ch_div, road, lane, lane);
            }
        }
        // Cells under another road's body stay drivable, so no clipping is
        // needed; dividers are inside their own road by construction.
    }

    // Walkways: strips hugging both road edges, excluding drivable.
    if (ch_walk >= 0) {
        for (const Road& road : roads) {
            fill_band(g, ch_walk, road, road.half_width + 1, road.half_width + spec.walkway_width);
        }
        if (ch_driv >= 0) {
            for (int r = 0; r < H; ++r) {
                for (int c = 0; c < W; ++c) {
                    if (g.at(ch_driv, r, c)) g.at(ch_walk, r, c) = 0;
                }
            }
        }
    }

    // Crossings and stop lines at axis-aligned intersections: a band across
    // road A just outside the overlap with road B, and a stop line before it.
    auto paint_crossing = [&](const Road& road, int along_center) {
        const auto [lo_a, hi_a] = along_range(road, H, W);
        const int band_lo = std::max(lo_a, along_center - 1);
        const int band_hi = std::min(hi_a, along_center + 1);
        if (band_lo > band_hi) return false;
        for (int r = 0; r < H; ++r) {
            for (int c = 0; c < W; ++c) {
                const int along = road.orient == Orient::Horizontal ? c : r;
                if (along >= band_lo && along <= band_hi && road.contains(r, c)) {
                    if (ch_cross >= 0) g.at(ch_cross, r, c) = 1;
                }
            }
        }
        if (ch_stop >= 0) {
            const int stop_at = band_lo - 2;
            if (stop_at >= lo_a) {
                for (int r = 0; r < H; ++r) {
                    for (int c = 0; c < W; ++c) {
                        const int along = road.orient == Orient::Horizontal ? c : r;
                        if (along == stop_at && road.contains(r, c)) g.at(ch_stop, r, c) = 1;
                    }
                }
            }
        }
        return true;
    };

    for (std::size_t a = 0; a < roads.size(); ++a) {
        const Road& ra = roads[a];
        if (ra.orient != Orient::Horizontal && ra.orient != Orient::Vertical) continue;
        for (std::size_t b = 0; b < roads.size(); ++b) {
            if (a == b) continue;
            const Road& rb = roads[b];
            const bool perpendicular =
                (ra.orient == Orient::Horizontal && rb.orient == Orient::Vertical) ||
                (ra.orient == Orient::Vertical && rb.orient == Orient::Horizontal);
            if (!perpendicular) continue;
            if (!rng.bernoulli(spec.intersection_crossing_prob)) continue;
            // crossing over road a, just past road b's body
            paint_crossing(ra, rb.offset + rb.half_width + 3);
        }
        if (rng.bernoulli(spec.extra_crossing_prob)) {
            const auto [lo, hi] = along_range(ra, H, W);
            paint_crossing(ra, static_cast<int>(rng.uniform_int(lo + 4, hi - 4)));
        }
    }

    // Carparks: rectangles parked against an axis-aligned road edge.
    if (ch_park >= 0) {
        for (const Road& road : roads) {
            if (road.orient != Orient::Horizontal && road.orient != Orient::Vertical) continue;
            if (!rng.bernoulli(spec.carpark_prob)) continue;
            const int depth = static_cast<int>(rng.uniform_int(5, 9));
            const int span = static_cast<int>(rng.uniform_int(8, 16));
            const auto [lo_a, hi_a] = along_range(road, H, W);
            if (hi_a - lo_a < span + 2) continue;
            const int start = static_cast<int>(rng.uniform_int(lo_a + 1, hi_a - span - 1));
            const int side = rng.bernoulli(0.5) ? 1 : -1;
            const int near_edge = road.offset + side * (road.half_width + 1);
            for (int d = 0; d < depth; ++d) {
                const int perp = near_edge + side * d;
                for (int s = 0; s < span; ++s) {
                    const int along = start + s;
                    const int r = road.orient == Orient::Horizontal ? perp : along;
                    const int c = road.orient == Orient::Horizontal ? along : perp;
                    if (r >= 0 && r < H && c >= 0 && c < W) g.at(ch_park, r, c) = 1;
                }
            }
        }
    }

    return g;
}

}  // namespace mapprior
