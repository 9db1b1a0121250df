#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mapprior {

std::vector<std::string> default_channels();

// Multi-channel binary BEV map, C classes x H x W, channel-major row-major.
// Classes are multi-label: a cell may belong to several classes at once.
struct LayoutGrid {
    std::vector<std::string> channels;
    int height = 0;
    int width = 0;
    double resolution = 1.0;  // meters per pixel
    std::vector<uint8_t> data;

    static LayoutGrid zeros(std::vector<std::string> channels, int height, int width,
                            double resolution);

    std::size_t idx(int c, int r, int col) const {
        return (static_cast<std::size_t>(c) * height + r) * width + col;
    }
    uint8_t at(int c, int r, int col) const { return data[idx(c, r, col)]; }
    uint8_t& at(int c, int r, int col) { return data[idx(c, r, col)]; }

    int num_channels() const { return static_cast<int>(channels.size()); }
    std::size_t cells() const { return data.size(); }
    int channel_index(const std::string& name) const;  // throws DataError if unknown

    // Checks the type invariants: non-empty duplicate-free channels, exact
    // data shape, every value in {0, 1}.
    void validate() const;

    bool operator==(const LayoutGrid& other) const = default;
};

// Same shape as LayoutGrid but with per-class probabilities in [0, 1].
struct SoftLayout {
    std::vector<std::string> channels;
    int height = 0;
    int width = 0;
    double resolution = 1.0;
    std::vector<float> data;

    static SoftLayout zeros(std::vector<std::string> channels, int height, int width,
                            double resolution);
    static SoftLayout from(const LayoutGrid& g);

    std::size_t idx(int c, int r, int col) const {
        return (static_cast<std::size_t>(c) * height + r) * width + col;
    }
    float at(int c, int r, int col) const { return data[idx(c, r, col)]; }
    float& at(int c, int r, int col) { return data[idx(c, r, col)]; }

    int num_channels() const { return static_cast<int>(channels.size()); }
    std::size_t cells() const { return data.size(); }
    int channel_index(const std::string& name) const;

    void validate() const;

    // Per-cell threshold, `value >= t` maps to 1.
    LayoutGrid binarize(double threshold = 0.5) const;

    bool operator==(const SoftLayout& other) const = default;
};

// Real-valued feature grid standing in for BEV sensor features.
struct PseudoSensor {
    int feature_channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    std::size_t idx(int c, int r, int col) const {
        return (static_cast<std::size_t>(c) * height + r) * width + col;
    }
    float at(int c, int r, int col) const { return data[idx(c, r, col)]; }
    float& at(int c, int r, int col) { return data[idx(c, r, col)]; }

    void validate() const;  // finite values, consistent shape

    bool operator==(const PseudoSensor& other) const = default;
};

}  // namespace mapprior
