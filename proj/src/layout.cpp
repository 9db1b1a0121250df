#include "mapprior/layout.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mapprior/errors.hpp"

namespace mapprior {

std::vector<std::string> default_channels() {
    return {"drivable", "ped_crossing", "walkway", "stop_line", "carpark", "divider"};
}

namespace {

void check_shape(const std::vector<std::string>& channels, int height, int width,
                 std::size_t data_size) {
    if (channels.empty()) throw ConfigError("channel list is empty");
    std::set<std::string> seen(channels.begin(), channels.end());
    if (seen.size() != channels.size()) throw ConfigError("duplicate channel names");
    if (height <= 0 || width <= 0) throw ConfigError("grid dimensions must be positive");
    const std::size_t want = channels.size() * static_cast<std::size_t>(height) * width;
    if (data_size != want) {
        throw ShapeError("data size " + std::to_string(data_size) + " does not match shape (" +
                         std::to_string(channels.size()) + ", " + std::to_string(height) + ", " +
                         std::to_string(width) + ")");
    }
}

int find_channel(const std::vector<std::string>& channels, const std::string& name) {
    auto it = std::find(channels.begin(), channels.end(), name);
    if (it == channels.end()) throw DataError("unknown class name: " + name);
    return static_cast<int>(it - channels.begin());
}

}  // namespace

LayoutGrid LayoutGrid::zeros(std::vector<std::string> channels, int height, int width,
                             double resolution) {
    LayoutGrid g;
    g.channels = std::move(channels);
    g.height = height;
    g.width = width;
    g.resolution = resolution;
    check_shape(g.channels, height, width,
                g.channels.size() * static_cast<std::size_t>(height) * width);
    g.data.assign(g.channels.size() * static_cast<std::size_t>(height) * width, 0);
    return g;
}

int LayoutGrid::channel_index(const std::string& name) const {
    return find_channel(channels, name);
}

void LayoutGrid::validate() const {
    check_shape(channels, height, width, data.size());
    for (uint8_t v : data) {
        if (v > 1) throw DataError("binary layout cell out of {0,1}: " + std::to_string(v));
    }
}

SoftLayout SoftLayout::zeros(std::vector<std::string> channels, int height, int width,
                             double resolution) {
    SoftLayout s;
    s.channels = std::move(channels);
    s.height = height;
    s.width = width;
    s.resolution = resolution;
    check_shape(s.channels, height, width,
                s.channels.size() * static_cast<std::size_t>(height) * width);
    s.data.assign(s.channels.size() * static_cast<std::size_t>(height) * width, 0.0f);
    return s;
}

SoftLayout SoftLayout::from(const LayoutGrid& g) {
    SoftLayout s;
    s.channels = g.channels;
    s.height = g.height;
    s.width = g.width;
    s.resolution = g.resolution;
    s.data.resize(g.data.size());
    std::transform(g.data.begin(), g.data.end(), s.data.begin(),
                   [](uint8_t v) { return static_cast<float>(v); });
    return s;
}

int SoftLayout::channel_index(const std::string& name) const {
    return find_channel(channels, name);
}

void SoftLayout::validate() const {
    check_shape(channels, height, width, data.size());
    for (float v : data) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw DataError("soft layout cell out of [0,1]: " + std::to_string(v));
        }
    }
}

LayoutGrid SoftLayout::binarize(double threshold) const {
    LayoutGrid g = LayoutGrid::zeros(channels, height, width, resolution);
    for (std::size_t i = 0; i < data.size(); ++i) {
        g.data[i] = data[i] >= threshold ? 1 : 0;
    }
    return g;
}

void PseudoSensor::validate() const {
    if (feature_channels <= 0 || height <= 0 || width <= 0) {
        throw ShapeError("pseudo-sensor dimensions must be positive");
    }
    const std::size_t want = static_cast<std::size_t>(feature_channels) * height * width;
    if (data.size() != want) throw ShapeError("pseudo-sensor data size does not match shape");
    for (float v : data) {
        if (!std::isfinite(v)) throw DataError("pseudo-sensor contains non-finite value");
    }
}

}  // namespace mapprior
