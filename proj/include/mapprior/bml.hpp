#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include "mapprior/layout.hpp"

namespace mapprior {

using AnyGrid = std::variant<LayoutGrid, SoftLayout>;

// .bml: magic "BML1", little-endian u32 {version=1, C, H, W, dtype}, C
// length-prefixed UTF-8 channel names, f64 resolution, then the payload
// channel-major row-major. dtype 0 = binary u8, dtype 1 = float32.
void write_bml(const LayoutGrid& grid, const std::filesystem::path& path);
void write_bml(const SoftLayout& grid, const std::filesystem::path& path);
void write_bml(const AnyGrid& grid, const std::filesystem::path& path);

AnyGrid read_bml(const std::filesystem::path& path);

// read_bml plus a dtype check; throws FormatError on the other dtype.
LayoutGrid read_bml_binary(const std::filesystem::path& path);
SoftLayout read_bml_soft(const std::filesystem::path& path);

// Provenance sidecar `<stem>.json` next to a .bml file.
void write_sidecar(const std::filesystem::path& bml_path, uint64_t seed,
                   const std::string& spec_hash);

// Exact on-disk size of a grid with the given shape and channel names.
std::size_t bml_file_size(const std::vector<std::string>& channels, int height, int width,
                          bool binary);

}  // namespace mapprior
