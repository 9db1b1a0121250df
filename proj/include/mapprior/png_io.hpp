#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mapprior {

// Minimal 8-bit grayscale PNG writer (stored-deflate zlib stream, no
// external compression dependency). pixels is row-major, width*height bytes.
void write_png_gray8(const std::filesystem::path& path, int width, int height,
                     const std::vector<uint8_t>& pixels);

}  // namespace mapprior
