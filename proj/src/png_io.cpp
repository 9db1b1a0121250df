#include "mapprior/png_io.hpp"

#include <array>
#include <fstream>

#include "mapprior/errors.hpp"

namespace mapprior {

namespace {

uint32_t crc32_of(const std::vector<uint8_t>& bytes) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t n = 0; n < 256; ++n) {
            uint32_t c = n;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[n] = c;
        }
        return t;
    }();
    uint32_t c = 0xFFFFFFFFu;
    for (uint8_t b : bytes) c = table[(c ^ b) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void push_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void push_chunk(std::vector<uint8_t>& out, const char type[4],
                const std::vector<uint8_t>& data) {
    push_u32_be(out, static_cast<uint32_t>(data.size()));
    std::vector<uint8_t> body(type, type + 4);
    body.insert(body.end(), data.begin(), data.end());
    const uint32_t crc = crc32_of(body);
    out.insert(out.end(), body.begin(), body.end());
    push_u32_be(out, crc);
}

// zlib container around deflate "stored" blocks.
std::vector<uint8_t> zlib_stored(const std::vector<uint8_t>& raw) {
    std::vector<uint8_t> z{0x78, 0x01};
    std::size_t pos = 0;
    do {
        const std::size_t n = std::min<std::size_t>(raw.size() - pos, 65535);
        const bool last = pos + n == raw.size();
        z.push_back(last ? 0x01 : 0x00);
        z.push_back(static_cast<uint8_t>(n & 0xFF));
        z.push_back(static_cast<uint8_t>(n >> 8));
        z.push_back(static_cast<uint8_t>(~n & 0xFF));
        z.push_back(static_cast<uint8_t>((~n >> 8) & 0xFF));
        z.insert(z.end(), raw.begin() + static_cast<std::ptrdiff_t>(pos),
                 raw.begin() + static_cast<std::ptrdiff_t>(pos + n));
        pos += n;
    } while (pos < raw.size());

    uint32_t a = 1, b = 0;
    for (uint8_t byte : raw) {
        a = (a + byte) % 65521;
        b = (b + a) % 65521;
    }
    push_u32_be(z, (b << 16) | a);
    return z;
}

}  // namespace

void write_png_gray8(const std::filesystem::path& path, int width, int height,
                     const std::vector<uint8_t>& pixels) {
    if (width <= 0 || height <= 0) throw ShapeError("png dimensions must be positive");
    if (pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw ShapeError("png pixel buffer does not match its dimensions");
    }

    std::vector<uint8_t> png{137, 80, 78, 71, 13, 10, 26, 10};

    std::vector<uint8_t> ihdr;
    push_u32_be(ihdr, static_cast<uint32_t>(width));
    push_u32_be(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);  // deflate
    ihdr.push_back(0);  // default filtering
    ihdr.push_back(0);  // no interlace
    push_chunk(png, "IHDR", ihdr);

    std::vector<uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(height) * (static_cast<std::size_t>(width) + 1));
    for (int r = 0; r < height; ++r) {
        raw.push_back(0);  // per-scanline filter: none
        const auto* row = pixels.data() + static_cast<std::size_t>(r) * width;
        raw.insert(raw.end(), row, row + width);
    }
    push_chunk(png, "IDAT", zlib_stored(raw));
    push_chunk(png, "IEND", {});

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write png: " + path.string());
    out.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
    if (!out) throw DataError("short write on png: " + path.string());
}

}  // namespace mapprior
