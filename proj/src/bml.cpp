#include "mapprior/bml.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"
#include "mapprior/errors.hpp"

namespace mapprior {

namespace {

constexpr char kMagic[4] = {'B', 'M', 'L', '1'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kDtypeBinary = 0;
constexpr uint32_t kDtypeFloat = 1;

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        if (!out_) throw DataError("cannot open for writing: " + path.string());
    }
    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), n); }
    void u32(uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
        bytes(b, 4);
    }
    void f64(double v) {
        uint64_t u;
        std::memcpy(&u, &v, 8);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
        bytes(b, 8);
    }
    void finish(const std::filesystem::path& path) {
        out_.flush();
        if (!out_) throw DataError("write failed: " + path.string());
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
        if (!in_) throw DataError("cannot open for reading: " + path.string());
    }
    std::size_t offset() const { return offset_; }
    void bytes(void* p, std::size_t n, const char* what) {
        in_.read(static_cast<char*>(p), n);
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw FormatError(std::string("truncated file while reading ") + what, offset_);
        }
        offset_ += n;
    }
    uint32_t u32(const char* what) {
        unsigned char b[4];
        bytes(b, 4, what);
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    }
    double f64(const char* what) {
        unsigned char b[8];
        bytes(b, 8, what);
        uint64_t u = 0;
        for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(b[i]) << (8 * i);
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }

private:
    std::ifstream in_;
    std::size_t offset_ = 0;
};

void write_header(Writer& w, const std::vector<std::string>& channels, int height, int width,
                  double resolution, uint32_t dtype) {
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<uint32_t>(channels.size()));
    w.u32(static_cast<uint32_t>(height));
    w.u32(static_cast<uint32_t>(width));
    w.u32(dtype);
    for (const auto& name : channels) {
        w.u32(static_cast<uint32_t>(name.size()));
        w.bytes(name.data(), name.size());
    }
    w.f64(resolution);
}

struct Header {
    std::vector<std::string> channels;
    uint32_t height = 0, width = 0, dtype = 0;
    double resolution = 1.0;
};

Header read_header(Reader& r) {
    char magic[4];
    r.bytes(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic, expected BML1", 0);
    const uint32_t version = r.u32("version");
    if (version != kVersion) {
        throw FormatError("unsupported version " + std::to_string(version), 4);
    }
    Header h;
    const uint32_t c = r.u32("channel count");
    h.height = r.u32("height");
    h.width = r.u32("width");
    h.dtype = r.u32("dtype");
    if (h.dtype != kDtypeBinary && h.dtype != kDtypeFloat) {
        throw FormatError("unknown dtype " + std::to_string(h.dtype), r.offset() - 4);
    }
    if (c == 0 || h.height == 0 || h.width == 0) {
        throw FormatError("degenerate dimensions", 8);
    }
    if (c > 4096) throw FormatError("implausible channel count", 8);
    for (uint32_t i = 0; i < c; ++i) {
        const std::size_t name_off = r.offset();
        const uint32_t len = r.u32("channel name length");
        if (len > 4096) throw FormatError("implausible channel name length", name_off);
        std::string name(len, '\0');
        r.bytes(name.data(), len, "channel name");
        h.channels.push_back(std::move(name));
    }
    h.resolution = r.f64("resolution");
    return h;
}

}  // namespace

void write_bml(const LayoutGrid& grid, const std::filesystem::path& path) {
    grid.validate();
    Writer w(path);
    write_header(w, grid.channels, grid.height, grid.width, grid.resolution, kDtypeBinary);
    w.bytes(grid.data.data(), grid.data.size());
    w.finish(path);
}

void write_bml(const SoftLayout& grid, const std::filesystem::path& path) {
    grid.validate();
    Writer w(path);
    write_header(w, grid.channels, grid.height, grid.width, grid.resolution, kDtypeFloat);
    static_assert(sizeof(float) == 4);
    // float32 payload is written as raw IEEE-754 LE words
    for (float v : grid.data) {
        uint32_t u;
        std::memcpy(&u, &v, 4);
        w.u32(u);
    }
    w.finish(path);
}

void write_bml(const AnyGrid& grid, const std::filesystem::path& path) {
    std::visit([&](const auto& g) { write_bml(g, path); }, grid);
}

AnyGrid read_bml(const std::filesystem::path& path) {
    Reader r(path);
    Header h = read_header(r);
    const std::size_t n =
        h.channels.size() * static_cast<std::size_t>(h.height) * h.width;
    if (h.dtype == kDtypeBinary) {
        LayoutGrid g;
        g.channels = std::move(h.channels);
        g.height = static_cast<int>(h.height);
        g.width = static_cast<int>(h.width);
        g.resolution = h.resolution;
        g.data.resize(n);
        r.bytes(g.data.data(), n, "payload");
        for (std::size_t i = 0; i < n; ++i) {
            if (g.data[i] > 1) {
                throw FormatError("binary payload byte out of {0,1}", r.offset() - n + i);
            }
        }
        return g;
    }
    SoftLayout s;
    s.channels = std::move(h.channels);
    s.height = static_cast<int>(h.height);
    s.width = static_cast<int>(h.width);
    s.resolution = h.resolution;
    s.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const uint32_t u = r.u32("payload");
        float v;
        std::memcpy(&v, &u, 4);
        s.data[i] = v;
    }
    return s;
}

LayoutGrid read_bml_binary(const std::filesystem::path& path) {
    AnyGrid g = read_bml(path);
    if (auto* p = std::get_if<LayoutGrid>(&g)) return std::move(*p);
    throw FormatError("expected binary dtype in " + path.string(), 20);
}

SoftLayout read_bml_soft(const std::filesystem::path& path) {
    AnyGrid g = read_bml(path);
    if (auto* p = std::get_if<SoftLayout>(&g)) return std::move(*p);
    throw FormatError("expected float dtype in " + path.string(), 20);
}

void write_sidecar(const std::filesystem::path& bml_path, uint64_t seed,
                   const std::string& spec_hash) {
    nlohmann::json j;
    j["seed"] = seed;
    j["spec_hash"] = spec_hash;
    std::filesystem::path p = bml_path;
    p.replace_extension(".json");
    std::ofstream out(p);
    if (!out) throw DataError("cannot write sidecar: " + p.string());
    out << j.dump(2) << "\n";
}

std::size_t bml_file_size(const std::vector<std::string>& channels, int height, int width,
                          bool binary) {
    std::size_t size = 4 + 5 * 4;  // magic + 5 header words
    for (const auto& name : channels) size += 4 + name.size();
    size += 8;  // resolution
    const std::size_t cells = channels.size() * static_cast<std::size_t>(height) * width;
    size += cells * (binary ? 1 : 4);
    return size;
}

}  // namespace mapprior
