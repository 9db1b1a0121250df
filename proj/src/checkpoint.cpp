#include "mapprior/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include "mapprior/errors.hpp"

namespace mapprior {

namespace {

constexpr char kMagic[4] = {'M', 'P', 'C', 'K'};
constexpr uint32_t kVersion = 1;

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_str(std::vector<uint8_t>& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

uint8_t dtype_code(torch::ScalarType t) {
    switch (t) {
        case torch::kFloat32: return 0;
        case torch::kInt64: return 1;
        case torch::kUInt8: return 2;
        case torch::kFloat64: return 3;
        case torch::kInt32: return 4;
        default: throw ContractError("unsupported tensor dtype in checkpoint");
    }
}

torch::ScalarType dtype_from_code(uint8_t c) {
    switch (c) {
        case 0: return torch::kFloat32;
        case 1: return torch::kInt64;
        case 2: return torch::kUInt8;
        case 3: return torch::kFloat64;
        case 4: return torch::kInt32;
        default: throw FormatError("unknown dtype code in checkpoint", 0);
    }
}

struct Reader {
    std::vector<uint8_t> bytes;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > bytes.size()) {
            throw FormatError(std::string("truncated checkpoint while reading ") + what, pos);
        }
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    uint8_t u8(const char* what) {
        need(1, what);
        return bytes[pos++];
    }
    std::string str(const char* what) {
        const uint32_t n = u32(what);
        need(n, what);
        std::string s(bytes.begin() + pos, bytes.begin() + pos + n);
        pos += n;
        return s;
    }
};

Reader read_all(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw DataError("cannot open checkpoint: " + path);
    Reader r;
    std::fseek(f.get(), 0, SEEK_END);
    const long size = std::ftell(f.get());
    std::fseek(f.get(), 0, SEEK_SET);
    if (size < 0) throw DataError("cannot stat checkpoint: " + path);
    r.bytes.resize(static_cast<std::size_t>(size));
    if (size > 0 && std::fread(r.bytes.data(), 1, r.bytes.size(), f.get()) != r.bytes.size()) {
        throw DataError("cannot read checkpoint: " + path);
    }
    return r;
}

// parameters first, then buffers, both in registration order
std::vector<std::pair<std::string, torch::Tensor>> named_state(const torch::nn::Module& m) {
    std::vector<std::pair<std::string, torch::Tensor>> out;
    for (const auto& p : m.named_parameters(/*recurse=*/true)) out.emplace_back(p.key(), p.value());
    for (const auto& b : m.named_buffers(/*recurse=*/true)) out.emplace_back(b.key(), b.value());
    return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const torch::nn::Module& module,
                     const std::map<std::string, std::string>& meta) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);

    put_u32(out, static_cast<uint32_t>(meta.size()));
    for (const auto& [k, v] : meta) {
        put_str(out, k);
        put_str(out, v);
    }

    const auto state = named_state(module);
    put_u32(out, static_cast<uint32_t>(state.size()));
    for (const auto& [name, tensor] : state) {
        torch::Tensor t = tensor.detach().cpu().contiguous();
        put_str(out, name);
        out.push_back(dtype_code(t.scalar_type()));
        put_u32(out, static_cast<uint32_t>(t.dim()));
        for (int64_t d = 0; d < t.dim(); ++d) put_u64(out, static_cast<uint64_t>(t.size(d)));
        const std::size_t nbytes = t.numel() * t.element_size();
        put_u64(out, nbytes);
        const auto* src = static_cast<const uint8_t*>(t.const_data_ptr());
        out.insert(out.end(), src, src + nbytes);
    }

    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw DataError("cannot write checkpoint: " + path);
    if (!out.empty() && std::fwrite(out.data(), 1, out.size(), f.get()) != out.size()) {
        throw DataError("short write on checkpoint: " + path);
    }
}

namespace {

std::map<std::string, std::string> parse_meta(Reader& r) {
    r.need(4, "magic");
    if (std::memcmp(r.bytes.data(), kMagic, 4) != 0) {
        throw FormatError("not a checkpoint file (bad magic)", 0);
    }
    r.pos = 4;
    const uint32_t version = r.u32("version");
    if (version != kVersion) throw FormatError("unsupported checkpoint version", 4);

    std::map<std::string, std::string> meta;
    const uint32_t n_meta = r.u32("meta count");
    for (uint32_t i = 0; i < n_meta; ++i) {
        std::string k = r.str("meta key");
        meta[k] = r.str("meta value");
    }
    return meta;
}

}  // namespace

std::map<std::string, std::string> load_checkpoint(const std::string& path,
                                                   torch::nn::Module& module) {
    Reader r = read_all(path);
    auto meta = parse_meta(r);

    auto state = named_state(module);
    std::map<std::string, torch::Tensor> by_name(state.begin(), state.end());

    const uint32_t n_tensors = r.u32("tensor count");
    if (n_tensors != state.size()) {
        throw FormatError("checkpoint tensor count does not match the model", r.pos - 4);
    }
    torch::NoGradGuard no_grad;
    for (uint32_t i = 0; i < n_tensors; ++i) {
        const std::string name = r.str("tensor name");
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw FormatError("checkpoint tensor not present in model: " + name, r.pos);
        }
        const torch::ScalarType dtype = dtype_from_code(r.u8("dtype"));
        const uint32_t ndim = r.u32("ndim");
        std::vector<int64_t> dims(ndim);
        for (uint32_t d = 0; d < ndim; ++d) dims[d] = static_cast<int64_t>(r.u64("dim"));
        const uint64_t nbytes = r.u64("byte length");
        r.need(nbytes, "tensor payload");

        torch::Tensor& dst = it->second;
        if (dst.scalar_type() != dtype || dst.sizes() != torch::IntArrayRef(dims)) {
            throw FormatError("checkpoint tensor shape/dtype mismatch: " + name, r.pos);
        }
        torch::Tensor loaded = torch::empty(dims, dtype);
        std::memcpy(loaded.data_ptr(), r.bytes.data() + r.pos, nbytes);
        r.pos += nbytes;
        dst.copy_(loaded);
    }
    return meta;
}

std::map<std::string, std::string> read_checkpoint_meta(const std::string& path) {
    Reader r = read_all(path);
    return parse_meta(r);
}

void export_codebook(const std::string& path, const torch::Tensor& codebook) {
    if (codebook.dim() != 2) throw ShapeError("codebook must be a K x D matrix");
    torch::Tensor t = codebook.detach().cpu().to(torch::kFloat32).contiguous();
    std::vector<uint8_t> out;
    put_u32(out, static_cast<uint32_t>(t.size(0)));
    put_u32(out, static_cast<uint32_t>(t.size(1)));
    const auto* src = static_cast<const uint8_t*>(t.const_data_ptr());
    out.insert(out.end(), src, src + t.numel() * sizeof(float));
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw DataError("cannot write codebook export: " + path);
    if (std::fwrite(out.data(), 1, out.size(), f.get()) != out.size()) {
        throw DataError("short write on codebook export: " + path);
    }
}

}  // namespace mapprior
