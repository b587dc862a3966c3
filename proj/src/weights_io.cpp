#include "hvc/weights_io.hpp"

#include <cstdio>
#include <cstring>
#include <map>
#include <memory>

namespace hvc {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u16(std::FILE* f, uint16_t v) {
    const uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
    std::fwrite(b, 1, 2, f);
}

void put_u32(std::FILE* f, uint32_t v) {
    const uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                          static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
    std::fwrite(b, 1, 4, f);
}

void put_f32(std::FILE* f, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(f, bits);
}

bool get_bytes(std::FILE* f, void* dst, size_t n) { return std::fread(dst, 1, n, f) == n; }

bool get_u16(std::FILE* f, uint16_t& v) {
    uint8_t b[2];
    if (!get_bytes(f, b, 2)) return false;
    v = static_cast<uint16_t>(b[0] | (b[1] << 8));
    return true;
}

bool get_u32(std::FILE* f, uint32_t& v) {
    uint8_t b[4];
    if (!get_bytes(f, b, 4)) return false;
    v = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
        (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    return true;
}

bool get_f32(std::FILE* f, float& v) {
    uint32_t bits;
    if (!get_u32(f, bits)) return false;
    std::memcpy(&v, &bits, 4);
    return true;
}

} // namespace

void write_weights(const std::string& path, const std::vector<TensorRef>& refs) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot open " + path + " for writing");
    std::fwrite("HVCW", 1, 4, f.get());
    put_u32(f.get(), kWeightFormatVersion);
    put_u32(f.get(), static_cast<uint32_t>(refs.size()));
    for (const auto& r : refs) {
        put_u16(f.get(), static_cast<uint16_t>(r.name.size()));
        std::fwrite(r.name.data(), 1, r.name.size(), f.get());
        std::fputc(static_cast<int>(r.dims.size()), f.get());
        size_t expect = 1;
        for (int d : r.dims) {
            put_u32(f.get(), static_cast<uint32_t>(d));
            expect *= static_cast<size_t>(d);
        }
        if (expect != r.value->size())
            throw ShapeMismatch("tensor " + r.name + " dims do not match its size");
        for (double v : *r.value) put_f32(f.get(), static_cast<float>(v));
    }
    if (std::ferror(f.get())) throw IoError("short write: " + path);
}

std::vector<LoadedTensor> read_weights(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open " + path);
    char magic[4];
    if (!get_bytes(f.get(), magic, 4) || std::memcmp(magic, "HVCW", 4) != 0)
        throw ParseError("bad magic in weight file " + path);
    uint32_t version = 0, count = 0;
    if (!get_u32(f.get(), version) || !get_u32(f.get(), count))
        throw ParseError("truncated weight file header: " + path);
    if (version != kWeightFormatVersion)
        throw WeightTopologyMismatch("unsupported weight format version " + std::to_string(version));
    std::vector<LoadedTensor> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        uint16_t name_len = 0;
        if (!get_u16(f.get(), name_len)) throw ParseError("truncated tensor header: " + path);
        std::string name(name_len, '\0');
        if (!get_bytes(f.get(), name.data(), name_len)) throw ParseError("truncated name: " + path);
        const int rank = std::fgetc(f.get());
        if (rank < 0) throw ParseError("truncated rank: " + path);
        LoadedTensor t;
        t.name = std::move(name);
        size_t n = 1;
        for (int d = 0; d < rank; ++d) {
            uint32_t dim = 0;
            if (!get_u32(f.get(), dim)) throw ParseError("truncated dims: " + path);
            t.dims.push_back(static_cast<int>(dim));
            n *= dim;
        }
        t.values.resize(n);
        for (size_t k = 0; k < n; ++k) {
            float v = 0;
            if (!get_f32(f.get(), v)) throw ParseError("truncated payload in " + t.name);
            t.values[k] = v;
        }
        out.push_back(std::move(t));
    }
    return out;
}

void load_weights_into(const std::string& path, const std::vector<TensorRef>& refs) {
    const auto loaded = read_weights(path);
    std::map<std::string, const LoadedTensor*> by_name;
    for (const auto& t : loaded) by_name[t.name] = &t;
    for (const auto& r : refs) {
        auto it = by_name.find(r.name);
        if (it == by_name.end())
            throw WeightTopologyMismatch("missing tensor " + r.name + " in " + path);
        const LoadedTensor& t = *it->second;
        if (t.dims != r.dims)
            throw WeightTopologyMismatch("dims mismatch for tensor " + r.name + " in " + path);
        if (t.values.size() != r.value->size())
            throw WeightTopologyMismatch("size mismatch for tensor " + r.name);
        *r.value = t.values;
    }
}

} // namespace hvc
