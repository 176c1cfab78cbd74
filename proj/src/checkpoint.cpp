#include "t1/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace t1 {

uint32_t crc32(const void* data, size_t n, uint32_t crc) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    const auto* p = static_cast<const uint8_t*>(data);
    crc = ~crc;
    for (size_t i = 0; i < n; ++i) crc = table[(crc ^ p[i]) & 0xFF] ^ (crc >> 8);
    return ~crc;
}

namespace {

constexpr char kMagic[4] = {'T', '1', 'C', 'P'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kDtypeF32 = 0;
constexpr uint8_t kDtypeF64 = 1;

void put_bytes(std::string& buf, const void* p, size_t n) {
    buf.append(static_cast<const char*>(p), n);
}

void put_u8(std::string& buf, uint8_t v) { put_bytes(buf, &v, 1); }

void put_u32(std::string& buf, uint32_t v) {
    uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
    put_bytes(buf, b, 4);
}

void put_u64(std::string& buf, uint64_t v) {
    uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
    put_bytes(buf, b, 8);
}

struct Reader {
    const uint8_t* p;
    size_t left;
    std::string path;

    void need(size_t n) const {
        if (left < n) throw IoError(strf("%s: truncated checkpoint", path.c_str()));
    }
    void raw(void* dst, size_t n) {
        need(n);
        std::memcpy(dst, p, n);
        p += n;
        left -= n;
    }
    uint8_t u8() {
        uint8_t v;
        raw(&v, 1);
        return v;
    }
    uint32_t u32() {
        uint8_t b[4];
        raw(b, 4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
        return v;
    }
    uint64_t u64() {
        uint8_t b[8];
        raw(b, 8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
        return v;
    }
    std::string str(size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        left -= n;
        return s;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::string buf;
    put_bytes(buf, kMagic, 4);
    put_u32(buf, kVersion);
    put_u64(buf, ckpt.config_text.size());
    put_bytes(buf, ckpt.config_text.data(), ckpt.config_text.size());
    put_u64(buf, ckpt.tensors.size());
    for (const auto& [name, tensor] : ckpt.tensors) {
        put_u32(buf, static_cast<uint32_t>(name.size()));
        put_bytes(buf, name.data(), name.size());
        put_u8(buf, sizeof(real_t) == 4 ? kDtypeF32 : kDtypeF64);
        const auto& shape = tensor.shape();
        put_u32(buf, static_cast<uint32_t>(shape.size()));
        for (int64_t d : shape) put_u64(buf, static_cast<uint64_t>(d));
        for (real_t v : tensor.data()) {
            if constexpr (sizeof(real_t) == 4) {
                put_u32(buf, std::bit_cast<uint32_t>(static_cast<float>(v)));
            } else {
                put_u64(buf, std::bit_cast<uint64_t>(static_cast<double>(v)));
            }
        }
    }
    put_u32(buf, crc32(buf.data(), buf.size()));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(strf("%s: cannot open for writing", path.c_str()));
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw IoError(strf("%s: write failed", path.c_str()));
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(strf("%s: cannot open", path.c_str()));
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (buf.size() < 4 + 4 + 8 + 8 + 4) throw IoError(strf("%s: truncated checkpoint", path.c_str()));
    Reader r{reinterpret_cast<const uint8_t*>(buf.data()), buf.size() - 4, path};
    uint32_t stored = 0;
    for (int i = 0; i < 4; ++i)
        stored |= static_cast<uint32_t>(static_cast<uint8_t>(buf[buf.size() - 4 + i])) << (8 * i);
    if (crc32(buf.data(), buf.size() - 4) != stored) {
        throw IoError(strf("%s: checksum mismatch", path.c_str()));
    }

    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw IoError(strf("%s: not a checkpoint", path.c_str()));
    const uint32_t version = r.u32();
    if (version != kVersion) {
        throw IoError(strf("%s: unsupported checkpoint version %u", path.c_str(), version));
    }

    Checkpoint ckpt;
    ckpt.config_text = r.str(r.u64());
    const uint64_t count = r.u64();
    for (uint64_t i = 0; i < count; ++i) {
        std::string name = r.str(r.u32());
        const uint8_t dtype = r.u8();
        if (dtype != kDtypeF32 && dtype != kDtypeF64) {
            throw IoError(strf("%s: unknown dtype %u for '%s'", path.c_str(), dtype, name.c_str()));
        }
        const uint32_t rank = r.u32();
        if (rank == 0 || rank > 8) throw IoError(strf("%s: bad rank for '%s'", path.c_str(), name.c_str()));
        Shape shape(rank);
        int64_t numel = 1;
        for (auto& d : shape) {
            d = static_cast<int64_t>(r.u64());
            if (d <= 0 || numel > (int64_t(1) << 40) / d) {
                throw IoError(strf("%s: bad dims for '%s'", path.c_str(), name.c_str()));
            }
            numel *= d;
        }
        std::vector<real_t> data(static_cast<size_t>(numel));
        for (auto& v : data) {
            if (dtype == kDtypeF32) {
                v = static_cast<real_t>(std::bit_cast<float>(r.u32()));
            } else {
                v = static_cast<real_t>(std::bit_cast<double>(r.u64()));
            }
        }
        ckpt.tensors.emplace_back(std::move(name), Tensor::from_vector(std::move(shape), std::move(data)));
    }
    if (r.left != 0) throw IoError(strf("%s: trailing bytes", path.c_str()));
    return ckpt;
}

}  // namespace t1
