#ifndef OVPNFP_BYTES_HPP
#define OVPNFP_BYTES_HPP

#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ovpnfp {

using Bytes = std::vector<uint8_t>;

inline uint16_t load_be16(const uint8_t* p) {
    return static_cast<uint16_t>((p[0] << 8) | p[1]);
}

inline uint32_t load_be32(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

inline void store_be16(uint8_t* p, uint16_t v) {
    p[0] = static_cast<uint8_t>(v >> 8);
    p[1] = static_cast<uint8_t>(v & 0xff);
}

inline void store_be32(uint8_t* p, uint32_t v) {
    p[0] = static_cast<uint8_t>(v >> 24);
    p[1] = static_cast<uint8_t>(v >> 16);
    p[2] = static_cast<uint8_t>(v >> 8);
    p[3] = static_cast<uint8_t>(v);
}

inline uint16_t load_le16(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

inline uint32_t load_le32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline void append_bytes(Bytes& out, std::span<const uint8_t> data) {
    out.insert(out.end(), data.begin(), data.end());
}

inline std::string to_hex(std::span<const uint8_t> data) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(data.size() * 2);
    for (uint8_t b : data) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0xf]);
    }
    return s;
}

// Deterministic RNG wrapper. mt19937_64 output is specified by the standard,
// and the helpers below avoid std::*_distribution (whose mapping is
// implementation-defined), so values frozen in tests hold across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform integer in [lo, hi]. Modulo bias is irrelevant at our ranges.
    uint64_t uniform(uint64_t lo, uint64_t hi) {
        return lo + eng_() % (hi - lo + 1);
    }

    uint8_t next_byte() { return static_cast<uint8_t>(eng_() & 0xff); }

    // Uniform double in [0, 1) with 53-bit resolution.
    double next_unit() {
        return static_cast<double>(eng_() >> 11) * (1.0 / 9007199254740992.0);
    }

    bool chance(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return next_unit() < p;
    }

    Bytes bytes(size_t n) {
        Bytes out(n);
        for (auto& b : out) b = next_byte();
        return out;
    }

private:
    std::mt19937_64 eng_;
};

// FNV-1a, used where a stable non-cryptographic hash is needed.
inline uint64_t fnv1a64(std::span<const uint8_t> data, uint64_t h = 0xcbf29ce484222325ull) {
    for (uint8_t b : data) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace ovpnfp

#endif  // OVPNFP_BYTES_HPP
