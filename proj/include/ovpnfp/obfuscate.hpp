#ifndef OVPNFP_OBFUSCATE_HPP
#define OVPNFP_OBFUSCATE_HPP

#include <algorithm>
#include <stdexcept>

#include "ovpnfp/bytes.hpp"

namespace ovpnfp {

// Scrambler primitives of the unofficial XOR patch. Every transform keeps the
// first byte's mapping independent of the rest of the buffer, which is what
// the opcode fingerprint exploits.

inline Bytes xor_mask(std::span<const uint8_t> buf, std::span<const uint8_t> key) {
    if (buf.empty()) throw std::invalid_argument("xor_mask: empty buffer");
    if (key.empty()) throw std::invalid_argument("xor_mask: empty key");
    Bytes out(buf.begin(), buf.end());
    for (size_t i = 0; i < out.size(); i++) out[i] ^= key[i % key.size()];
    return out;
}

inline Bytes xor_ptr_pos(std::span<const uint8_t> buf) {
    if (buf.empty()) throw std::invalid_argument("xor_ptr_pos: empty buffer");
    Bytes out(buf.begin(), buf.end());
    for (size_t i = 0; i < out.size(); i++)
        out[i] ^= static_cast<uint8_t>((i + 1) & 0xff);
    return out;
}

inline Bytes reverse_keep_first(std::span<const uint8_t> buf) {
    if (buf.empty()) throw std::invalid_argument("reverse_keep_first: empty buffer");
    Bytes out(buf.begin(), buf.end());
    std::reverse(out.begin() + 1, out.end());
    return out;
}

// Patch composition order: position-xor, reverse (first byte pinned),
// position-xor again, then key mask.
inline Bytes obfuscate_composite(std::span<const uint8_t> buf, std::span<const uint8_t> key) {
    Bytes out = xor_ptr_pos(buf);
    out = reverse_keep_first(out);
    out = xor_ptr_pos(out);
    return xor_mask(out, key);
}

// Inverse: each step is an involution, applied in reverse order.
inline Bytes deobfuscate_composite(std::span<const uint8_t> buf, std::span<const uint8_t> key) {
    Bytes out = xor_mask(buf, key);
    out = xor_ptr_pos(out);
    out = reverse_keep_first(out);
    return xor_ptr_pos(out);
}

enum class ObfsMode : uint8_t { None, XorMask, XorPtrPos, ReverseKeepFirst, Composite };

inline const char* obfs_mode_name(ObfsMode m) {
    switch (m) {
        case ObfsMode::None: return "none";
        case ObfsMode::XorMask: return "xor";
        case ObfsMode::XorPtrPos: return "xorptrpos";
        case ObfsMode::ReverseKeepFirst: return "reverse";
        default: return "composite";
    }
}

struct Obfuscator {
    ObfsMode mode = ObfsMode::None;
    Bytes key;

    Bytes apply(std::span<const uint8_t> buf) const {
        switch (mode) {
            case ObfsMode::None: return Bytes(buf.begin(), buf.end());
            case ObfsMode::XorMask: return xor_mask(buf, key);
            case ObfsMode::XorPtrPos: return xor_ptr_pos(buf);
            case ObfsMode::ReverseKeepFirst: return reverse_keep_first(buf);
            case ObfsMode::Composite: return obfuscate_composite(buf, key);
        }
        return Bytes(buf.begin(), buf.end());
    }

    Bytes invert(std::span<const uint8_t> buf) const {
        switch (mode) {
            case ObfsMode::None: return Bytes(buf.begin(), buf.end());
            case ObfsMode::XorMask: return xor_mask(buf, key);
            case ObfsMode::XorPtrPos: return xor_ptr_pos(buf);
            case ObfsMode::ReverseKeepFirst: return reverse_keep_first(buf);
            case ObfsMode::Composite: return deobfuscate_composite(buf, key);
        }
        return Bytes(buf.begin(), buf.end());
    }
};

}  // namespace ovpnfp

#endif  // OVPNFP_OBFUSCATE_HPP
