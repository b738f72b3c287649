#ifndef OVPNFP_NET_HPP
#define OVPNFP_NET_HPP

#include <array>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>

#include "ovpnfp/bytes.hpp"

namespace ovpnfp {

enum class Transport : uint8_t { Tcp, Udp };

inline const char* transport_name(Transport t) {
    return t == Transport::Tcp ? "tcp" : "udp";
}

// IPv4 or IPv6 address, stored big-endian. IPv4 uses the first 4 bytes.
struct IpAddr {
    bool v6 = false;
    std::array<uint8_t, 16> bytes{};

    static IpAddr v4(uint8_t a, uint8_t b, uint8_t c, uint8_t d) {
        IpAddr ip;
        ip.bytes[0] = a; ip.bytes[1] = b; ip.bytes[2] = c; ip.bytes[3] = d;
        return ip;
    }

    static IpAddr from_v4_u32(uint32_t host_order) {
        return v4(static_cast<uint8_t>(host_order >> 24), static_cast<uint8_t>(host_order >> 16),
                  static_cast<uint8_t>(host_order >> 8), static_cast<uint8_t>(host_order));
    }

    uint32_t as_v4_u32() const {
        return load_be32(bytes.data());
    }

    size_t width() const { return v6 ? 16 : 4; }

    std::span<const uint8_t> raw() const { return {bytes.data(), width()}; }

    auto operator<=>(const IpAddr&) const = default;
    bool operator==(const IpAddr&) const = default;

    std::string str() const {
        char buf[64];
        if (!v6) {
            std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", bytes[0], bytes[1], bytes[2], bytes[3]);
            return buf;
        }
        std::string s;
        for (int i = 0; i < 16; i += 2) {
            std::snprintf(buf, sizeof(buf), "%x", (bytes[i] << 8) | bytes[i + 1]);
            if (i) s.push_back(':');
            s += buf;
        }
        return s;
    }
};

// Parses dotted-quad IPv4 or hex IPv6 (eight colon groups or "::" shorthand).
inline std::optional<IpAddr> parse_ip(const std::string& s) {
    IpAddr ip;
    if (s.find(':') == std::string::npos) {
        unsigned a, b, c, d;
        char tail;
        if (std::sscanf(s.c_str(), "%u.%u.%u.%u%c", &a, &b, &c, &d, &tail) != 4) return std::nullopt;
        if (a > 255 || b > 255 || c > 255 || d > 255) return std::nullopt;
        return IpAddr::v4(static_cast<uint8_t>(a), static_cast<uint8_t>(b),
                          static_cast<uint8_t>(c), static_cast<uint8_t>(d));
    }
    ip.v6 = true;
    std::array<uint16_t, 8> groups{};
    size_t n_groups = 0;
    int dcolon_at = -1;
    size_t pos = 0;
    if (s.rfind("::", 0) == 0) {
        dcolon_at = 0;
        pos = 2;
    }
    while (pos <= s.size() && n_groups < 8) {
        if (pos == s.size()) break;
        size_t next = s.find(':', pos);
        std::string grp = s.substr(pos, next == std::string::npos ? next : next - pos);
        if (grp.empty()) return std::nullopt;
        unsigned v;
        char tail;
        if (std::sscanf(grp.c_str(), "%x%c", &v, &tail) != 1 || v > 0xffff) return std::nullopt;
        groups[n_groups++] = static_cast<uint16_t>(v);
        if (next == std::string::npos) break;
        pos = next + 1;
        if (pos < s.size() && s[pos] == ':') {
            if (dcolon_at >= 0) return std::nullopt;
            dcolon_at = static_cast<int>(n_groups);
            pos++;
        }
    }
    std::array<uint16_t, 8> full{};
    if (dcolon_at < 0) {
        if (n_groups != 8) return std::nullopt;
        full = groups;
    } else {
        size_t tail_n = n_groups - static_cast<size_t>(dcolon_at);
        for (int i = 0; i < dcolon_at; i++) full[static_cast<size_t>(i)] = groups[static_cast<size_t>(i)];
        for (size_t i = 0; i < tail_n; i++) full[8 - tail_n + i] = groups[static_cast<size_t>(dcolon_at) + i];
    }
    for (int i = 0; i < 8; i++) store_be16(&ip.bytes[static_cast<size_t>(i * 2)], full[static_cast<size_t>(i)]);
    return ip;
}

struct Endpoint {
    IpAddr addr;
    uint16_t port = 0;

    auto operator<=>(const Endpoint&) const = default;
    bool operator==(const Endpoint&) const = default;

    std::string str() const {
        if (addr.v6) return "[" + addr.str() + "]:" + std::to_string(port);
        return addr.str() + ":" + std::to_string(port);
    }
};

// Target line format used by the prober: "tcp://1.2.3.4:1194" or
// "udp://[2001:db8::1]:1194".
struct Target {
    Transport transport = Transport::Tcp;
    Endpoint endpoint;

    std::string str() const {
        return std::string(transport_name(transport)) + "://" + endpoint.str();
    }
};

inline std::optional<Target> parse_target(const std::string& line) {
    Target t;
    std::string rest;
    if (line.rfind("tcp://", 0) == 0) {
        t.transport = Transport::Tcp;
        rest = line.substr(6);
    } else if (line.rfind("udp://", 0) == 0) {
        t.transport = Transport::Udp;
        rest = line.substr(6);
    } else {
        return std::nullopt;
    }
    std::string host, port_s;
    if (!rest.empty() && rest[0] == '[') {
        auto close = rest.find(']');
        if (close == std::string::npos || close + 1 >= rest.size() || rest[close + 1] != ':')
            return std::nullopt;
        host = rest.substr(1, close - 1);
        port_s = rest.substr(close + 2);
    } else {
        auto colon = rest.rfind(':');
        if (colon == std::string::npos) return std::nullopt;
        host = rest.substr(0, colon);
        port_s = rest.substr(colon + 1);
    }
    auto ip = parse_ip(host);
    if (!ip) return std::nullopt;
    unsigned long port = 0;
    try {
        port = std::stoul(port_s);
    } catch (...) {
        return std::nullopt;
    }
    if (port > 65535) return std::nullopt;
    t.endpoint = {*ip, static_cast<uint16_t>(port)};
    return t;
}

}  // namespace ovpnfp

#endif  // OVPNFP_NET_HPP
