#ifndef OVPNFP_TRACE_HPP
#define OVPNFP_TRACE_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ovpnfp/flow.hpp"
#include "ovpnfp/obfuscate.hpp"
#include "ovpnfp/pcap.hpp"

namespace ovpnfp {

// OpenVPN first-byte values with key-id 0: (opcode << 3).
namespace opcodes {
constexpr uint8_t kClientResetV2 = 7 << 3;  // 0x38
constexpr uint8_t kServerResetV2 = 8 << 3;  // 0x40
constexpr uint8_t kAckV1 = 5 << 3;          // 0x28
constexpr uint8_t kControlV1 = 4 << 3;      // 0x20
constexpr uint8_t kDataV2 = 9 << 3;         // 0x48
}  // namespace opcodes

enum class Persona : uint8_t { OpenVpn, Http, Tls, Ssh, Echo, Obfs4Like, PortShared, Random };

inline const char* persona_name(Persona p) {
    switch (p) {
        case Persona::OpenVpn: return "openvpn";
        case Persona::Http: return "http";
        case Persona::Tls: return "tls";
        case Persona::Ssh: return "ssh";
        case Persona::Echo: return "echo";
        case Persona::Obfs4Like: return "obfs4like";
        case Persona::PortShared: return "portshared";
        default: return "random";
    }
}

// How trace units map onto a TCP byte stream.
enum class WireFraming : uint8_t {
    LengthPrefixed,  // writer inserts the 2-byte OpenVPN TCP length prefix
    Stream,          // units are raw wire bytes already
};

struct TracePacket {
    Direction direction = Direction::ClientToServer;
    Bytes payload;        // one protocol unit, transport framing excluded
    uint32_t gap_us = 0;  // inter-arrival gap before this packet
};

struct SyntheticTrace {
    Transport transport = Transport::Udp;
    WireFraming framing = WireFraming::LengthPrefixed;
    Persona persona = Persona::OpenVpn;
    uint64_t seed = 0;
    std::string obfuscation = "none";
    std::vector<TracePacket> packets;
};

struct TraceConfig {
    Persona persona = Persona::OpenVpn;
    Transport transport = Transport::Udp;
    uint32_t n_packets = 200;
    // OpenVPN persona: protocol ACK frame size. Fixed per session; only
    // relative equality matters to the fingerprint.
    uint32_t ack_size_udp = 22;
    uint32_t ack_size_tcp = 50;
    Obfuscator obfuscation;
};

namespace detail {

inline Bytes frame_bytes(Rng& rng, uint8_t opcode, uint32_t len) {
    Bytes b = rng.bytes(len);
    b[0] = opcode;
    return b;
}

// Distinct sizes make a flow immune to accidental ACK-size collisions no
// matter how it is subsampled.
inline std::vector<uint32_t> distinct_sizes(Rng& rng, uint32_t n, uint32_t base, uint32_t step) {
    std::vector<uint32_t> sizes(n);
    for (uint32_t i = 0; i < n; i++) sizes[i] = base + i * step;
    for (uint32_t i = n; i > 1; i--) {
        uint32_t j = static_cast<uint32_t>(rng.uniform(0, i - 1));
        std::swap(sizes[i - 1], sizes[j]);
    }
    return sizes;
}

inline uint32_t control_size(Rng& rng, uint32_t avoid) {
    for (;;) {
        uint32_t s = static_cast<uint32_t>(rng.uniform(60, 1380));
        if (s != avoid) return s;
    }
}

inline uint32_t data_size(Rng& rng, uint32_t avoid) {
    for (;;) {
        uint32_t s = static_cast<uint32_t>(rng.uniform(100, 1400));
        if (s != avoid) return s;
    }
}

inline void gen_openvpn(const TraceConfig& cfg, Rng& rng, SyntheticTrace& tr) {
    uint32_t n = std::max<uint32_t>(cfg.n_packets, 4);
    uint32_t ack = cfg.transport == Transport::Udp ? cfg.ack_size_udp : cfg.ack_size_tcp;

    // Session establishment: client reset, server reset, protocol ACK, then
    // the TLS exchange carried in Control packets.
    struct Slot {
        Direction dir;
        uint8_t op;
        uint32_t len;
    };
    std::vector<Slot> slots;
    slots.reserve(n);
    slots.push_back({Direction::ClientToServer, opcodes::kClientResetV2, 14});
    slots.push_back({Direction::ServerToClient, opcodes::kServerResetV2, 26});
    slots.push_back({Direction::ClientToServer, opcodes::kAckV1, ack});
    slots.push_back({Direction::ClientToServer, opcodes::kControlV1, control_size(rng, ack)});

    // Handshake spans the first six bins; ACK-size packets appear only there.
    uint32_t handshake_end = std::min<uint32_t>(n, 60);
    std::vector<uint32_t> ack_quota(6, 0);
    ack_quota[0] = static_cast<uint32_t>(rng.uniform(1, 3));  // includes the slot-2 ACK
    ack_quota[1] = static_cast<uint32_t>(rng.uniform(2, 5));
    for (int b = 2; b < 5; b++) ack_quota[static_cast<size_t>(b)] = static_cast<uint32_t>(rng.uniform(0, 3));
    ack_quota[5] = 0;

    std::vector<bool> is_ack(handshake_end, false);
    is_ack[2] = true;
    for (uint32_t b = 0; b < 6; b++) {
        uint32_t lo = b * 10, hi = std::min(handshake_end, (b + 1) * 10);
        if (lo >= hi) break;
        uint32_t want = ack_quota[b];
        if (b == 0 && want > 0) want--;  // slot 2 already placed
        uint32_t guard = 0;
        while (want > 0 && guard < 1000) {
            uint32_t pos = static_cast<uint32_t>(rng.uniform(std::max(lo, 4u), hi - 1));
            if (!is_ack[pos]) {
                is_ack[pos] = true;
                want--;
            }
            guard++;
        }
    }

    for (uint32_t i = 4; i < handshake_end; i++) {
        Direction dir = rng.chance(0.5) ? Direction::ClientToServer : Direction::ServerToClient;
        if (is_ack[i])
            slots.push_back({dir, opcodes::kAckV1, ack});
        else
            slots.push_back({dir, opcodes::kControlV1, control_size(rng, ack)});
    }
    for (uint32_t i = handshake_end; i < n; i++) {
        Direction dir = rng.chance(0.5) ? Direction::ClientToServer : Direction::ServerToClient;
        slots.push_back({dir, opcodes::kDataV2, data_size(rng, ack)});
    }

    for (const Slot& s : slots) {
        TracePacket p;
        p.direction = s.dir;
        p.payload = frame_bytes(rng, s.op, s.len);
        if (cfg.obfuscation.mode != ObfsMode::None)
            p.payload = cfg.obfuscation.apply(p.payload);
        p.gap_us = static_cast<uint32_t>(rng.uniform(500, 20000));
        tr.packets.push_back(std::move(p));
    }
    tr.framing = WireFraming::LengthPrefixed;
}

inline Bytes printable(Rng& rng, size_t n) {
    Bytes b(n);
    for (auto& c : b) c = static_cast<uint8_t>(rng.uniform(0x20, 0x7e));
    return b;
}

inline void gen_http(const TraceConfig& cfg, Rng& rng, SyntheticTrace& tr) {
    uint32_t n = std::max<uint32_t>(cfg.n_packets, 3);
    std::string req = "GET /a" + std::to_string(rng.uniform(0, 999999)) +
                      " HTTP/1.1\r\nHost: h" + std::to_string(rng.uniform(0, 99999)) +
                      ".example.net\r\nUser-Agent: fetch/1." + std::to_string(rng.uniform(0, 9)) +
                      "\r\nAccept: */*\r\n\r\n";
    tr.packets.push_back({Direction::ClientToServer, Bytes(req.begin(), req.end()),
                          static_cast<uint32_t>(rng.uniform(500, 20000))});
    std::string hdr = "HTTP/1.1 200 OK\r\nServer: httpd\r\nContent-Type: text/html\r\n\r\n";
    Bytes first(hdr.begin(), hdr.end());
    Bytes body = printable(rng, 1200);
    append_bytes(first, body);
    tr.packets.push_back({Direction::ServerToClient, std::move(first),
                          static_cast<uint32_t>(rng.uniform(500, 20000))});
    for (uint32_t i = 2; i < n; i++) {
        size_t len = i + 1 == n ? rng.uniform(100, 900) : 1460;
        tr.packets.push_back({Direction::ServerToClient, printable(rng, len),
                              static_cast<uint32_t>(rng.uniform(200, 5000))});
    }
    tr.framing = WireFraming::Stream;
}

inline Bytes tls_record(Rng& rng, uint8_t type, uint16_t body_len) {
    Bytes rec(5u + body_len);
    rec[0] = type;
    rec[1] = 0x03;
    rec[2] = 0x03;
    store_be16(&rec[3], body_len);
    for (size_t i = 5; i < rec.size(); i++) rec[i] = rng.next_byte();
    return rec;
}

inline void gen_tls(const TraceConfig& cfg, Rng& rng, SyntheticTrace& tr) {
    uint32_t n = std::max<uint32_t>(cfg.n_packets, 6);
    auto push = [&](Direction d, Bytes b) {
        tr.packets.push_back({d, std::move(b), static_cast<uint32_t>(rng.uniform(200, 8000))});
    };
    Bytes ch = tls_record(rng, 0x16, 240);
    ch[2] = 0x01;  // ClientHello still advertises TLS 1.0 in the record layer
    push(Direction::ClientToServer, std::move(ch));
    push(Direction::ServerToClient, tls_record(rng, 0x16, 1455));
    push(Direction::ServerToClient, tls_record(rng, 0x16, 1455));
    push(Direction::ServerToClient, tls_record(rng, 0x16, 832));
    push(Direction::ClientToServer, tls_record(rng, 0x14, 1));
    push(Direction::ClientToServer, tls_record(rng, 0x16, 40));
    auto sizes = distinct_sizes(rng, n, 120, 7);
    for (uint32_t i = 6; i < n; i++) {
        Direction d = rng.chance(0.45) ? Direction::ClientToServer : Direction::ServerToClient;
        push(d, tls_record(rng, 0x17, static_cast<uint16_t>(sizes[i])));
    }
    tr.framing = WireFraming::Stream;
}

inline void gen_ssh(const TraceConfig& cfg, Rng& rng, SyntheticTrace& tr) {
    uint32_t n = std::max<uint32_t>(cfg.n_packets, 4);
    std::string cb = "SSH-2.0-OpenSSH_8." + std::to_string(rng.uniform(0, 9)) + "\r\n";
    std::string sb = "SSH-2.0-OpenSSH_9." + std::to_string(rng.uniform(0, 9)) + "\r\n";
    tr.packets.push_back({Direction::ClientToServer, Bytes(cb.begin(), cb.end()), 1000});
    tr.packets.push_back({Direction::ServerToClient, Bytes(sb.begin(), sb.end()),
                          static_cast<uint32_t>(rng.uniform(500, 9000))});
    auto sizes = distinct_sizes(rng, n, 80, 5);
    for (uint32_t i = 2; i < n; i++) {
        Direction d = rng.chance(0.5) ? Direction::ClientToServer : Direction::ServerToClient;
        tr.packets.push_back({d, rng.bytes(sizes[i]),
                              static_cast<uint32_t>(rng.uniform(200, 8000))});
    }
    tr.framing = WireFraming::Stream;
}

inline void gen_echo(const TraceConfig& cfg, Rng& rng, SyntheticTrace& tr) {
    uint32_t n = std::max<uint32_t>(cfg.n_packets, 2);
    auto sizes = distinct_sizes(rng, (n + 1) / 2, 40, 4);
    for (uint32_t i = 0; i < (n + 1) / 2; i++) {
        Bytes req = rng.bytes(sizes[i]);
        tr.packets.push_back({Direction::ClientToServer, req,
                              static_cast<uint32_t>(rng.uniform(500, 10000))});
        if (tr.packets.size() >= n) break;
        tr.packets.push_back({Direction::ServerToClient, req,
                              static_cast<uint32_t>(rng.uniform(100, 2000))});
    }
    tr.framing = WireFraming::Stream;
}

inline void gen_random(const TraceConfig& cfg, Rng& rng, SyntheticTrace& tr) {
    uint32_t n = std::max<uint32_t>(cfg.n_packets, 2);
    auto sizes = distinct_sizes(rng, n, 64, 3);
    tr.packets.push_back({Direction::ClientToServer, rng.bytes(sizes[0]), 1000});
    for (uint32_t i = 1; i < n; i++) {
        Direction d = rng.chance(0.5) ? Direction::ClientToServer : Direction::ServerToClient;
        tr.packets.push_back({d, rng.bytes(sizes[i]),
                              static_cast<uint32_t>(rng.uniform(200, 9000))});
    }
    tr.framing = WireFraming::Stream;
}

}  // namespace detail

inline SyntheticTrace generate_trace(const TraceConfig& cfg, uint64_t seed) {
    SyntheticTrace tr;
    tr.transport = cfg.transport;
    tr.persona = cfg.persona;
    tr.seed = seed;
    tr.obfuscation = obfs_mode_name(cfg.obfuscation.mode);
    Rng rng(seed);
    switch (cfg.persona) {
        case Persona::OpenVpn: detail::gen_openvpn(cfg, rng, tr); break;
        case Persona::Http: detail::gen_http(cfg, rng, tr); break;
        case Persona::Tls: detail::gen_tls(cfg, rng, tr); break;
        case Persona::Ssh: detail::gen_ssh(cfg, rng, tr); break;
        case Persona::Echo: detail::gen_echo(cfg, rng, tr); break;
        default: detail::gen_random(cfg, rng, tr); break;
    }
    return tr;
}

// Wraps a trace in a constant-overhead encrypted tunnel: a short tunnel
// handshake, then one opaque unit per original packet whose length is
// original+overhead. Tunnel units carry a 2-byte length prefix of their own
// (stream tunnels must delimit frames somehow), so the 1:1 size
// correspondence survives on both transports.
inline SyntheticTrace wrap_tunnel(const SyntheticTrace& in, uint32_t overhead,
                                  uint32_t handshake_frames, uint64_t seed = 0x7dull) {
    SyntheticTrace out;
    out.transport = in.transport;
    out.persona = in.persona;
    out.seed = in.seed;
    out.framing = WireFraming::Stream;
    out.obfuscation = "tunnel:oh=" + std::to_string(overhead) +
                      ",hs=" + std::to_string(handshake_frames);
    Rng rng(seed ^ in.seed);
    auto blob = [&](uint32_t total) {
        Bytes b = rng.bytes(std::max<uint32_t>(total, 3));
        store_be16(b.data(), static_cast<uint16_t>(b.size() - 2));
        return b;
    };
    for (uint32_t i = 0; i < handshake_frames; i++) {
        TracePacket p;
        p.direction = (i % 2 == 0) ? Direction::ClientToServer : Direction::ServerToClient;
        p.payload = blob(static_cast<uint32_t>(rng.uniform(180, 1400)));
        p.gap_us = static_cast<uint32_t>(rng.uniform(500, 15000));
        out.packets.push_back(std::move(p));
    }
    for (const TracePacket& src : in.packets) {
        TracePacket p;
        p.direction = src.direction;
        p.payload = blob(static_cast<uint32_t>(src.payload.size()) + overhead);
        p.gap_us = src.gap_us;
        out.packets.push_back(std::move(p));
    }
    return out;
}

// Tunnel with per-packet random padding in [0, pad_max]; breaks the size
// correspondence the ACK fingerprint depends on.
inline SyntheticTrace wrap_padded(const SyntheticTrace& in, uint32_t overhead, uint32_t pad_max,
                                  uint64_t seed) {
    SyntheticTrace out = wrap_tunnel(in, overhead, 6, seed);
    out.obfuscation = "padded:oh=" + std::to_string(overhead) + ",pad=" + std::to_string(pad_max);
    Rng rng(seed * 0x9e3779b97f4a7c15ull + 1);
    for (TracePacket& p : out.packets) {
        uint32_t pad = static_cast<uint32_t>(rng.uniform(0, pad_max));
        size_t old = p.payload.size();
        p.payload.resize(old + pad);
        for (size_t i = old; i < p.payload.size(); i++) p.payload[i] = rng.next_byte();
        store_be16(p.payload.data(), static_cast<uint16_t>(p.payload.size() - 2));
    }
    return out;
}

struct TraceEndpoints {
    Endpoint client{IpAddr::v4(10, 0, 0, 1), 34012};
    Endpoint server{IpAddr::v4(10, 0, 0, 2), 1194};
};

// Expands a trace into transport packets (TCP handshake, sequencing, MSS
// segmentation) that the filter or a pcap file can consume.
inline std::vector<RawPacket> trace_to_packets(const SyntheticTrace& tr,
                                               TraceEndpoints ep = {},
                                               Timestamp start = {1628900000, 0},
                                               uint32_t mss = 1460) {
    std::vector<RawPacket> out;
    Timestamp now = start;
    auto advance = [&](uint32_t us) {
        now.nsec += us * 1000u;
        now.sec += now.nsec / 1000000000u;
        now.nsec %= 1000000000u;
    };
    auto ends = [&](Direction d) {
        return d == Direction::ClientToServer ? std::make_pair(ep.client, ep.server)
                                              : std::make_pair(ep.server, ep.client);
    };

    if (tr.transport == Transport::Tcp) {
        uint32_t seq[2] = {1000, 5000};  // [client, server]
        auto push_tcp = [&](Direction d, uint8_t flags, std::span<const uint8_t> data) {
            auto [src, dst] = ends(d);
            RawPacket pkt;
            pkt.ts = now;
            pkt.transport = Transport::Tcp;
            pkt.src = src;
            pkt.dst = dst;
            int side = d == Direction::ClientToServer ? 0 : 1;
            pkt.seq = seq[side];
            pkt.tcp_flags = flags;
            pkt.payload.assign(data.begin(), data.end());
            seq[side] += static_cast<uint32_t>(data.size());
            if (flags & 0x02) seq[side]++;  // SYN
            out.push_back(std::move(pkt));
        };
        push_tcp(Direction::ClientToServer, 0x02, {});
        advance(150);
        push_tcp(Direction::ServerToClient, 0x12, {});
        advance(150);
        push_tcp(Direction::ClientToServer, 0x10, {});
        for (const TracePacket& p : tr.packets) {
            advance(p.gap_us);
            Bytes wire;
            if (tr.framing == WireFraming::LengthPrefixed) {
                wire.resize(2 + p.payload.size());
                store_be16(wire.data(), static_cast<uint16_t>(p.payload.size()));
                std::copy(p.payload.begin(), p.payload.end(), wire.begin() + 2);
            } else {
                wire = p.payload;
            }
            for (size_t off = 0; off < wire.size(); off += mss) {
                size_t n = std::min<size_t>(mss, wire.size() - off);
                push_tcp(p.direction, 0x18, std::span<const uint8_t>(wire).subspan(off, n));
            }
        }
    } else {
        for (const TracePacket& p : tr.packets) {
            advance(p.gap_us);
            auto [src, dst] = ends(p.direction);
            RawPacket pkt;
            pkt.ts = now;
            pkt.transport = Transport::Udp;
            pkt.src = src;
            pkt.dst = dst;
            pkt.payload = p.payload;
            out.push_back(std::move(pkt));
        }
    }
    return out;
}

inline void trace_to_pcap(const SyntheticTrace& tr, PcapWriter& w, TraceEndpoints ep = {},
                          Timestamp start = {1628900000, 0}) {
    for (const RawPacket& pkt : trace_to_packets(tr, ep, start)) {
        if (pkt.transport == Transport::Tcp)
            w.write_tcp(pkt.ts, pkt.src, pkt.dst, pkt.seq, 0, pkt.tcp_flags, pkt.payload);
        else
            w.write_udp(pkt.ts, pkt.src, pkt.dst, pkt.payload);
    }
}

}  // namespace ovpnfp

#endif  // OVPNFP_TRACE_HPP
