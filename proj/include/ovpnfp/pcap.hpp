#ifndef OVPNFP_PCAP_HPP
#define OVPNFP_PCAP_HPP

#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ovpnfp/bytes.hpp"
#include "ovpnfp/net.hpp"

namespace ovpnfp {

// Wall-clock timestamp with nanosecond resolution. Classic pcap stores either
// microseconds or nanoseconds in the fractional field depending on the magic.
struct Timestamp {
    uint64_t sec = 0;
    uint32_t nsec = 0;

    double seconds() const { return static_cast<double>(sec) + static_cast<double>(nsec) * 1e-9; }

    auto operator<=>(const Timestamp&) const = default;
    bool operator==(const Timestamp&) const = default;
};

// One transport-layer packet as seen on the wire, after link/IP/TCP/UDP
// headers have been stripped. `payload` may be empty (e.g. pure TCP ACKs).
struct RawPacket {
    Timestamp ts;
    Transport transport = Transport::Tcp;
    Endpoint src;
    Endpoint dst;
    uint32_t seq = 0;       // TCP only
    uint8_t tcp_flags = 0;  // TCP only
    Bytes payload;
};

struct CaptureStats {
    uint64_t packets = 0;        // RawPackets yielded
    uint64_t skipped = 0;        // non-IP or non-TCP/UDP frames
    uint64_t truncated = 0;      // short records / malformed headers
};

namespace pcap_magic {
constexpr uint32_t kUsec = 0xa1b2c3d4;
constexpr uint32_t kNsec = 0xa1b23c4d;
constexpr uint32_t kUsecSwapped = 0xd4c3b2a1;
constexpr uint32_t kNsecSwapped = 0x4d3cb2a1;
}  // namespace pcap_magic

namespace detail {

constexpr uint16_t kEtherIPv4 = 0x0800;
constexpr uint16_t kEtherIPv6 = 0x86dd;
constexpr uint8_t kProtoTcp = 6;
constexpr uint8_t kProtoUdp = 17;

// Decodes Ethernet/IP/TCP|UDP out of one captured frame. Returns nullopt for
// anything we do not track (counted by the caller).
inline std::optional<RawPacket> decode_frame(const uint8_t* data, size_t len, Timestamp ts) {
    if (len < 14) return std::nullopt;
    uint16_t ethertype = load_be16(data + 12);
    const uint8_t* p = data + 14;
    size_t remain = len - 14;

    RawPacket pkt;
    pkt.ts = ts;
    uint8_t proto = 0;

    if (ethertype == kEtherIPv4) {
        if (remain < 20) return std::nullopt;
        uint8_t ihl = static_cast<uint8_t>(p[0] & 0x0f);
        size_t iphdr = static_cast<size_t>(ihl) * 4;
        if ((p[0] >> 4) != 4 || iphdr < 20 || remain < iphdr) return std::nullopt;
        uint16_t total_len = load_be16(p + 2);
        if (total_len < iphdr || total_len > remain) total_len = static_cast<uint16_t>(remain);
        uint16_t frag = load_be16(p + 6);
        if ((frag & 0x1fff) != 0) return std::nullopt;  // non-first fragment; no defrag
        proto = p[9];
        pkt.src.addr = IpAddr::v4(p[12], p[13], p[14], p[15]);
        pkt.dst.addr = IpAddr::v4(p[16], p[17], p[18], p[19]);
        p += iphdr;
        remain = total_len - iphdr;
    } else if (ethertype == kEtherIPv6) {
        if (remain < 40) return std::nullopt;
        uint16_t payload_len = load_be16(p + 4);
        proto = p[6];
        pkt.src.addr.v6 = pkt.dst.addr.v6 = true;
        std::memcpy(pkt.src.addr.bytes.data(), p + 8, 16);
        std::memcpy(pkt.dst.addr.bytes.data(), p + 24, 16);
        p += 40;
        remain = std::min<size_t>(remain - 40, payload_len);
    } else {
        return std::nullopt;
    }

    if (proto == kProtoTcp) {
        if (remain < 20) return std::nullopt;
        pkt.transport = Transport::Tcp;
        pkt.src.port = load_be16(p);
        pkt.dst.port = load_be16(p + 2);
        pkt.seq = load_be32(p + 4);
        size_t doff = static_cast<size_t>(p[12] >> 4) * 4;
        if (doff < 20 || remain < doff) return std::nullopt;
        pkt.tcp_flags = p[13];
        pkt.payload.assign(p + doff, p + remain);
    } else if (proto == kProtoUdp) {
        if (remain < 8) return std::nullopt;
        pkt.transport = Transport::Udp;
        pkt.src.port = load_be16(p);
        pkt.dst.port = load_be16(p + 2);
        uint16_t udp_len = load_be16(p + 4);
        size_t data_len = udp_len >= 8 ? std::min<size_t>(udp_len - 8, remain - 8) : remain - 8;
        pkt.payload.assign(p + 8, p + 8 + data_len);
    } else {
        return std::nullopt;
    }
    return pkt;
}

}  // namespace detail

// Streaming reader for classic pcap files (usec/nsec magic, either byte
// order, Ethernet link type). Unknown L2/L3/L4 is skipped and counted;
// truncated trailing records end the stream without error.
class PcapReader {
public:
    explicit PcapReader(const std::string& path) {
        file_.reset(std::fopen(path.c_str(), "rb"));
        if (!file_) throw std::runtime_error("cannot open capture file: " + path);
        uint8_t hdr[24];
        if (std::fread(hdr, 1, 24, file_.get()) != 24)
            throw std::runtime_error("capture file too short for pcap header: " + path);
        uint32_t magic = load_le32(hdr);
        switch (magic) {
            case pcap_magic::kUsec: swapped_ = false; nsec_ = false; break;
            case pcap_magic::kNsec: swapped_ = false; nsec_ = true; break;
            case pcap_magic::kUsecSwapped: swapped_ = true; nsec_ = false; break;
            case pcap_magic::kNsecSwapped: swapped_ = true; nsec_ = true; break;
            default: throw std::runtime_error("unrecognized capture magic in " + path);
        }
        linktype_ = read32(hdr + 20);
        if (linktype_ != 1)  // LINKTYPE_ETHERNET
            throw std::runtime_error("unsupported link type " + std::to_string(linktype_) + " in " + path);
    }

    // Next decoded TCP/UDP packet, or nullopt at end of file.
    std::optional<RawPacket> next() {
        uint8_t rec[16];
        for (;;) {
            if (std::fread(rec, 1, 16, file_.get()) != 16) return std::nullopt;
            Timestamp ts;
            ts.sec = read32(rec);
            uint32_t frac = read32(rec + 4);
            ts.nsec = nsec_ ? frac : frac * 1000u;
            uint32_t incl = read32(rec + 8);
            if (incl > kMaxSnap) {  // insane length: treat rest of file as garbage
                stats_.truncated++;
                return std::nullopt;
            }
            buf_.resize(incl);
            if (incl > 0 && std::fread(buf_.data(), 1, incl, file_.get()) != incl) {
                stats_.truncated++;
                return std::nullopt;
            }
            auto pkt = detail::decode_frame(buf_.data(), buf_.size(), ts);
            if (!pkt) {
                stats_.skipped++;
                continue;
            }
            stats_.packets++;
            return pkt;
        }
    }

    bool nanosecond_resolution() const { return nsec_; }
    const CaptureStats& stats() const { return stats_; }

private:
    static constexpr uint32_t kMaxSnap = 0x40000000;

    uint32_t read32(const uint8_t* p) const { return swapped_ ? load_be32(p) : load_le32(p); }

    struct FileCloser {
        void operator()(std::FILE* f) const { if (f) std::fclose(f); }
    };
    std::unique_ptr<std::FILE, FileCloser> file_;
    bool swapped_ = false;
    bool nsec_ = false;
    uint32_t linktype_ = 1;
    Bytes buf_;
    CaptureStats stats_;
};

// Writes classic pcap (Ethernet). Used by the trace generator and tests.
class PcapWriter {
public:
    PcapWriter(const std::string& path, bool nanosecond = false) : nsec_(nanosecond) {
        file_.reset(std::fopen(path.c_str(), "wb"));
        if (!file_) throw std::runtime_error("cannot create capture file: " + path);
        uint8_t hdr[24] = {};
        store_le32(hdr, nsec_ ? pcap_magic::kNsec : pcap_magic::kUsec);
        hdr[4] = 2;  // version 2.4
        hdr[6] = 4;
        store_le32(hdr + 16, 65535);  // snaplen
        store_le32(hdr + 20, 1);      // Ethernet
        write_all(hdr, 24);
    }

    void write_tcp(Timestamp ts, const Endpoint& src, const Endpoint& dst, uint32_t seq,
                   uint32_t ack, uint8_t flags, std::span<const uint8_t> payload) {
        Bytes l4(20 + payload.size());
        store_be16(&l4[0], src.port);
        store_be16(&l4[2], dst.port);
        store_be32(&l4[4], seq);
        store_be32(&l4[8], ack);
        l4[12] = 5 << 4;
        l4[13] = flags;
        store_be16(&l4[14], 65535);
        std::copy(payload.begin(), payload.end(), l4.begin() + 20);
        write_ip_frame(ts, src.addr, dst.addr, detail::kProtoTcp, l4);
    }

    void write_udp(Timestamp ts, const Endpoint& src, const Endpoint& dst,
                   std::span<const uint8_t> payload) {
        Bytes l4(8 + payload.size());
        store_be16(&l4[0], src.port);
        store_be16(&l4[2], dst.port);
        store_be16(&l4[4], static_cast<uint16_t>(8 + payload.size()));
        std::copy(payload.begin(), payload.end(), l4.begin() + 8);
        write_ip_frame(ts, src.addr, dst.addr, detail::kProtoUdp, l4);
    }

    // Raw Ethernet frame record; lets tests craft edge-case captures.
    void write_frame(Timestamp ts, std::span<const uint8_t> frame) {
        uint8_t rec[16];
        store_le32(rec, static_cast<uint32_t>(ts.sec));
        store_le32(rec + 4, nsec_ ? ts.nsec : ts.nsec / 1000u);
        store_le32(rec + 8, static_cast<uint32_t>(frame.size()));
        store_le32(rec + 12, static_cast<uint32_t>(frame.size()));
        write_all(rec, 16);
        write_all(frame.data(), frame.size());
    }

    void write_ethertype_frame(Timestamp ts, uint16_t ethertype, std::span<const uint8_t> body) {
        Bytes frame(14 + body.size());
        for (int i = 0; i < 6; i++) frame[static_cast<size_t>(i)] = 0x02;
        for (int i = 6; i < 12; i++) frame[static_cast<size_t>(i)] = 0x04;
        store_be16(&frame[12], ethertype);
        std::copy(body.begin(), body.end(), frame.begin() + 14);
        write_frame(ts, frame);
    }

    void flush() { std::fflush(file_.get()); }

private:
    static void store_le32(uint8_t* p, uint32_t v) {
        p[0] = static_cast<uint8_t>(v);
        p[1] = static_cast<uint8_t>(v >> 8);
        p[2] = static_cast<uint8_t>(v >> 16);
        p[3] = static_cast<uint8_t>(v >> 24);
    }

    void write_ip_frame(Timestamp ts, const IpAddr& src, const IpAddr& dst, uint8_t proto,
                        std::span<const uint8_t> l4) {
        Bytes body;
        if (!src.v6) {
            body.resize(20 + l4.size());
            body[0] = 0x45;
            store_be16(&body[2], static_cast<uint16_t>(body.size()));
            body[8] = 64;
            body[9] = proto;
            std::memcpy(&body[12], src.bytes.data(), 4);
            std::memcpy(&body[16], dst.bytes.data(), 4);
            uint32_t sum = 0;
            for (size_t i = 0; i < 20; i += 2) sum += load_be16(&body[i]);
            while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
            store_be16(&body[10], static_cast<uint16_t>(~sum));
            std::copy(l4.begin(), l4.end(), body.begin() + 20);
            write_ethertype_frame(ts, detail::kEtherIPv4, body);
        } else {
            body.resize(40 + l4.size());
            body[0] = 0x60;
            store_be16(&body[4], static_cast<uint16_t>(l4.size()));
            body[6] = proto;
            body[7] = 64;
            std::memcpy(&body[8], src.bytes.data(), 16);
            std::memcpy(&body[24], dst.bytes.data(), 16);
            std::copy(l4.begin(), l4.end(), body.begin() + 40);
            write_ethertype_frame(ts, detail::kEtherIPv6, body);
        }
    }

    void write_all(const uint8_t* p, size_t n) {
        if (std::fwrite(p, 1, n, file_.get()) != n)
            throw std::runtime_error("short write to capture file");
    }

    struct FileCloser {
        void operator()(std::FILE* f) const { if (f) std::fclose(f); }
    };
    std::unique_ptr<std::FILE, FileCloser> file_;
    bool nsec_;
};

}  // namespace ovpnfp

#endif  // OVPNFP_PCAP_HPP
