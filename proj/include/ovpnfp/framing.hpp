#ifndef OVPNFP_FRAMING_HPP
#define OVPNFP_FRAMING_HPP

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "ovpnfp/flow.hpp"

namespace ovpnfp {

struct FramingConfig {
    // Lengths outside [1, frame_sanity_max] abandon prefix framing for the
    // direction and switch it to per-segment framing.
    uint32_t frame_sanity_max = 16384;
    // Out-of-order bytes buffered per direction before the flow is dropped
    // from observation.
    size_t reorder_cap = 64 * 1024;
};

// One UDP datagram is one OpenVPN packet; byte 0 is the opcode position.
inline std::optional<FramedPacket> frame_udp(Direction dir, std::span<const uint8_t> payload,
                                             Timestamp ts) {
    if (payload.empty()) return std::nullopt;
    FramedPacket f;
    f.direction = dir;
    f.payload_len = static_cast<uint32_t>(payload.size());
    f.opcode_byte = payload[0];
    f.ts = ts;
    return f;
}

// Per-direction TCP stream state: in-order delivery with a bounded reorder
// buffer, then OpenVPN TCP framing ([2-byte big-endian length][payload]).
// When the prefix is implausible the direction falls back to per-segment
// framing with the opcode taken at segment offset 2.
class TcpFramer {
public:
    explicit TcpFramer(FramingConfig cfg = {}) : cfg_(cfg) {}

    // Feed one segment; appends completed frames to `out`. Returns false when
    // the flow must be dropped from observation (reorder buffer overflow).
    bool push(Direction dir, uint32_t seq, std::span<const uint8_t> payload, Timestamp ts,
              std::vector<FramedPacket>& out) {
        if (payload.empty()) return true;
        Dir& d = state_[dir == Direction::ClientToServer ? 0 : 1];
        if (!d.have_isn) {
            d.have_isn = true;
            d.next_seq = seq;
        }
        int32_t delta = static_cast<int32_t>(seq - d.next_seq);
        if (delta > 0) {
            // Gap: park the segment until the hole fills.
            d.pending_bytes += payload.size();
            if (d.pending_bytes > cfg_.reorder_cap) return false;
            d.ooo.emplace(seq, Bytes(payload.begin(), payload.end()));
            return true;
        }
        if (delta < 0) {
            // Overlap or retransmission: deliver only the unseen suffix.
            size_t skip = static_cast<size_t>(-delta);
            if (skip >= payload.size()) return true;
            payload = payload.subspan(skip);
            seq = d.next_seq;
        }
        deliver(dir, d, payload, ts, out);
        // Drain any parked segments now contiguous.
        while (!d.ooo.empty()) {
            auto it = d.ooo.begin();
            int32_t gap = static_cast<int32_t>(it->first - d.next_seq);
            if (gap > 0) break;
            Bytes seg = std::move(it->second);
            d.pending_bytes -= seg.size();
            d.ooo.erase(it);
            size_t skip = static_cast<size_t>(-gap);
            if (skip < seg.size())
                deliver(dir, d, std::span<const uint8_t>(seg).subspan(skip), ts, out);
        }
        return true;
    }

    bool in_fallback(Direction dir) const {
        return state_[dir == Direction::ClientToServer ? 0 : 1].fallback;
    }

private:
    struct Dir {
        bool have_isn = false;
        uint32_t next_seq = 0;
        bool fallback = false;
        Bytes buf;  // reassembled bytes not yet framed
        std::map<uint32_t, Bytes> ooo;
        size_t pending_bytes = 0;
    };

    void deliver(Direction dir, Dir& d, std::span<const uint8_t> data, Timestamp ts,
                 std::vector<FramedPacket>& out) {
        d.next_seq += static_cast<uint32_t>(data.size());
        if (d.fallback) {
            emit_segment(dir, data, ts, out);
            return;
        }
        d.buf.insert(d.buf.end(), data.begin(), data.end());
        size_t pos = 0;
        while (d.buf.size() - pos >= 2) {
            uint32_t len = load_be16(&d.buf[pos]);
            if (len == 0 || len > cfg_.frame_sanity_max) {
                // Implausible prefix: abandon stream framing for this
                // direction and treat the unconsumed bytes as one segment.
                d.fallback = true;
                emit_segment(dir, std::span<const uint8_t>(d.buf).subspan(pos), ts, out);
                d.buf.clear();
                return;
            }
            if (d.buf.size() - pos - 2 < len) break;
            FramedPacket f;
            f.direction = dir;
            f.payload_len = len;
            f.opcode_byte = d.buf[pos + 2];
            f.ts = ts;
            out.push_back(f);
            pos += 2 + len;
        }
        d.buf.erase(d.buf.begin(), d.buf.begin() + static_cast<ptrdiff_t>(pos));
    }

    static void emit_segment(Direction dir, std::span<const uint8_t> seg, Timestamp ts,
                             std::vector<FramedPacket>& out) {
        FramedPacket f;
        f.direction = dir;
        f.payload_len = static_cast<uint32_t>(seg.size());
        f.opcode_byte = seg.size() > 2 ? seg[2] : seg[0];
        f.ts = ts;
        out.push_back(f);
    }

    FramingConfig cfg_;
    Dir state_[2];
};

}  // namespace ovpnfp

#endif  // OVPNFP_FRAMING_HPP
