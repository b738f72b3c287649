#ifndef OVPNFP_FLOW_HPP
#define OVPNFP_FLOW_HPP

#include <cstdint>
#include <functional>
#include <list>
#include <optional>
#include <unordered_map>

#include "ovpnfp/bytes.hpp"
#include "ovpnfp/net.hpp"
#include "ovpnfp/pcap.hpp"

namespace ovpnfp {

enum class Direction : uint8_t { ClientToServer, ServerToClient };

// Oriented flow identity. The endpoint that sent the first payload-bearing
// packet is the client; both directions map to the same flow.
struct FlowKey {
    Endpoint client;
    Endpoint server;
    Transport transport = Transport::Tcp;

    bool operator==(const FlowKey&) const = default;
};

// One OpenVPN-layer packet: length, first byte, direction. For TCP the length
// excludes the 2-byte framing prefix; for UDP it is the datagram length.
struct FramedPacket {
    Direction direction = Direction::ClientToServer;
    uint32_t payload_len = 0;
    uint8_t opcode_byte = 0;
    Timestamp ts;
};

enum class FlowStatus : uint8_t { Observing, Flagged, Cleared };

namespace detail {

// Canonical (direction-free) key for table lookup.
struct PairKey {
    Endpoint a;  // lexicographically smaller endpoint first
    Endpoint b;
    Transport transport;

    bool operator==(const PairKey&) const = default;
};

inline PairKey canonical_pair(const Endpoint& x, const Endpoint& y, Transport t) {
    if (y < x) return {y, x, t};
    return {x, y, t};
}

struct PairKeyHash {
    size_t operator()(const PairKey& k) const {
        uint64_t h = fnv1a64(k.a.addr.raw());
        uint8_t mix[5] = {static_cast<uint8_t>(k.a.port >> 8), static_cast<uint8_t>(k.a.port),
                          static_cast<uint8_t>(k.b.port >> 8), static_cast<uint8_t>(k.b.port),
                          static_cast<uint8_t>(k.transport)};
        h = fnv1a64(k.b.addr.raw(), h);
        h = fnv1a64({mix, 5}, h);
        return static_cast<size_t>(h);
    }
};

}  // namespace detail

// Flow-level sampling: hash of the unordered IP pair (ports excluded) against
// the sample rate, so both directions of any flow agree.
inline bool sample_flows(const IpAddr& a, const IpAddr& b, double rate, uint64_t seed) {
    if (rate >= 1.0) return true;
    if (rate <= 0.0) return false;
    const IpAddr& lo = (b < a) ? b : a;
    const IpAddr& hi = (b < a) ? a : b;
    uint8_t seed_bytes[8];
    for (int i = 0; i < 8; i++) seed_bytes[i] = static_cast<uint8_t>(seed >> (8 * i));
    uint64_t h = fnv1a64({seed_bytes, 8});
    h = fnv1a64(lo.raw(), h);
    h = fnv1a64(hi.raw(), h);
    double u = static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
    return u < rate;
}

inline bool sample_flows(const FlowKey& key, double rate, uint64_t seed) {
    return sample_flows(key.client.addr, key.server.addr, rate, seed);
}

// Seeded packet-loss stage. Every packet consumes exactly one RNG draw, so
// with a fixed seed the survivor sets are nested across loss rates (a packet
// dropped at p is also dropped at any p' > p).
class LossFilter {
public:
    LossFilter(double p, uint64_t seed) : p_(p), rng_(seed) {}

    bool keep() {
        double u = rng_.next_unit();
        if (p_ <= 0.0) return true;
        if (p_ >= 1.0) return false;
        return u >= p_;
    }

private:
    double p_;
    Rng rng_;
};

struct FlowTableConfig {
    size_t capacity = 1 << 20;  // flows held before eviction
};

// Bounded table of live flows keyed by the unordered 5-tuple. Payload-bearing
// packets create flows; pure TCP ACKs never do. When full, the least recently
// touched Observing flow is evicted (counted).
template <typename FlowT>
class FlowTable {
public:
    explicit FlowTable(FlowTableConfig cfg = {}) : cfg_(cfg) {}

    // Returns the flow for this packet (creating it if warranted) plus the
    // packet's direction within the flow. Returns nullptr for packets that
    // neither match an existing flow nor may create one.
    FlowT* assign(const RawPacket& pkt, Direction& dir_out) {
        auto pair = detail::canonical_pair(pkt.src, pkt.dst, pkt.transport);
        auto it = map_.find(pair);
        if (it != map_.end()) {
            Entry& e = *it->second;
            touch(it->second);
            dir_out = (pkt.src == e.flow.key().client) ? Direction::ClientToServer
                                                       : Direction::ServerToClient;
            return &e.flow;
        }
        if (pkt.payload.empty()) return nullptr;  // pure ACK / SYN: no flow
        if (map_.size() >= cfg_.capacity) evict_oldest();
        FlowKey key{pkt.src, pkt.dst, pkt.transport};
        lru_.push_front(Entry{FlowT(key), pair});
        map_[pair] = lru_.begin();
        created_++;
        dir_out = Direction::ClientToServer;
        return &lru_.front().flow;
    }

    template <typename Fn>
    void for_each(Fn&& fn) {
        for (auto& e : lru_) fn(e.flow);
    }

    size_t size() const { return map_.size(); }
    uint64_t created() const { return created_; }
    uint64_t evictions() const { return evictions_; }

private:
    struct Entry {
        FlowT flow;
        detail::PairKey pair;
    };
    using List = std::list<Entry>;

    void touch(typename List::iterator it) {
        lru_.splice(lru_.begin(), lru_, it);
    }

    void evict_oldest() {
        // Prefer the least recently touched flow that is still Observing;
        // fall back to the absolute oldest.
        for (auto it = lru_.rbegin(); it != lru_.rend(); ++it) {
            if (it->flow.status() == FlowStatus::Observing) {
                auto fwd = std::next(it).base();
                map_.erase(fwd->pair);
                lru_.erase(fwd);
                evictions_++;
                return;
            }
        }
        map_.erase(lru_.back().pair);
        lru_.pop_back();
        evictions_++;
    }

    FlowTableConfig cfg_;
    List lru_;
    std::unordered_map<detail::PairKey, typename List::iterator, detail::PairKeyHash> map_;
    uint64_t created_ = 0;
    uint64_t evictions_ = 0;
};

}  // namespace ovpnfp

#endif  // OVPNFP_FLOW_HPP
