#ifndef OVPNFP_FILTER_HPP
#define OVPNFP_FILTER_HPP

#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ovpnfp/ack.hpp"
#include "ovpnfp/flow.hpp"
#include "ovpnfp/framing.hpp"
#include "ovpnfp/opcode.hpp"

namespace ovpnfp {

enum class MatchedBy : uint8_t { Opcode, Ack, Both };

inline const char* matched_by_name(MatchedBy m) {
    switch (m) {
        case MatchedBy::Opcode: return "Opcode";
        case MatchedBy::Ack: return "Ack";
        default: return "Both";
    }
}

// What gets logged for a flagged flow. Client identity and payload bytes are
// deliberately absent; the timestamp is coarsened to 5-minute buckets.
struct SuspectRecord {
    uint64_t time_bucket = 0;
    IpAddr server_addr;
    uint16_t server_port = 0;
    Transport transport = Transport::Tcp;
    MatchedBy matched_by = MatchedBy::Opcode;
    uint32_t frames_at_decision = 0;
};

constexpr uint64_t kSuspectBucketSeconds = 300;

inline uint64_t bucket_time(uint64_t epoch_sec) {
    return epoch_sec - (epoch_sec % kSuspectBucketSeconds);
}

inline nlohmann::ordered_json suspect_to_json(const SuspectRecord& r) {
    return nlohmann::ordered_json{
        {"time_bucket", r.time_bucket},
        {"server_addr", r.server_addr.str()},
        {"server_port", r.server_port},
        {"transport", transport_name(r.transport)},
        {"matched_by", matched_by_name(r.matched_by)},
        {"frames_at_decision", r.frames_at_decision},
    };
}

// Append-only newline-delimited JSON sink. Lines are written whole.
class SuspectLogWriter {
public:
    explicit SuspectLogWriter(const std::string& path) : out_(path, std::ios::app) {
        if (!out_) throw std::runtime_error("cannot open suspect log: " + path);
    }

    void write(const SuspectRecord& r) {
        std::string line = suspect_to_json(r).dump();
        line.push_back('\n');
        out_.write(line.data(), static_cast<std::streamsize>(line.size()));
        out_.flush();
        if (!out_) throw std::runtime_error("suspect log write failed");
    }

private:
    std::ofstream out_;
};

struct FilterConfig {
    uint32_t window = 100;  // observation window N
    double sample_rate = 1.0;
    double loss = 0.0;
    uint64_t seed = 0;
    OpcodeConfig opcode;
    AckConfig ack;
    FramingConfig framing;
    FlowTableConfig table;

    void validate() const {
        if (window < 4 || window > 100000) throw std::invalid_argument("window out of range");
        if (sample_rate <= 0.0 || sample_rate > 1.0) throw std::invalid_argument("sample rate out of range");
        if (loss < 0.0 || loss > 1.0) throw std::invalid_argument("loss out of range");
    }

    // The observation window is shared by both fingerprints.
    FilterConfig resolved() const {
        FilterConfig c = *this;
        c.opcode.window = c.window;
        c.ack.window = c.window;
        return c;
    }
};

struct FilterSummary {
    uint64_t packets = 0;
    uint64_t flows_seen = 0;
    uint64_t flows_at_window = 0;
    uint64_t flagged = 0;
    uint64_t abandoned = 0;  // reassembly overflow: dropped from observation
    uint64_t evicted = 0;
};

// Per-flow observation state driving both fingerprints.
class ObservedFlow {
public:
    explicit ObservedFlow(FlowKey key) : key_(key) {}

    void configure(const FilterConfig& cfg) {
        cfg_window_ = cfg.window;
        opcode_ = OpcodeFingerprint(cfg.opcode);
        ack_ = AckFingerprint(cfg.ack);
        framer_ = TcpFramer(cfg.framing);
        configured_ = true;
    }

    const FlowKey& key() const { return key_; }
    FlowStatus status() const { return status_; }
    uint32_t framed_count() const { return framed_count_; }
    const std::vector<FramedPacket>& frames() const { return frames_; }
    bool configured() const { return configured_; }

    // Feed one transport packet. Returns a record when the flow flags.
    std::optional<SuspectRecord> process_packet(const RawPacket& pkt, Direction dir) {
        if (status_ != FlowStatus::Observing) return std::nullopt;
        scratch_.clear();
        if (key_.transport == Transport::Tcp) {
            if (!framer_.push(dir, pkt.seq, pkt.payload, pkt.ts, scratch_)) {
                abandon();
                return std::nullopt;
            }
        } else {
            if (auto f = frame_udp(dir, pkt.payload, pkt.ts)) scratch_.push_back(*f);
        }
        for (const FramedPacket& f : scratch_) {
            if (auto rec = process_frame(f)) return rec;
        }
        return std::nullopt;
    }

    std::optional<SuspectRecord> process_frame(const FramedPacket& f) {
        if (status_ != FlowStatus::Observing) return std::nullopt;
        framed_count_++;
        if (frames_.size() < cfg_window_) frames_.push_back(f);
        last_ts_ = f.ts;
        opcode_.feed(f.opcode_byte);
        ack_.feed(f);
        if (framed_count_ >= cfg_window_) return decide();
        return std::nullopt;
    }

    // Evaluate at flow end (capture drained) if the window was never reached.
    std::optional<SuspectRecord> finish() {
        if (status_ != FlowStatus::Observing) return std::nullopt;
        return decide();
    }

    bool abandoned() const { return abandoned_; }

private:
    void abandon() {
        status_ = FlowStatus::Cleared;
        abandoned_ = true;
        release();
    }

    std::optional<SuspectRecord> decide() {
        bool op = opcode_.finalize();
        bool ak = ack_.evaluate();
        if (!op && !ak) {
            status_ = FlowStatus::Cleared;
            release();
            return std::nullopt;
        }
        status_ = FlowStatus::Flagged;
        SuspectRecord rec;
        rec.time_bucket = bucket_time(last_ts_.sec);
        rec.server_addr = key_.server.addr;
        rec.server_port = key_.server.port;
        rec.transport = key_.transport;
        rec.matched_by = op && ak ? MatchedBy::Both : (op ? MatchedBy::Opcode : MatchedBy::Ack);
        rec.frames_at_decision = framed_count_;
        release();
        return rec;
    }

    void release() {
        frames_.clear();
        frames_.shrink_to_fit();
        framer_ = TcpFramer();
    }

    FlowKey key_;
    FlowStatus status_ = FlowStatus::Observing;
    bool abandoned_ = false;
    bool configured_ = false;
    uint32_t cfg_window_ = 100;
    uint32_t framed_count_ = 0;
    std::vector<FramedPacket> frames_;
    Timestamp last_ts_;
    TcpFramer framer_;
    OpcodeFingerprint opcode_;
    AckFingerprint ack_;
    std::vector<FramedPacket> scratch_;
};

// The passive stage: loss + flow sampling in front of per-flow observation,
// flagging a flow when either fingerprint matches within the window.
class FilterPipeline {
public:
    explicit FilterPipeline(FilterConfig cfg)
        : cfg_(cfg.resolved()), table_(cfg.table), loss_(cfg_.loss, cfg_.seed) {
        cfg_.validate();
    }

    // Returns a suspect record if this packet completes a flagging decision.
    std::optional<SuspectRecord> process_packet(const RawPacket& pkt) {
        summary_.packets++;
        if (!loss_.keep()) return std::nullopt;
        if (!sample_flows(pkt.src.addr, pkt.dst.addr, cfg_.sample_rate, cfg_.seed))
            return std::nullopt;
        Direction dir;
        ObservedFlow* flow = table_.assign(pkt, dir);
        if (!flow) return std::nullopt;
        if (!flow->configured()) {
            flow->configure(cfg_);
            summary_.flows_seen++;
        }
        uint32_t before = flow->framed_count();
        auto rec = flow->process_packet(pkt, dir);
        if (before < cfg_.window && flow->framed_count() >= cfg_.window)
            summary_.flows_at_window++;
        if (flow->abandoned()) summary_.abandoned++;
        if (rec) {
            summary_.flagged++;
            records_.push_back(*rec);
        }
        return rec;
    }

    // Flush flows still observing at end of capture.
    std::vector<SuspectRecord> finish() {
        std::vector<SuspectRecord> out;
        table_.for_each([&](ObservedFlow& flow) {
            if (auto rec = flow.finish()) {
                summary_.flagged++;
                records_.push_back(*rec);
                out.push_back(*rec);
            }
        });
        summary_.evicted = table_.evictions();
        return out;
    }

    const FilterSummary& summary() const { return summary_; }
    const std::vector<SuspectRecord>& records() const { return records_; }
    FlowTable<ObservedFlow>& table() { return table_; }
    const FilterConfig& config() const { return cfg_; }

private:
    FilterConfig cfg_;
    FlowTable<ObservedFlow> table_;
    LossFilter loss_;
    FilterSummary summary_;
    std::vector<SuspectRecord> records_;
};

}  // namespace ovpnfp

#endif  // OVPNFP_FILTER_HPP
