#ifndef OVPNFP_ACK_HPP
#define OVPNFP_ACK_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ovpnfp/flow.hpp"

namespace ovpnfp {

// Per-bin thresholds on the count of ACK-size packets (10-packet bins).
struct AckThresholds {
    uint32_t bin1_min = 1;
    uint32_t bin1_max = 3;
    uint32_t bin2_min = 2;
    uint32_t bin2_max = 5;
    uint32_t bins3to5_max = 5;
    uint32_t bins6plus_max = 1;
};

struct AckConfig {
    uint32_t window = 100;        // packets counted after the detected offset (N)
    uint32_t search_bound = 16;   // frames scanned for the reset exchange (K)
    uint32_t min_bins = 6;        // full bins required before evaluating
    AckThresholds thresholds;
};

// Pure threshold check over a bin vector (bins[0] is Bin[1]).
inline bool ack_evaluate_bins(std::span<const uint32_t> bins, const AckThresholds& th) {
    if (bins.empty()) return false;
    if (bins[0] < th.bin1_min || bins[0] > th.bin1_max) return false;
    if (bins.size() < 2 || bins[1] < th.bin2_min || bins[1] > th.bin2_max) return false;
    for (size_t i = 2; i < bins.size() && i < 5; i++)
        if (bins[i] > th.bins3to5_max) return false;
    for (size_t i = 5; i < bins.size(); i++)
        if (bins[i] > th.bins6plus_max) return false;
    return true;
}

// Protocol-ACK size fingerprint.
//
// The session's ACK size is located by scanning the first K frames for the
// reset exchange [C->S, S->C, C->S, C->S] where the third frame is smaller
// than the fourth (the ACK carries no TLS payload, the following Control
// does). The match offset absorbs tunnel handshake frames. From that offset
// on, packets are grouped into 10-packet bins and each bin counts frames
// whose size equals the ACK size exactly.
class AckFingerprint {
public:
    AckFingerprint() : AckFingerprint(AckConfig{}) {}

    explicit AckFingerprint(const AckConfig& cfg) : cfg_(cfg) {}

    void feed(const FramedPacket& f) {
        frames_seen_++;
        if (!candidate_) {
            if (early_.size() < cfg_.search_bound) {
                early_.push_back({f.direction, f.payload_len});
                try_detect();
            }
            return;
        }
        count(f.payload_len);
    }

    bool evaluate() const {
        if (!candidate_) return false;
        uint32_t full_bins = counted_ / 10;
        if (full_bins < cfg_.min_bins) return false;
        return ack_evaluate_bins({bins_.data(), full_bins}, cfg_.thresholds);
    }

    std::optional<uint32_t> ack_size() const {
        if (!candidate_) return std::nullopt;
        return candidate_->ack_size;
    }
    std::optional<uint32_t> offset() const {
        if (!candidate_) return std::nullopt;
        return candidate_->offset;
    }
    uint32_t counted() const { return counted_; }
    std::span<const uint32_t> bins() const { return {bins_.data(), counted_ / 10}; }

private:
    struct Early {
        Direction dir;
        uint32_t len;
    };
    struct Candidate {
        uint32_t ack_size;
        uint32_t offset;
    };

    // Windows complete in order of their last frame, so checking only the
    // newest window per arrival still yields the smallest matching offset.
    void try_detect() {
        if (early_.size() < 4) return;
        size_t o = early_.size() - 4;
        const Early& a = early_[o];
        const Early& b = early_[o + 1];
        const Early& c = early_[o + 2];
        const Early& d = early_[o + 3];
        if (a.dir == Direction::ClientToServer && b.dir == Direction::ServerToClient &&
            c.dir == Direction::ClientToServer && d.dir == Direction::ClientToServer &&
            c.len < d.len) {
            candidate_ = Candidate{c.len, static_cast<uint32_t>(o)};
            bins_.assign((cfg_.window + 9) / 10, 0);
            for (size_t i = o; i < early_.size(); i++) count(early_[i].len);
        }
    }

    void count(uint32_t len) {
        if (counted_ >= cfg_.window) return;
        if (len == candidate_->ack_size) bins_[counted_ / 10]++;
        counted_++;
    }

    AckConfig cfg_;
    std::vector<Early> early_;
    std::optional<Candidate> candidate_;
    std::vector<uint32_t> bins_;
    uint32_t counted_ = 0;
    uint32_t frames_seen_ = 0;
};

}  // namespace ovpnfp

#endif  // OVPNFP_ACK_HPP
