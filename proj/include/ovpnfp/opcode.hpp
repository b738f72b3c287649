#ifndef OVPNFP_OPCODE_HPP
#define OVPNFP_OPCODE_HPP

#include <bitset>
#include <cstdint>
#include <optional>
#include <stdexcept>

namespace ovpnfp {

struct OpcodeConfig {
    uint32_t window = 100;     // packets inspected per flow (N)
    uint32_t min_distinct = 4;
    uint32_t max_distinct = 10;
};

// Opcode-variation fingerprint over the first N packets of a flow.
//
// The raw first byte of each OpenVPN-layer packet is tracked (not the high
// five bits): masking the key-id would break invariance under XOR-style
// scramblers, which map equal first bytes to equal obfuscated bytes.
//
// The set starts out holding both reset bytes. A flow matches when, at exactly
// N packets, between min_distinct and max_distinct values were seen and
// neither reset byte reappeared after the set was already min_distinct large
// (resets recurring mid-handshake, e.g. retransmissions, are tolerated).
class OpcodeFingerprint {
public:
    OpcodeFingerprint() : OpcodeFingerprint(OpcodeConfig{}) {}

    explicit OpcodeFingerprint(const OpcodeConfig& cfg) : cfg_(cfg) {
        if (cfg_.window < 4) throw std::invalid_argument("opcode window must be at least 4");
    }

    // Feed the opcode byte of the next packet. The first two calls fix the
    // client-reset and server-reset bytes.
    void feed(uint8_t op) {
        if (decided_) return;
        if (index_ == 0) {
            cr_ = op;
            insert(op);
            index_ = 1;
            return;
        }
        if (index_ == 1) {
            sr_ = op;
            insert(op);
            index_ = 2;
            if (cfg_.window == index_) conclude();
            return;
        }
        step(op);
    }

    // One evaluation step for packet index >= 2 (Opcode[i]).
    void step(uint8_t op) {
        if (decided_) throw std::logic_error("opcode fingerprint already decided");
        if (index_ >= cfg_.window) throw std::logic_error("opcode window exhausted");
        if ((op == cr_ || op == sr_) && distinct_ >= cfg_.min_distinct) {
            decided_ = false_decision();
            return;
        }
        insert(op);
        index_++;
        if (index_ == cfg_.window) conclude();
    }

    // Final verdict. A flow that ended before N packets never matches.
    bool finalize() const { return decided_.value_or(false); }

    bool decided() const { return decided_.has_value(); }
    uint32_t distinct() const { return distinct_; }
    uint32_t index() const { return index_; }
    uint8_t client_reset() const { return cr_; }
    uint8_t server_reset() const { return sr_; }

private:
    std::optional<bool> false_decision() { return std::optional<bool>(false); }

    void insert(uint8_t op) {
        if (!seen_.test(op)) {
            seen_.set(op);
            distinct_++;
        }
    }

    void conclude() {
        decided_ = distinct_ >= cfg_.min_distinct && distinct_ <= cfg_.max_distinct;
    }

    OpcodeConfig cfg_;
    uint8_t cr_ = 0;
    uint8_t sr_ = 0;
    std::bitset<256> seen_;
    uint32_t distinct_ = 0;
    uint32_t index_ = 0;
    std::optional<bool> decided_;
};

// Convenience entry points mirroring the step-wise interface.

inline OpcodeFingerprint opcode_init(uint8_t first, uint8_t second, uint32_t window) {
    OpcodeConfig cfg;
    cfg.window = window;
    OpcodeFingerprint fp(cfg);
    fp.feed(first);
    fp.feed(second);
    return fp;
}

inline void opcode_step(OpcodeFingerprint& fp, uint8_t op) { fp.step(op); }

inline bool opcode_finalize(const OpcodeFingerprint& fp) { return fp.finalize(); }

}  // namespace ovpnfp

#endif  // OVPNFP_OPCODE_HPP
