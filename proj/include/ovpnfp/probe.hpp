#ifndef OVPNFP_PROBE_HPP
#define OVPNFP_PROBE_HPP

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ovpnfp/emulator.hpp"
#include "ovpnfp/net.hpp"
#include "ovpnfp/trace.hpp"

namespace ovpnfp {

enum class ProbeName : uint8_t {
    BaseProbe1,
    BaseProbe2,
    TcpGeneric,
    OneZero,
    TwoZero,
    Epmd,
    Ssh,
    HttpGet,
    Tls,
    TwoKRandom,
};

inline const char* probe_name_str(ProbeName p) {
    switch (p) {
        case ProbeName::BaseProbe1: return "BaseProbe1";
        case ProbeName::BaseProbe2: return "BaseProbe2";
        case ProbeName::TcpGeneric: return "TcpGeneric";
        case ProbeName::OneZero: return "OneZero";
        case ProbeName::TwoZero: return "TwoZero";
        case ProbeName::Epmd: return "Epmd";
        case ProbeName::Ssh: return "Ssh";
        case ProbeName::HttpGet: return "HttpGet";
        case ProbeName::Tls: return "Tls";
        default: return "TwoKRandom";
    }
}

enum class BehaviorClass : uint8_t {
    ExplicitResponse,
    ShortClose,
    LongClose,
    RstClose,
    Timeout,        // still open at the probe deadline; long for verdicts
    Indeterminate,  // closed between t_short and t_long_min
};

inline const char* behavior_name(BehaviorClass c) {
    switch (c) {
        case BehaviorClass::ExplicitResponse: return "ExplicitResponse";
        case BehaviorClass::ShortClose: return "ShortClose";
        case BehaviorClass::LongClose: return "LongClose";
        case BehaviorClass::RstClose: return "RstClose";
        case BehaviorClass::Timeout: return "Timeout";
        default: return "Indeterminate";
    }
}

struct ProbeSpec {
    ProbeName name;
    Bytes payload;
};

// Probe payloads. The two base probes differ only in the trailing byte: the
// first is a complete 16-byte client reset, the second leaves the declared
// packet one byte short so an OpenVPN server parks it in reassembly.
inline std::vector<ProbeSpec> build_probe_catalog(uint64_t seed) {
    Rng rng(seed);
    std::vector<ProbeSpec> out;

    Bytes base1 = {0x00, 0x0e, 0x38};
    Bytes session = rng.bytes(8);
    append_bytes(base1, session);
    for (int i = 0; i < 5; i++) base1.push_back(0x00);
    out.push_back({ProbeName::BaseProbe1, base1});

    Bytes base2(base1.begin(), base1.end() - 1);
    out.push_back({ProbeName::BaseProbe2, base2});

    out.push_back({ProbeName::TcpGeneric, {0x0d, 0x0a, 0x0d, 0x0a}});
    out.push_back({ProbeName::OneZero, {0x00}});
    out.push_back({ProbeName::TwoZero, {0x00, 0x00}});
    out.push_back({ProbeName::Epmd, {0x00, 0x01, 0x6e}});

    std::string ssh = "SSH-2.0-OpenSSH_8.1\r\n";
    out.push_back({ProbeName::Ssh, Bytes(ssh.begin(), ssh.end())});

    std::string get = "GET / HTTP/1.0\r\n\r\n";
    out.push_back({ProbeName::HttpGet, Bytes(get.begin(), get.end())});

    // A browser-shaped TLS ClientHello; the properties that matter are a
    // well-formed record and the 0x16 0x03 prefix (decimal 5635, over any
    // plausible max_len).
    Bytes hello;
    {
        Bytes body;
        body.push_back(0x03);
        body.push_back(0x03);
        append_bytes(body, rng.bytes(32));   // client random
        body.push_back(32);
        append_bytes(body, rng.bytes(32));   // session id
        const uint16_t ciphers[] = {0x1301, 0x1302, 0x1303, 0xc02b, 0xc02f,
                                    0xc02c, 0xc030, 0xcca9, 0xcca8, 0x009c,
                                    0x009d, 0x002f, 0x0035};
        body.push_back(0x00);
        body.push_back(static_cast<uint8_t>(sizeof(ciphers) / 2 * 2));
        for (uint16_t c : ciphers) {
            body.push_back(static_cast<uint8_t>(c >> 8));
            body.push_back(static_cast<uint8_t>(c));
        }
        body.push_back(0x01);
        body.push_back(0x00);  // null compression
        Bytes ext;
        auto add_ext = [&](uint16_t type, const Bytes& data) {
            ext.push_back(static_cast<uint8_t>(type >> 8));
            ext.push_back(static_cast<uint8_t>(type));
            ext.push_back(static_cast<uint8_t>(data.size() >> 8));
            ext.push_back(static_cast<uint8_t>(data.size()));
            append_bytes(ext, data);
        };
        Bytes sni = {0x00, 0x10, 0x00, 0x0e, 0x00, 0x00, 0x0b};
        std::string host = "example.com";
        append_bytes(sni, {reinterpret_cast<const uint8_t*>(host.data()), host.size()});
        add_ext(0x0000, sni);
        add_ext(0x000a, {0x00, 0x04, 0x00, 0x1d, 0x00, 0x17});          // groups
        add_ext(0x000d, {0x00, 0x06, 0x04, 0x03, 0x08, 0x04, 0x04, 0x01});  // sigalgs
        add_ext(0x002b, {0x03, 0x02, 0x03, 0x04});                      // versions
        add_ext(0x0015, Bytes(120, 0x00));                              // padding
        body.push_back(static_cast<uint8_t>(ext.size() >> 8));
        body.push_back(static_cast<uint8_t>(ext.size()));
        append_bytes(body, ext);

        hello = {0x16, 0x03, 0x01, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00};
        store_be16(&hello[3], static_cast<uint16_t>(body.size() + 4));
        hello[7] = static_cast<uint8_t>(body.size() >> 8);
        hello[8] = static_cast<uint8_t>(body.size());
        append_bytes(hello, body);
    }
    out.push_back({ProbeName::Tls, hello});

    out.push_back({ProbeName::TwoKRandom, rng.bytes(2000)});
    return out;
}

inline Bytes probe_payload(const std::vector<ProbeSpec>& catalog, ProbeName name) {
    for (const auto& p : catalog)
        if (p.name == name) return p.payload;
    throw std::logic_error("probe not in catalog");
}

struct ProbeTimings {
    double connect_timeout = 5.0;
    double t_short = 3.0;
    double t_long_min = 30.0;
    double deadline = 75.0;  // exceeds OpenVPN's 60 s default handshake window
};

struct ProbeObservation {
    ProbeName probe = ProbeName::BaseProbe1;
    BehaviorClass cls = BehaviorClass::Timeout;
    CloseKind close_kind = CloseKind::None;
    double elapsed = 0;
    Bytes response_prefix;  // first bytes, capped
    bool unreachable = false;
    std::string error;
};

namespace detail {

inline int connect_with_timeout(const Endpoint& ep, double timeout_s, std::string& err) {
    int family = ep.addr.v6 ? AF_INET6 : AF_INET;
    int fd = ::socket(family, SOCK_STREAM, 0);
    if (fd < 0) {
        err = "socket failed";
        return -1;
    }
    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    sockaddr_storage ss{};
    socklen_t slen;
    if (!ep.addr.v6) {
        auto* sa = reinterpret_cast<sockaddr_in*>(&ss);
        sa->sin_family = AF_INET;
        sa->sin_port = htons(ep.port);
        std::memcpy(&sa->sin_addr, ep.addr.bytes.data(), 4);
        slen = sizeof(sockaddr_in);
    } else {
        auto* sa = reinterpret_cast<sockaddr_in6*>(&ss);
        sa->sin6_family = AF_INET6;
        sa->sin6_port = htons(ep.port);
        std::memcpy(&sa->sin6_addr, ep.addr.bytes.data(), 16);
        slen = sizeof(sockaddr_in6);
    }
    int r = ::connect(fd, reinterpret_cast<sockaddr*>(&ss), slen);
    if (r != 0 && errno != EINPROGRESS) {
        err = std::strerror(errno);
        ::close(fd);
        return -1;
    }
    if (r != 0) {
        pollfd pf{fd, POLLOUT, 0};
        int pr = ::poll(&pf, 1, static_cast<int>(timeout_s * 1000));
        if (pr <= 0) {
            err = "connect timeout";
            ::close(fd);
            return -1;
        }
        int soerr = 0;
        socklen_t sl = sizeof(soerr);
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &soerr, &sl);
        if (soerr != 0) {
            err = std::strerror(soerr);
            ::close(fd);
            return -1;
        }
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return fd;
}

}  // namespace detail

// One probe: connect, send the payload, and watch how and when the server
// reacts. Close kind is read off the transport (orderly FIN vs ECONNRESET).
inline ProbeObservation run_probe(const Endpoint& ep, const ProbeSpec& spec,
                                  const ProbeTimings& t) {
    ProbeObservation obs;
    obs.probe = spec.name;
    std::string err;
    int fd = detail::connect_with_timeout(ep, t.connect_timeout, err);
    if (fd < 0) {
        obs.unreachable = true;
        obs.error = err;
        return obs;
    }
    // Blocking sends from here on.
    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags & ~O_NONBLOCK);
    if (!ovpnfp::detail::send_all(fd, spec.payload)) {
        obs.unreachable = true;
        obs.error = "send failed";
        ::close(fd);
        return obs;
    }
    double start = ovpnfp::detail::steady_now();
    double deadline = start + t.deadline;
    uint8_t buf[4096];
    for (;;) {
        double remain = deadline - ovpnfp::detail::steady_now();
        if (remain <= 0) {
            obs.cls = BehaviorClass::Timeout;
            obs.close_kind = CloseKind::None;
            obs.elapsed = t.deadline;
            break;
        }
        pollfd pf{fd, POLLIN, 0};
        int pr = ::poll(&pf, 1, static_cast<int>(remain * 1000) + 1);
        if (pr <= 0) continue;
        ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
        double now = ovpnfp::detail::steady_now();
        if (n > 0) {
            obs.cls = BehaviorClass::ExplicitResponse;
            obs.elapsed = now - start;
            obs.response_prefix.assign(buf, buf + std::min<ssize_t>(n, 64));
            obs.close_kind = CloseKind::None;
            break;
        }
        obs.elapsed = now - start;
        if (n == 0) {
            obs.close_kind = CloseKind::Fin;
        } else if (errno == ECONNRESET) {
            obs.close_kind = CloseKind::Rst;
        } else {
            obs.close_kind = CloseKind::Fin;
            obs.error = std::strerror(errno);
        }
        if (obs.close_kind == CloseKind::Rst) {
            obs.cls = BehaviorClass::RstClose;
        } else if (obs.elapsed <= t.t_short) {
            obs.cls = BehaviorClass::ShortClose;
        } else if (obs.elapsed >= t.t_long_min) {
            obs.cls = BehaviorClass::LongClose;
        } else {
            obs.cls = BehaviorClass::Indeterminate;
        }
        break;
    }
    ::close(fd);
    return obs;
}

enum class Verdict : uint8_t { OpenVPN, OpenVPNNoHmac, PortShared, NotOpenVPN, Unreachable };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::OpenVPN: return "OpenVPN";
        case Verdict::OpenVPNNoHmac: return "OpenVPNNoHmac";
        case Verdict::PortShared: return "PortShared";
        case Verdict::NotOpenVPN: return "NotOpenVPN";
        default: return "Unreachable";
    }
}

// Sentinel classes for the RST threshold search.
enum class RstSentinel : uint8_t { AlwaysRst, NeverRst };

struct RstSearchResult {
    std::optional<uint32_t> threshold;  // minimal byte count that triggers RST
    std::optional<RstSentinel> sentinel;
    uint32_t connections = 0;
    bool aborted = false;

    std::string str() const {
        if (threshold) return std::to_string(*threshold);
        if (sentinel == RstSentinel::AlwaysRst) return "<1";
        if (sentinel == RstSentinel::NeverRst) return ">8192";
        return "aborted";
    }
};

struct EndpointVerdict {
    Target target;
    Verdict verdict = Verdict::NotOpenVPN;
    std::vector<ProbeObservation> evidence;
    std::optional<RstSearchResult> rst;
    uint32_t connections = 0;
    std::optional<std::string> corroborated_by;  // subnet expansion hit
};

struct ProberConfig {
    ProbeTimings timings;
    uint64_t seed = 0;
    bool rst_search = false;
    uint32_t rst_budget = 14;
    int expand_prefix = 29;             // /29; 0 disables subnet expansion
    std::vector<uint16_t> extra_ports;  // always unioned with {orig, 1194}
    uint32_t min_matches = 5;           // secondary expectations required
    uint32_t workers = 8;
};

// True when the response parses as a length-prefixed frame whose opcode is a
// plausible server reset.
inline bool parses_as_server_reset(std::span<const uint8_t> resp) {
    if (resp.size() < 3) return false;
    uint32_t len = load_be16(resp.data());
    if (len < 10 || len > 4096) return false;
    // Response capture is capped, so only require consistency with the prefix.
    if (resp.size() - 2 > len) return false;
    uint8_t op = static_cast<uint8_t>(resp[2] >> 3);
    return op == 8;  // hard reset server v2
}

// Effective class once Timeout folds into LongClose.
inline BehaviorClass verdict_class(const ProbeObservation& o) {
    return o.cls == BehaviorClass::Timeout ? BehaviorClass::LongClose : o.cls;
}

inline bool matches_short_fin(const ProbeObservation& o) {
    return verdict_class(o) == BehaviorClass::ShortClose && o.close_kind == CloseKind::Fin;
}

// Binary search for the minimal payload size closed with a RST, modelling the
// server's read-buffer size. Budget: one ceiling probe plus thirteen
// bisection steps over [1, 8192].
inline RstSearchResult rst_threshold_search(const Endpoint& ep, const ProbeTimings& t,
                                            uint64_t seed, uint32_t budget = 14) {
    RstSearchResult res;
    Bytes blob = Rng(seed * 0x6a09e667f3bcc909ull + 7).bytes(8192);
    auto probe = [&](uint32_t size) -> std::optional<CloseKind> {
        ProbeSpec spec{ProbeName::TwoKRandom, Bytes(blob.begin(), blob.begin() + size)};
        ProbeObservation obs = run_probe(ep, spec, t);
        res.connections++;
        if (obs.unreachable) return std::nullopt;
        if (obs.cls == BehaviorClass::Timeout) return CloseKind::None;
        return obs.close_kind;
    };

    auto top = probe(8192);
    if (!top) {
        res.aborted = true;
        return res;
    }
    if (*top != CloseKind::Rst) {
        res.sentinel = RstSentinel::NeverRst;
        return res;
    }
    uint32_t lo = 0, hi = 8192;  // f(0) is FIN by definition
    while (hi - lo > 1 && res.connections < budget) {
        uint32_t mid = lo + (hi - lo) / 2;
        auto k = probe(mid);
        if (!k) {
            res.aborted = true;
            return res;
        }
        if (*k == CloseKind::Rst)
            hi = mid;
        else
            lo = mid;
    }
    if (hi - lo > 1) {
        res.aborted = true;  // budget exhausted
        return res;
    }
    if (hi == 1)
        res.sentinel = RstSentinel::AlwaysRst;
    else
        res.threshold = hi;
    return res;
}

// /29-style co-location expansion: the host addresses of the enclosing
// netblock crossed with the port list, original endpoint first.
inline std::vector<Endpoint> expand_subnet(const Endpoint& ep, std::vector<uint16_t> ports,
                                           int prefix) {
    int full = ep.addr.v6 ? 128 : 32;
    int host_bits = full - prefix;
    if (host_bits < 0) host_bits = 0;
    if (host_bits > 3) host_bits = 3;  // at most 8 addresses

    std::vector<uint16_t> port_list;
    auto add_port = [&](uint16_t p) {
        for (uint16_t q : port_list)
            if (q == p) return;
        port_list.push_back(p);
    };
    add_port(ep.port);
    add_port(1194);
    for (uint16_t p : ports) add_port(p);

    std::vector<IpAddr> addrs;
    IpAddr base = ep.addr;
    size_t last = base.width() - 1;
    uint8_t mask = static_cast<uint8_t>(~((1u << host_bits) - 1));
    base.bytes[last] &= mask;
    addrs.push_back(ep.addr);
    for (uint32_t i = 0; i < (1u << host_bits); i++) {
        IpAddr a = base;
        a.bytes[last] = static_cast<uint8_t>((base.bytes[last] & mask) | i);
        if (a == ep.addr) continue;
        addrs.push_back(a);
    }

    std::vector<Endpoint> out;
    for (const IpAddr& a : addrs)
        for (uint16_t p : port_list) out.push_back({a, p});
    return out;
}

// Interim result of the two base probes.
enum class BaseInterim : uint8_t { Continue, NoHmac, NotOpenVPN, Unreachable };

inline BaseInterim base_probe_interim(const ProbeObservation& o1, const ProbeObservation& o2) {
    if (o1.unreachable || o2.unreachable) return BaseInterim::Unreachable;
    if (o1.cls == BehaviorClass::ExplicitResponse && parses_as_server_reset(o1.response_prefix))
        return BaseInterim::NoHmac;
    if (matches_short_fin(o1) && verdict_class(o2) == BehaviorClass::LongClose)
        return BaseInterim::Continue;
    return BaseInterim::NotOpenVPN;
}

// Full staged pipeline against one TCP endpoint: base pair, port-share
// screen, secondary probes, optional RST search.
inline EndpointVerdict probe_endpoint(const Target& target, const ProberConfig& cfg) {
    EndpointVerdict out;
    out.target = target;
    const Endpoint& ep = target.endpoint;
    auto catalog = build_probe_catalog(cfg.seed);
    auto run = [&](ProbeName name) {
        ProbeObservation o = run_probe(ep, {name, probe_payload(catalog, name)}, cfg.timings);
        out.connections++;
        out.evidence.push_back(o);
        return o;
    };

    ProbeObservation o1 = run(ProbeName::BaseProbe1);
    if (o1.unreachable) {
        out.verdict = Verdict::Unreachable;
        return out;
    }
    if (o1.cls == BehaviorClass::ExplicitResponse && parses_as_server_reset(o1.response_prefix)) {
        out.verdict = Verdict::OpenVPNNoHmac;  // second base probe unnecessary
        return out;
    }
    ProbeObservation o2 = run(ProbeName::BaseProbe2);
    switch (base_probe_interim(o1, o2)) {
        case BaseInterim::Unreachable: out.verdict = Verdict::Unreachable; return out;
        case BaseInterim::NoHmac: out.verdict = Verdict::OpenVPNNoHmac; return out;
        case BaseInterim::NotOpenVPN: out.verdict = Verdict::NotOpenVPN; return out;
        case BaseInterim::Continue: break;
    }

    // Port-share screen: explicit response to any of the three service
    // probes ends the pipeline.
    for (ProbeName name : {ProbeName::HttpGet, ProbeName::Tls, ProbeName::Ssh}) {
        ProbeObservation o = run(name);
        if (o.cls == BehaviorClass::ExplicitResponse) {
            out.verdict = Verdict::PortShared;
            return out;
        }
    }

    uint32_t matched = 0;
    struct Expect {
        ProbeName name;
        BehaviorClass cls;
    };
    const Expect secondary[] = {
        {ProbeName::TcpGeneric, BehaviorClass::ShortClose},
        {ProbeName::OneZero, BehaviorClass::LongClose},
        {ProbeName::TwoZero, BehaviorClass::ShortClose},
        {ProbeName::Epmd, BehaviorClass::ShortClose},
        {ProbeName::TwoKRandom, BehaviorClass::RstClose},
    };
    for (const Expect& e : secondary) {
        ProbeObservation o = run(e.name);
        bool ok;
        if (e.cls == BehaviorClass::RstClose)
            ok = o.cls == BehaviorClass::RstClose && o.elapsed <= cfg.timings.t_short;
        else if (e.cls == BehaviorClass::ShortClose)
            ok = matches_short_fin(o);
        else
            ok = verdict_class(o) == BehaviorClass::LongClose;
        if (ok) matched++;
    }
    out.verdict = matched >= cfg.min_matches ? Verdict::OpenVPN : Verdict::NotOpenVPN;

    if (cfg.rst_search && out.verdict == Verdict::OpenVPN) {
        // Budgeted separately from the 10-connection standard pipeline.
        out.rst = rst_threshold_search(ep, cfg.timings, cfg.seed, cfg.rst_budget);
    }
    return out;
}

inline nlohmann::ordered_json verdict_to_json(const EndpointVerdict& v, uint64_t seed) {
    nlohmann::ordered_json obs = nlohmann::ordered_json::array();
    for (const auto& o : v.evidence) {
        nlohmann::ordered_json j{
            {"probe", probe_name_str(o.probe)},
            {"class", behavior_name(o.cls)},
            {"close_kind", close_kind_name(o.close_kind)},
            {"elapsed_s", o.elapsed},
        };
        if (!o.response_prefix.empty()) j["response_prefix"] = to_hex(o.response_prefix);
        if (o.unreachable) j["unreachable"] = true;
        if (!o.error.empty()) j["error"] = o.error;
        obs.push_back(std::move(j));
    }
    nlohmann::ordered_json j{
        {"endpoint", v.target.str()},
        {"verdict", verdict_name(v.verdict)},
        {"connections", v.connections},
        {"seed", seed},
    };
    if (v.rst)
        j["rst_threshold"] = v.rst->str();
    else
        j["rst_threshold"] = nullptr;
    if (v.corroborated_by) j["corroborated_by"] = *v.corroborated_by;
    j["observations"] = std::move(obs);
    return j;
}

// Probes many endpoints concurrently; stages within one endpoint stay
// strictly sequential. Results come back in input order.
class ProbeRunner {
public:
    explicit ProbeRunner(ProberConfig cfg) : cfg_(cfg) {}

    // Optional endpoint rewrite hook (e.g. redirect suspects to an emulator
    // fleet in tests and offline pipelines).
    using Redirect = std::function<std::optional<Endpoint>(const Target&)>;
    void set_redirect(Redirect r) { redirect_ = std::move(r); }

    std::vector<EndpointVerdict> run(const std::vector<Target>& targets) {
        std::vector<EndpointVerdict> results(targets.size());
        std::atomic<size_t> next{0};
        uint32_t n_workers = std::max<uint32_t>(1, cfg_.workers);
        std::vector<std::thread> pool;
        for (uint32_t w = 0; w < n_workers; w++) {
            pool.emplace_back([&] {
                for (;;) {
                    size_t i = next.fetch_add(1);
                    if (i >= targets.size()) return;
                    results[i] = probe_one(targets[i]);
                }
            });
        }
        for (auto& t : pool) t.join();
        return results;
    }

    EndpointVerdict probe_one(const Target& target) {
        Target effective = target;
        if (redirect_) {
            if (auto ep = redirect_(target)) effective.endpoint = *ep;
        }
        if (target.transport == Transport::Udp) return probe_udp_suspect(target, effective);
        EndpointVerdict v = probe_endpoint(effective, cfg_);
        v.target = target;
        return v;
    }

private:
    // UDP (and tunnel-obfuscated) suspects cannot be probed directly; the
    // scheme relies on the TCP length field. Their enclosing netblock is
    // swept for a co-located vanilla TCP server instead.
    EndpointVerdict probe_udp_suspect(const Target& original, const Target& effective) {
        EndpointVerdict out;
        out.target = original;
        if (cfg_.expand_prefix <= 0) {
            out.verdict = Verdict::Unreachable;
            return out;
        }
        auto candidates = expand_subnet(effective.endpoint, cfg_.extra_ports, cfg_.expand_prefix);
        bool any_connected = false;
        for (const Endpoint& ep : candidates) {
            Target t{Transport::Tcp, ep};
            EndpointVerdict v = probe_endpoint(t, cfg_);
            out.connections += v.connections;
            if (v.verdict != Verdict::Unreachable) any_connected = true;
            if (v.verdict == Verdict::OpenVPN || v.verdict == Verdict::OpenVPNNoHmac) {
                out.verdict = v.verdict;
                out.evidence = std::move(v.evidence);
                out.rst = v.rst;
                out.corroborated_by = t.str();
                return out;
            }
        }
        out.verdict = any_connected ? Verdict::NotOpenVPN : Verdict::Unreachable;
        return out;
    }

    ProberConfig cfg_;
    Redirect redirect_;
};

}  // namespace ovpnfp

#endif  // OVPNFP_PROBE_HPP
