#include <catch2/catch_amalgamated.hpp>

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <thread>

#include "ovpnfp/emulator.hpp"
#include "ovpnfp/probe.hpp"

using namespace ovpnfp;

namespace {

ProbeTimings fast_timings() {
    ProbeTimings t;
    t.connect_timeout = 2.0;
    t.t_short = 0.8;
    t.t_long_min = 1.5;
    t.deadline = 5.0;
    return t;
}

ProberConfig fast_prober(uint64_t seed = 4) {
    ProberConfig cfg;
    cfg.timings = fast_timings();
    cfg.seed = seed;
    cfg.expand_prefix = 29;
    cfg.workers = 4;
    return cfg;
}

EmulatorConfig emu(Persona persona, bool tls_auth = true) {
    EmulatorConfig cfg;
    cfg.transport = Transport::Tcp;
    cfg.persona = persona;
    cfg.tls_auth = tls_auth;
    cfg.hand_window = 2.0;
    cfg.seed = 77;
    return cfg;
}

Target tcp_target(const Endpoint& ep) { return {Transport::Tcp, ep}; }

ProbeObservation obs_of(BehaviorClass cls, CloseKind kind, double elapsed) {
    ProbeObservation o;
    o.cls = cls;
    o.close_kind = kind;
    o.elapsed = elapsed;
    return o;
}

// Accepts one connection, optionally lingers, then closes with a forced RST.
class AlwaysRstServer {
public:
    AlwaysRstServer() {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        REQUIRE(fd_ >= 0);
        int one = 1;
        ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in sa{};
        sa.sin_family = AF_INET;
        sa.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        REQUIRE(::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) == 0);
        REQUIRE(::listen(fd_, 16) == 0);
        socklen_t slen = sizeof(sa);
        ::getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &slen);
        port_ = ntohs(sa.sin_port);
        worker_ = std::thread([this] {
            for (;;) {
                int c = ::accept(fd_, nullptr, nullptr);
                if (c < 0) return;
                std::this_thread::sleep_for(std::chrono::milliseconds(30));
                linger lg{1, 0};  // abortive close: RST regardless of payload
                ::setsockopt(c, SOL_SOCKET, SO_LINGER, &lg, sizeof(lg));
                ::close(c);
            }
        });
    }
    ~AlwaysRstServer() {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        if (worker_.joinable()) worker_.join();
    }
    Endpoint endpoint() const { return {IpAddr::v4(127, 0, 0, 1), port_}; }

private:
    int fd_;
    uint16_t port_ = 0;
    std::thread worker_;
};

}  // namespace

TEST_CASE("probe payloads match the published byte patterns") {
    auto catalog = build_probe_catalog(123);

    Bytes b1 = probe_payload(catalog, ProbeName::BaseProbe1);
    REQUIRE(b1.size() == 16);
    CHECK(b1[0] == 0x00);
    CHECK(b1[1] == 0x0e);
    CHECK(b1[2] == 0x38);
    for (int i = 11; i < 16; i++) CHECK(b1[static_cast<size_t>(i)] == 0x00);

    Bytes b2 = probe_payload(catalog, ProbeName::BaseProbe2);
    REQUIRE(b2.size() == 15);
    CHECK(Bytes(b1.begin(), b1.end() - 1) == b2);

    CHECK(probe_payload(catalog, ProbeName::TcpGeneric) == Bytes{0x0d, 0x0a, 0x0d, 0x0a});
    CHECK(probe_payload(catalog, ProbeName::OneZero) == Bytes{0x00});
    CHECK(probe_payload(catalog, ProbeName::TwoZero) == Bytes{0x00, 0x00});
    CHECK(probe_payload(catalog, ProbeName::Epmd) == Bytes{0x00, 0x01, 0x6e});

    std::string ssh = "SSH-2.0-OpenSSH_8.1\r\n";
    CHECK(probe_payload(catalog, ProbeName::Ssh) == Bytes(ssh.begin(), ssh.end()));
    std::string get = "GET / HTTP/1.0\r\n\r\n";
    CHECK(probe_payload(catalog, ProbeName::HttpGet) == Bytes(get.begin(), get.end()));

    Bytes tls = probe_payload(catalog, ProbeName::Tls);
    CHECK(tls[0] == 0x16);
    CHECK(tls[1] == 0x03);
    CHECK(load_be16(&tls[3]) == tls.size() - 5);  // well-formed record length

    CHECK(probe_payload(catalog, ProbeName::TwoKRandom).size() == 2000);
}

TEST_CASE("probe payload randomness is reproducible from the seed") {
    auto a = build_probe_catalog(55);
    auto b = build_probe_catalog(55);
    auto c = build_probe_catalog(56);
    for (size_t i = 0; i < a.size(); i++) CHECK(a[i].payload == b[i].payload);
    CHECK(probe_payload(a, ProbeName::TwoKRandom) != probe_payload(c, ProbeName::TwoKRandom));
    CHECK(probe_payload(a, ProbeName::BaseProbe1) != probe_payload(c, ProbeName::BaseProbe1));
}

TEST_CASE("subnet expansion covers the /29 crossed with the port list") {
    Endpoint ep{IpAddr::v4(10, 0, 0, 12), 1300};
    auto targets = expand_subnet(ep, {1194}, 29);
    REQUIRE(targets.size() == 16);  // 8 hosts x {1300, 1194}
    CHECK(targets[0] == ep);        // original endpoint first
    std::set<std::string> addrs;
    for (const auto& t : targets) addrs.insert(t.addr.str());
    CHECK(addrs.size() == 8);
    for (int i = 8; i <= 15; i++)
        CHECK(addrs.count("10.0.0." + std::to_string(i)) == 1);
}

TEST_CASE("a /32 expansion is only the original host") {
    Endpoint ep{IpAddr::v4(203, 0, 113, 9), 4443};
    auto targets = expand_subnet(ep, {}, 32);
    REQUIRE(targets.size() == 2);  // original port plus 1194
    CHECK(targets[0] == ep);
    CHECK(targets[1].port == 1194);
    CHECK(targets[1].addr == ep.addr);
}

TEST_CASE("IPv6 expansion uses the /125 analogue") {
    auto ip = parse_ip("2001:db8::4");
    REQUIRE(ip);
    Endpoint ep{*ip, 1194};
    auto targets = expand_subnet(ep, {}, 125);
    REQUIRE(targets.size() == 8);  // 8 hosts x one (deduplicated) port
    CHECK(targets[0] == ep);
    std::set<std::string> addrs;
    for (const auto& t : targets) addrs.insert(t.addr.str());
    CHECK(addrs.size() == 8);
    CHECK(addrs.count("2001:db8:0:0:0:0:0:0") == 1);
    CHECK(addrs.count("2001:db8:0:0:0:0:0:7") == 1);
}

TEST_CASE("base pair interim logic follows the probe table") {
    auto short_fin = obs_of(BehaviorClass::ShortClose, CloseKind::Fin, 0.1);
    auto long_fin = obs_of(BehaviorClass::LongClose, CloseKind::Fin, 2.0);
    auto timeout = obs_of(BehaviorClass::Timeout, CloseKind::None, 5.0);

    CHECK(base_probe_interim(short_fin, long_fin) == BaseInterim::Continue);
    CHECK(base_probe_interim(short_fin, timeout) == BaseInterim::Continue);
    CHECK(base_probe_interim(short_fin, short_fin) == BaseInterim::NotOpenVPN);
    CHECK(base_probe_interim(long_fin, long_fin) == BaseInterim::NotOpenVPN);

    auto rst = obs_of(BehaviorClass::RstClose, CloseKind::Rst, 0.1);
    CHECK(base_probe_interim(rst, long_fin) == BaseInterim::NotOpenVPN);

    ProbeObservation dead;
    dead.unreachable = true;
    CHECK(base_probe_interim(short_fin, dead) == BaseInterim::Unreachable);

    auto reset = obs_of(BehaviorClass::ExplicitResponse, CloseKind::None, 0.05);
    reset.response_prefix = {0x00, 0x1a, 0x40};
    CHECK(base_probe_interim(reset, long_fin) == BaseInterim::NoHmac);
}

TEST_CASE("server reset parsing rejects non-reset responses") {
    CHECK(parses_as_server_reset(Bytes{0x00, 0x1a, 0x40}));
    CHECK_FALSE(parses_as_server_reset(Bytes{0x00, 0x1a, 0x38}));     // client reset opcode
    CHECK_FALSE(parses_as_server_reset(Bytes{0x48, 0x54, 0x54, 0x50}));  // "HTTP"
    CHECK_FALSE(parses_as_server_reset(Bytes{0x16, 0x03, 0x03, 0x00}));  // TLS record
    CHECK_FALSE(parses_as_server_reset(Bytes{0x00, 0x02, 0x40}));        // length too short
    CHECK_FALSE(parses_as_server_reset(Bytes{}));
}

TEST_CASE("HMAC-protected OpenVPN server earns the OpenVPN verdict in 10 connections") {
    EmulatorServer server(emu(Persona::OpenVpn));
    server.start();
    EndpointVerdict v = probe_endpoint(tcp_target(server.endpoint()), fast_prober());
    CHECK(v.verdict == Verdict::OpenVPN);
    CHECK(v.connections == 10);
    CHECK(v.evidence.size() == 10);
    server.stop();
}

TEST_CASE("no-HMAC server short-circuits as OpenVPNNoHmac after one connection") {
    EmulatorServer server(emu(Persona::OpenVpn, false));
    server.start();
    EndpointVerdict v = probe_endpoint(tcp_target(server.endpoint()), fast_prober());
    CHECK(v.verdict == Verdict::OpenVPNNoHmac);
    CHECK(v.connections == 1);
    server.stop();
}

TEST_CASE("port-shared server is screened out before the secondary probes") {
    EmulatorConfig cfg = emu(Persona::PortShared);
    cfg.port_share_backend = Persona::Http;
    EmulatorServer server(cfg);
    server.start();
    EndpointVerdict v = probe_endpoint(tcp_target(server.endpoint()), fast_prober());
    CHECK(v.verdict == Verdict::PortShared);
    CHECK(v.connections <= 5);  // base pair + at most three screen probes
    // Stage monotonicity: no secondary probe after the short-circuit.
    for (const auto& o : v.evidence) {
        CHECK(o.probe != ProbeName::TcpGeneric);
        CHECK(o.probe != ProbeName::TwoKRandom);
    }
    server.stop();
}

TEST_CASE("HTTP server fails the base pair") {
    EmulatorServer server(emu(Persona::Http));
    server.start();
    EndpointVerdict v = probe_endpoint(tcp_target(server.endpoint()), fast_prober());
    CHECK(v.verdict == Verdict::NotOpenVPN);
    CHECK(v.connections <= 2);
    server.stop();
}

TEST_CASE("closed port yields Unreachable") {
    // Bind-then-close to find a port that is very likely unused.
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) == 0);
    socklen_t slen = sizeof(sa);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &slen);
    uint16_t port = ntohs(sa.sin_port);
    ::close(fd);

    EndpointVerdict v =
        probe_endpoint(tcp_target({IpAddr::v4(127, 0, 0, 1), port}), fast_prober());
    CHECK(v.verdict == Verdict::Unreachable);
}

TEST_CASE("RST threshold search recovers the read buffer size") {
    EmulatorConfig cfg = emu(Persona::OpenVpn);
    cfg.mtu = 873;  // read_buffer = max_len = 1000
    cfg.hand_window = 0.7;
    EmulatorServer server(cfg);
    server.start();
    ProbeTimings t = fast_timings();
    t.t_long_min = 0.5;
    t.deadline = 2.0;
    RstSearchResult r = rst_threshold_search(server.endpoint(), t, 11);
    REQUIRE(r.threshold);
    CHECK(*r.threshold == 1001);
    CHECK(r.connections <= 14);
    CHECK_FALSE(r.aborted);
    server.stop();
}

TEST_CASE("always-RST endpoints report the <1 sentinel") {
    AlwaysRstServer server;
    ProbeTimings t = fast_timings();
    t.deadline = 2.0;
    RstSearchResult r = rst_threshold_search(server.endpoint(), t, 12);
    CHECK_FALSE(r.threshold);
    CHECK(r.sentinel == RstSentinel::AlwaysRst);
    CHECK(r.connections <= 14);
}

TEST_CASE("never-RST endpoints report the >8192 sentinel") {
    EmulatorConfig cfg = emu(Persona::Obfs4Like);
    cfg.obfs4_delay_min = cfg.obfs4_delay_max = 0.2;  // drains input, FIN quickly
    EmulatorServer server(cfg);
    server.start();
    ProbeTimings t = fast_timings();
    t.deadline = 2.0;
    RstSearchResult r = rst_threshold_search(server.endpoint(), t, 13);
    CHECK_FALSE(r.threshold);
    CHECK(r.sentinel == RstSentinel::NeverRst);
    CHECK(r.connections == 1);
    server.stop();
}

TEST_CASE("UDP suspects are probed via subnet expansion to a co-located TCP server") {
    EmulatorServer server(emu(Persona::OpenVpn));
    server.start();
    ProberConfig cfg = fast_prober();
    cfg.extra_ports = {server.port()};
    ProbeRunner runner(cfg);
    Target udp_suspect{Transport::Udp, {IpAddr::v4(127, 0, 0, 1), 53535}};
    EndpointVerdict v = runner.probe_one(udp_suspect);
    CHECK(v.verdict == Verdict::OpenVPN);
    REQUIRE(v.corroborated_by);
    CHECK(*v.corroborated_by == "tcp://127.0.0.1:" + std::to_string(server.port()));
    CHECK(v.target.transport == Transport::Udp);
    server.stop();
}

TEST_CASE("UDP suspects without expansion are not probed") {
    ProberConfig cfg = fast_prober();
    cfg.expand_prefix = 0;
    ProbeRunner runner(cfg);
    Target udp_suspect{Transport::Udp, {IpAddr::v4(127, 0, 0, 1), 53535}};
    EndpointVerdict v = runner.probe_one(udp_suspect);
    CHECK(v.verdict == Verdict::Unreachable);
    CHECK(v.connections == 0);
}

TEST_CASE("runner preserves input order across concurrent probing") {
    EmulatorServer vpn(emu(Persona::OpenVpn, false));
    EmulatorServer web(emu(Persona::Http));
    vpn.start();
    web.start();
    std::vector<Target> targets = {
        tcp_target(web.endpoint()),
        tcp_target(vpn.endpoint()),
        tcp_target(web.endpoint()),
    };
    ProbeRunner runner(fast_prober());
    auto verdicts = runner.run(targets);
    REQUIRE(verdicts.size() == 3);
    CHECK(verdicts[0].verdict == Verdict::NotOpenVPN);
    CHECK(verdicts[1].verdict == Verdict::OpenVPNNoHmac);
    CHECK(verdicts[2].verdict == Verdict::NotOpenVPN);
    vpn.stop();
    web.stop();
}

TEST_CASE("verdict JSON carries the seed, verdict, and observation list") {
    EndpointVerdict v;
    v.target = {Transport::Tcp, {IpAddr::v4(192, 0, 2, 1), 1194}};
    v.verdict = Verdict::OpenVPN;
    v.connections = 10;
    v.evidence.push_back(obs_of(BehaviorClass::ShortClose, CloseKind::Fin, 0.01));
    auto j = verdict_to_json(v, 99);
    CHECK(j.at("endpoint") == "tcp://192.0.2.1:1194");
    CHECK(j.at("verdict") == "OpenVPN");
    CHECK(j.at("seed") == 99);
    CHECK(j.at("rst_threshold").is_null());
    CHECK(j.at("observations").size() == 1);
    CHECK(j.at("observations")[0].at("class") == "ShortClose");
}
