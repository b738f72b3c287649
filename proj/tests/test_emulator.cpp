#include <catch2/catch_amalgamated.hpp>

#include <sys/socket.h>
#include <netinet/in.h>
#include <arpa/inet.h>
#include <unistd.h>

#include "ovpnfp/emulator.hpp"
#include "ovpnfp/probe.hpp"

using namespace ovpnfp;

namespace {

// Short timing ladder for CI; ordering t_short < t_long_min < hand_window.
ProbeTimings fast_timings() {
    ProbeTimings t;
    t.connect_timeout = 2.0;
    t.t_short = 0.8;
    t.t_long_min = 1.5;
    t.deadline = 5.0;
    return t;
}

EmulatorConfig base_config() {
    EmulatorConfig cfg;
    cfg.transport = Transport::Tcp;
    cfg.persona = Persona::OpenVpn;
    cfg.hand_window = 2.0;
    cfg.seed = 9;
    return cfg;
}

ProbeObservation send_and_watch(const EmulatorServer& server, Bytes payload,
                                ProbeTimings t = fast_timings()) {
    ProbeSpec spec{ProbeName::TwoKRandom, std::move(payload)};
    return run_probe(server.endpoint(), spec, t);
}

Bytes base_probe1() {
    return probe_payload(build_probe_catalog(4), ProbeName::BaseProbe1);
}

}  // namespace

TEST_CASE("tls-auth server closes a complete reset immediately with FIN") {
    EmulatorServer server(base_config());
    server.start();
    auto obs = send_and_watch(server, base_probe1());
    CHECK(obs.cls == BehaviorClass::ShortClose);
    CHECK(obs.close_kind == CloseKind::Fin);
    CHECK(obs.elapsed < 1.0);
    server.stop();
}

TEST_CASE("one byte short of a packet closes only at the handshake window") {
    EmulatorServer server(base_config());
    server.start();
    Bytes p = base_probe1();
    p.pop_back();
    auto obs = send_and_watch(server, p);
    CHECK(obs.cls == BehaviorClass::LongClose);
    CHECK(obs.close_kind == CloseKind::Fin);
    CHECK(obs.elapsed > 1.7);
    CHECK(obs.elapsed < 2.6);
    server.stop();
}

TEST_CASE("length just over max_len drops immediately") {
    EmulatorServer server(base_config());
    server.start();
    // 0x06 0x5c = 1628 > 1627 for the default MTU of 1500.
    Bytes p = {0x06, 0x5c, 0x00, 0x00};
    auto obs = send_and_watch(server, p);
    CHECK(obs.cls == BehaviorClass::ShortClose);
    CHECK(obs.elapsed < 1.0);
    server.stop();
}

TEST_CASE("length exactly max_len is accepted for reassembly") {
    EmulatorConfig cfg = base_config();
    cfg.hand_window = 1.6;
    EmulatorServer server(cfg);
    server.start();
    Bytes p = {0x06, 0x5b, 0xaa};  // 1627: valid, waits for the remainder
    auto obs = send_and_watch(server, p);
    CHECK(obs.close_kind == CloseKind::Fin);
    CHECK(obs.elapsed > 1.3);  // handshake-window close, not instant
    server.stop();
}

TEST_CASE("close flips FIN to RST exactly past the read buffer") {
    EmulatorConfig cfg = base_config();
    cfg.mtu = 873;  // max_len = read_buffer = 1000
    REQUIRE(cfg.max_len() == 1000);
    EmulatorServer server(cfg);
    server.start();

    auto burst = [&](size_t n) {
        Bytes p(n, 0xee);
        p[0] = 0xff;
        p[1] = 0xff;  // declared length 65535: dropped at once
        return send_and_watch(server, p);
    };
    auto at_cap = burst(1000);
    CHECK(at_cap.close_kind == CloseKind::Fin);
    CHECK(at_cap.cls == BehaviorClass::ShortClose);
    auto over_cap = burst(1001);
    CHECK(over_cap.close_kind == CloseKind::Rst);
    CHECK(over_cap.cls == BehaviorClass::RstClose);
    auto well_over = burst(2000);
    CHECK(well_over.close_kind == CloseKind::Rst);
    server.stop();
}

TEST_CASE("read_buffer below max_len is a configuration error") {
    EmulatorConfig cfg = base_config();
    cfg.read_buffer_override = 1000;  // max_len stays 1627
    CHECK_THROWS_AS(EmulatorServer(cfg), std::invalid_argument);
}

TEST_CASE("server without HMAC answers a client reset with a framed server reset") {
    EmulatorConfig cfg = base_config();
    cfg.tls_auth = false;
    EmulatorServer server(cfg);
    server.start();
    auto obs = send_and_watch(server, base_probe1());
    REQUIRE(obs.cls == BehaviorClass::ExplicitResponse);
    REQUIRE(obs.response_prefix.size() >= 3);
    uint32_t len = load_be16(obs.response_prefix.data());
    CHECK(len == 26);
    CHECK((obs.response_prefix[2] >> 3) == 8);  // hard reset server v2
    CHECK(parses_as_server_reset(obs.response_prefix));
    server.stop();
}

TEST_CASE("XOR-scrambled server accepts scrambled resets; length stays plaintext") {
    EmulatorConfig cfg = base_config();
    cfg.tls_auth = false;
    cfg.obfuscation.mode = ObfsMode::Composite;
    cfg.obfuscation.key = {0x10, 0x20, 0x30};
    EmulatorServer server(cfg);
    server.start();

    Bytes plain = base_probe1();
    Bytes frame(plain.begin() + 2, plain.end());
    Bytes masked = cfg.obfuscation.apply(frame);
    Bytes wire = {0x00, 0x0e};
    append_bytes(wire, masked);
    auto obs = send_and_watch(server, wire);
    REQUIRE(obs.cls == BehaviorClass::ExplicitResponse);
    // The reply is scrambled the same way; invert to find the reset.
    Bytes reply(obs.response_prefix.begin() + 2, obs.response_prefix.end());
    Bytes unmasked = cfg.obfuscation.invert(reply);
    CHECK((unmasked[0] >> 3) == 8);

    // An unscrambled reset no longer decodes to a reset opcode: dropped.
    auto plain_obs = send_and_watch(server, plain);
    CHECK(plain_obs.cls == BehaviorClass::ShortClose);
    server.stop();
}

TEST_CASE("UDP server answers only unauthenticated-off resets") {
    auto udp_exchange = [](bool tls_auth, Bytes payload) -> std::optional<Bytes> {
        EmulatorConfig cfg;
        cfg.transport = Transport::Udp;
        cfg.persona = Persona::OpenVpn;
        cfg.tls_auth = tls_auth;
        EmulatorServer server(cfg);
        server.start();
        int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
        REQUIRE(fd >= 0);
        sockaddr_in sa{};
        sa.sin_family = AF_INET;
        sa.sin_port = htons(server.port());
        ::inet_pton(AF_INET, "127.0.0.1", &sa.sin_addr);
        ::sendto(fd, payload.data(), payload.size(), 0, reinterpret_cast<sockaddr*>(&sa),
                 sizeof(sa));
        pollfd pf{fd, POLLIN, 0};
        std::optional<Bytes> got;
        if (::poll(&pf, 1, 600) > 0) {
            uint8_t buf[4096];
            ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
            if (n > 0) got = Bytes(buf, buf + n);
        }
        ::close(fd);
        server.stop();
        return got;
    };

    Bytes reset = {opcodes::kClientResetV2};
    Rng rng(2);
    append_bytes(reset, rng.bytes(13));

    auto reply = udp_exchange(false, reset);
    REQUIRE(reply);
    CHECK(((*reply)[0] >> 3) == 8);

    CHECK_FALSE(udp_exchange(true, reset));           // silent with tls-auth
    CHECK_FALSE(udp_exchange(false, rng.bytes(20)));  // garbage: silence
}

TEST_CASE("HTTP persona answers requests and garbage alike") {
    EmulatorConfig cfg = base_config();
    cfg.persona = Persona::Http;
    EmulatorServer server(cfg);
    server.start();
    std::string get = "GET / HTTP/1.0\r\n\r\n";
    auto obs = send_and_watch(server, Bytes(get.begin(), get.end()));
    REQUIRE(obs.cls == BehaviorClass::ExplicitResponse);
    std::string head(obs.response_prefix.begin(), obs.response_prefix.end());
    CHECK(head.rfind("HTTP/1.0 200", 0) == 0);

    auto garbage = send_and_watch(server, base_probe1());
    REQUIRE(garbage.cls == BehaviorClass::ExplicitResponse);
    std::string ghead(garbage.response_prefix.begin(), garbage.response_prefix.end());
    CHECK(ghead.rfind("HTTP/1.0 400", 0) == 0);
    server.stop();
}

TEST_CASE("TLS persona answers a ClientHello with a ServerHello record") {
    EmulatorConfig cfg = base_config();
    cfg.persona = Persona::Tls;
    EmulatorServer server(cfg);
    server.start();
    auto catalog = build_probe_catalog(4);
    auto obs = send_and_watch(server, probe_payload(catalog, ProbeName::Tls));
    REQUIRE(obs.cls == BehaviorClass::ExplicitResponse);
    CHECK(obs.response_prefix[0] == 0x16);
    server.stop();
}

TEST_CASE("SSH persona pushes its banner on connect") {
    EmulatorConfig cfg = base_config();
    cfg.persona = Persona::Ssh;
    EmulatorServer server(cfg);
    server.start();
    auto obs = send_and_watch(server, Bytes{0x00});
    REQUIRE(obs.cls == BehaviorClass::ExplicitResponse);
    std::string head(obs.response_prefix.begin(), obs.response_prefix.end());
    CHECK(head.rfind("SSH-2.0-", 0) == 0);
    server.stop();
}

TEST_CASE("echo persona reflects whatever arrives") {
    EmulatorConfig cfg = base_config();
    cfg.persona = Persona::Echo;
    EmulatorServer server(cfg);
    server.start();
    Bytes msg = {0x0d, 0x0a, 0x0d, 0x0a};
    auto obs = send_and_watch(server, msg);
    REQUIRE(obs.cls == BehaviorClass::ExplicitResponse);
    CHECK(obs.response_prefix == msg);
    server.stop();
}

TEST_CASE("port-share forwards invalid-length first packets to the backend") {
    EmulatorConfig cfg = base_config();
    cfg.persona = Persona::PortShared;
    cfg.port_share_backend = Persona::Http;
    EmulatorServer server(cfg);
    server.start();

    // Valid OpenVPN length: handled by the VPN side (HMAC drop).
    auto vpn_side = send_and_watch(server, base_probe1());
    CHECK(vpn_side.cls == BehaviorClass::ShortClose);

    std::string get = "GET / HTTP/1.0\r\n\r\n";
    auto web_side = send_and_watch(server, Bytes(get.begin(), get.end()));
    REQUIRE(web_side.cls == BehaviorClass::ExplicitResponse);
    std::string head(web_side.response_prefix.begin(), web_side.response_prefix.end());
    CHECK(head.rfind("HTTP/1.0 200", 0) == 0);
    server.stop();
}

TEST_CASE("obfs4-like persona closes after its per-listener delay, reading everything") {
    EmulatorConfig cfg = base_config();
    cfg.persona = Persona::Obfs4Like;
    cfg.obfs4_delay_min = cfg.obfs4_delay_max = 0.4;
    EmulatorServer server(cfg);
    server.start();
    auto obs = send_and_watch(server, Bytes(3000, 0x77));
    CHECK(obs.close_kind == CloseKind::Fin);  // everything consumed
    CHECK(obs.elapsed > 0.25);
    CHECK(obs.elapsed < 1.2);
    server.stop();
}
