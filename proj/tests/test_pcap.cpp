#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ovpnfp/pcap.hpp"

using namespace ovpnfp;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

Endpoint ep(uint8_t last, uint16_t port) { return {IpAddr::v4(192, 0, 2, last), port}; }

}  // namespace

TEST_CASE("classic pcap with TCP payload packets round-trips") {
    std::string path = temp_path("ovpnfp_basic.pcap");
    {
        PcapWriter w(path);
        Bytes data = {0x00, 0x03, 0x38, 0xaa, 0xbb};
        w.write_tcp({1628900000, 1000}, ep(1, 5000), ep(2, 1194), 1000, 0, 0x18, data);
        w.write_tcp({1628900000, 2000}, ep(2, 1194), ep(1, 5000), 7000, 0, 0x18, data);
        w.write_tcp({1628900001, 0}, ep(1, 5000), ep(2, 1194), 1005, 0, 0x18, data);
    }
    PcapReader r(path);
    int count = 0;
    while (auto pkt = r.next()) {
        REQUIRE(pkt->transport == Transport::Tcp);
        REQUIRE(pkt->payload.size() == 5);
        count++;
    }
    CHECK(count == 3);
    CHECK(r.stats().packets == 3);
    CHECK(r.stats().skipped == 0);
    std::remove(path.c_str());
}

TEST_CASE("non-IP frames are skipped and counted") {
    std::string path = temp_path("ovpnfp_arp.pcap");
    {
        PcapWriter w(path);
        Bytes arp(28, 0x00);
        w.write_ethertype_frame({1628900000, 0}, 0x0806, arp);  // ARP
        Bytes dgram = {0x38, 0x01};
        w.write_udp({1628900000, 0}, ep(1, 4444), ep(2, 1194), dgram);
        w.write_udp({1628900000, 0}, ep(2, 1194), ep(1, 4444), dgram);
    }
    PcapReader r(path);
    int count = 0;
    while (auto pkt = r.next()) {
        REQUIRE(pkt->transport == Transport::Udp);
        count++;
    }
    CHECK(count == 2);
    CHECK(r.stats().skipped == 1);
    std::remove(path.c_str());
}

TEST_CASE("nanosecond-variant magic preserves sub-microsecond timestamps") {
    std::string upath = temp_path("ovpnfp_usec.pcap");
    std::string npath = temp_path("ovpnfp_nsec.pcap");
    Timestamp ts{1628900123, 123456789};  // 123456789 ns
    Bytes data = {0x42};
    {
        PcapWriter wu(upath, false);
        wu.write_udp(ts, ep(1, 1000), ep(2, 2000), data);
        PcapWriter wn(npath, true);
        wn.write_udp(ts, ep(1, 1000), ep(2, 2000), data);
    }
    PcapReader ru(upath);
    PcapReader rn(npath);
    CHECK_FALSE(ru.nanosecond_resolution());
    CHECK(rn.nanosecond_resolution());
    auto pu = ru.next();
    auto pn = rn.next();
    REQUIRE(pu);
    REQUIRE(pn);
    CHECK(pu->ts.sec == ts.sec);
    CHECK(pn->ts.sec == ts.sec);
    // Microsecond pcap floors to 123456 us.
    CHECK(pu->ts.nsec == 123456000);
    CHECK(pn->ts.nsec == 123456789);
    std::remove(upath.c_str());
    std::remove(npath.c_str());
}

TEST_CASE("swapped byte-order captures are readable") {
    std::string path = temp_path("ovpnfp_be.pcap");
    {
        // Global header and record headers in big-endian byte order.
        std::ofstream out(path, std::ios::binary);
        uint8_t hdr[24] = {};
        store_be32(hdr, pcap_magic::kUsec);
        store_be16(hdr + 4, 2);
        store_be16(hdr + 6, 4);
        store_be32(hdr + 16, 65535);
        store_be32(hdr + 20, 1);
        out.write(reinterpret_cast<char*>(hdr), 24);

        Bytes frame(14 + 20 + 8 + 3);
        store_be16(&frame[12], 0x0800);
        uint8_t* ip = &frame[14];
        ip[0] = 0x45;
        store_be16(ip + 2, 20 + 8 + 3);
        ip[9] = 17;  // UDP
        ip[12] = 10; ip[13] = 0; ip[14] = 0; ip[15] = 1;
        ip[16] = 10; ip[17] = 0; ip[18] = 0; ip[19] = 2;
        uint8_t* udp = ip + 20;
        store_be16(udp, 777);
        store_be16(udp + 2, 1194);
        store_be16(udp + 4, 8 + 3);
        udp[8] = 0x28;

        uint8_t rec[16] = {};
        store_be32(rec, 1628900000);
        store_be32(rec + 4, 42);
        store_be32(rec + 8, static_cast<uint32_t>(frame.size()));
        store_be32(rec + 12, static_cast<uint32_t>(frame.size()));
        out.write(reinterpret_cast<char*>(rec), 16);
        out.write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(frame.size()));
    }
    PcapReader r(path);
    auto pkt = r.next();
    REQUIRE(pkt);
    CHECK(pkt->transport == Transport::Udp);
    CHECK(pkt->src.port == 777);
    CHECK(pkt->payload.size() == 3);
    CHECK(pkt->payload[0] == 0x28);
    CHECK(pkt->ts.sec == 1628900000);
    std::remove(path.c_str());
}

TEST_CASE("unknown magic is rejected") {
    std::string path = temp_path("ovpnfp_bad.pcap");
    {
        std::ofstream out(path, std::ios::binary);
        Bytes junk(32, 0x77);
        out.write(reinterpret_cast<const char*>(junk.data()), 32);
    }
    CHECK_THROWS_AS(PcapReader(path), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("missing file is rejected") {
    CHECK_THROWS_AS(PcapReader("/nonexistent/nope.pcap"), std::runtime_error);
}

TEST_CASE("truncated trailing record ends iteration without error") {
    std::string path = temp_path("ovpnfp_trunc.pcap");
    {
        PcapWriter w(path);
        w.write_udp({1, 0}, ep(1, 1000), ep(2, 2000), Bytes{0x01, 0x02});
    }
    // Append a record header claiming more bytes than present.
    {
        std::ofstream out(path, std::ios::binary | std::ios::app);
        uint8_t rec[16] = {};
        rec[8] = 200;  // incl_len = 200, but no body follows
        out.write(reinterpret_cast<char*>(rec), 16);
        out.put(0x55);
    }
    PcapReader r(path);
    int count = 0;
    while (r.next()) count++;
    CHECK(count == 1);
    CHECK(r.stats().truncated == 1);
    std::remove(path.c_str());
}

TEST_CASE("IPv6 packets decode to 16-byte addresses") {
    std::string path = temp_path("ovpnfp_v6.pcap");
    auto a6 = parse_ip("2001:db8::1");
    auto b6 = parse_ip("2001:db8::2");
    REQUIRE(a6);
    REQUIRE(b6);
    {
        PcapWriter w(path);
        w.write_udp({5, 0}, {*a6, 4000}, {*b6, 1194}, Bytes{0x38, 0x00});
    }
    PcapReader r(path);
    auto pkt = r.next();
    REQUIRE(pkt);
    CHECK(pkt->src.addr.v6);
    CHECK(pkt->src.addr == *a6);
    CHECK(pkt->dst.port == 1194);
    CHECK(pkt->payload.size() == 2);
    std::remove(path.c_str());
}

TEST_CASE("pure TCP ACK segments decode with empty payload") {
    std::string path = temp_path("ovpnfp_ack.pcap");
    {
        PcapWriter w(path);
        w.write_tcp({1, 0}, ep(1, 5000), ep(2, 443), 100, 55, 0x10, {});
    }
    PcapReader r(path);
    auto pkt = r.next();
    REQUIRE(pkt);
    CHECK(pkt->payload.empty());
    CHECK(pkt->tcp_flags == 0x10);
    std::remove(path.c_str());
}
