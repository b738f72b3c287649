#ifndef OVPNFP_EMULATOR_HPP
#define OVPNFP_EMULATOR_HPP

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/ioctl.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstring>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ovpnfp/obfuscate.hpp"
#include "ovpnfp/trace.hpp"

namespace ovpnfp {

enum class CloseKind : uint8_t { Fin, Rst, None };

inline const char* close_kind_name(CloseKind k) {
    switch (k) {
        case CloseKind::Fin: return "fin";
        case CloseKind::Rst: return "rst";
        default: return "none";
    }
}

// Behavioral knobs of the mock server. max_len is derived from the MTU so
// that the default 1500 yields 1627; the fixed overhead covers crypto IV,
// packet length, and friends.
struct EmulatorConfig {
    Transport transport = Transport::Tcp;
    Persona persona = Persona::OpenVpn;
    Persona port_share_backend = Persona::Http;
    uint32_t mtu = 1500;
    std::optional<uint32_t> read_buffer_override;
    bool tls_auth = true;
    double hand_window = 60.0;  // seconds until an incomplete handshake is dropped
    Obfuscator obfuscation;
    uint64_t seed = 1;
    double obfs4_delay_min = 20.0;
    double obfs4_delay_max = 120.0;
    std::string bind_addr = "127.0.0.1";
    uint16_t port = 0;  // 0: ephemeral

    static constexpr uint32_t kMtuOverhead = 127;

    uint32_t max_len() const { return mtu + kMtuOverhead; }
    uint32_t read_buffer() const { return read_buffer_override.value_or(max_len()); }

    void validate() const {
        if (hand_window <= 0) throw std::invalid_argument("hand_window must be positive");
        if (read_buffer() < max_len())
            throw std::invalid_argument("read_buffer must be at least max_len");
    }
};

namespace detail {

inline double steady_now() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

inline bool send_all(int fd, std::span<const uint8_t> data) {
    size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n <= 0) return false;
        off += static_cast<size_t>(n);
    }
    return true;
}

inline Bytes make_server_reset(Rng& rng) {
    Bytes b(26);
    b[0] = opcodes::kServerResetV2;
    for (int i = 1; i <= 8; i++) b[static_cast<size_t>(i)] = rng.next_byte();  // session id
    b[9] = 0x01;  // acknowledges the client's hard reset
    for (int i = 10; i < 26; i++) b[static_cast<size_t>(i)] = rng.next_byte();
    return b;
}

}  // namespace detail

// TCP/UDP behavioral OpenVPN mock plus the negative-control personas.
//
// Close semantics follow the kernel: the handler reads at most read_buffer
// bytes of a burst; closing with bytes still queued in the socket receive
// buffer produces an abortive RST, a fully drained close produces a FIN.
class EmulatorServer {
public:
    explicit EmulatorServer(EmulatorConfig cfg) : cfg_(cfg), rng_(cfg.seed) {
        cfg_.validate();
        obfs4_delay_ = cfg_.obfs4_delay_min +
                       Rng(cfg_.seed * 0x2545f4914f6cdd1dull + 11).next_unit() *
                           (cfg_.obfs4_delay_max - cfg_.obfs4_delay_min);
    }

    ~EmulatorServer() { stop(); }

    void start() {
        if (cfg_.transport == Transport::Tcp)
            start_tcp();
        else
            start_udp();
    }

    void stop() {
        bool was = stopping_.exchange(true);
        if (was) return;
        if (listen_fd_ >= 0) {
            ::shutdown(listen_fd_, SHUT_RDWR);
            ::close(listen_fd_);
            listen_fd_ = -1;
        }
        {
            std::lock_guard<std::mutex> lk(conn_mu_);
            for (int fd : live_fds_) ::shutdown(fd, SHUT_RDWR);
        }
        if (accept_thread_.joinable()) accept_thread_.join();
        std::vector<std::thread> workers;
        {
            std::lock_guard<std::mutex> lk(conn_mu_);
            workers.swap(conn_threads_);
        }
        for (auto& t : workers)
            if (t.joinable()) t.join();
    }

    uint16_t port() const { return port_; }
    const EmulatorConfig& config() const { return cfg_; }
    Endpoint endpoint() const {
        return {parse_ip(cfg_.bind_addr).value_or(IpAddr::v4(127, 0, 0, 1)), port_};
    }

private:
    void start_tcp() {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd_ < 0) throw std::runtime_error("emulator: socket() failed");
        int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in sa{};
        sa.sin_family = AF_INET;
        sa.sin_port = htons(cfg_.port);
        if (::inet_pton(AF_INET, cfg_.bind_addr.c_str(), &sa.sin_addr) != 1)
            throw std::runtime_error("emulator: bad bind address");
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0)
            throw std::runtime_error("emulator: bind failed on port " + std::to_string(cfg_.port));
        if (::listen(listen_fd_, 64) != 0) throw std::runtime_error("emulator: listen failed");
        socklen_t slen = sizeof(sa);
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&sa), &slen);
        port_ = ntohs(sa.sin_port);
        accept_thread_ = std::thread([this] { accept_loop(); });
    }

    void start_udp() {
        listen_fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (listen_fd_ < 0) throw std::runtime_error("emulator: socket() failed");
        int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in sa{};
        sa.sin_family = AF_INET;
        sa.sin_port = htons(cfg_.port);
        ::inet_pton(AF_INET, cfg_.bind_addr.c_str(), &sa.sin_addr);
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0)
            throw std::runtime_error("emulator: bind failed");
        socklen_t slen = sizeof(sa);
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&sa), &slen);
        port_ = ntohs(sa.sin_port);
        accept_thread_ = std::thread([this] { udp_loop(); });
    }

    void accept_loop() {
        while (!stopping_) {
            pollfd pf{listen_fd_, POLLIN, 0};
            int r = ::poll(&pf, 1, 200);
            if (stopping_) break;
            if (r <= 0) continue;
            int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) continue;
            std::lock_guard<std::mutex> lk(conn_mu_);
            live_fds_.insert(fd);
            uint64_t conn_seed = rng_.next_u64();
            conn_threads_.emplace_back([this, fd, conn_seed] { handle_connection(fd, conn_seed); });
        }
    }

    // All handler closes go through here: the fd leaves the live set before
    // close() so stop() never touches a recycled descriptor.
    void close_fd(int fd) {
        {
            std::lock_guard<std::mutex> lk(conn_mu_);
            live_fds_.erase(fd);
        }
        ::close(fd);
    }

    void udp_loop() {
        Rng rng(cfg_.seed * 7919 + 5);
        std::vector<uint8_t> buf(65536);
        while (!stopping_) {
            pollfd pf{listen_fd_, POLLIN, 0};
            int r = ::poll(&pf, 1, 200);
            if (stopping_) break;
            if (r <= 0) continue;
            sockaddr_in peer{};
            socklen_t plen = sizeof(peer);
            ssize_t n = ::recvfrom(listen_fd_, buf.data(), buf.size(), 0,
                                   reinterpret_cast<sockaddr*>(&peer), &plen);
            if (n <= 0) continue;
            if (cfg_.persona != Persona::OpenVpn || cfg_.tls_auth) continue;  // silent
            Bytes pkt(buf.begin(), buf.begin() + n);
            Bytes plain = cfg_.obfuscation.invert(pkt);
            if (!plain.empty() && (plain[0] >> 3) == 7) {
                Bytes reset = cfg_.obfuscation.apply(detail::make_server_reset(rng));
                ::sendto(listen_fd_, reset.data(), reset.size(), MSG_NOSIGNAL,
                         reinterpret_cast<sockaddr*>(&peer), plen);
            }
        }
    }

    // Waits for readability until `deadline` (steady seconds), honoring stop.
    // Returns 1 readable, 0 timeout, -1 stopping.
    int wait_readable(int fd, double deadline) {
        for (;;) {
            if (stopping_) return -1;
            double remain = deadline - detail::steady_now();
            if (remain <= 0) return 0;
            int ms = remain > 0.2 ? 200 : static_cast<int>(remain * 1000) + 1;
            pollfd pf{fd, POLLIN, 0};
            int r = ::poll(&pf, 1, ms);
            if (r > 0) return 1;
            if (r < 0) return -1;
        }
    }

    // Reads up to `cap` total application bytes, then closes. The kernel
    // turns the close into a RST when unread bytes remain queued.
    CloseKind drain_close(int fd, size_t already_read, size_t cap) {
        uint8_t tmp[65536];
        size_t total = already_read;
        for (;;) {
            if (total >= cap) break;
            pollfd pf{fd, POLLIN, 0};
            if (::poll(&pf, 1, 25) <= 0) break;
            size_t room = std::min(cap - total, sizeof(tmp));
            ssize_t n = ::recv(fd, tmp, room, 0);
            if (n <= 0) break;
            total += static_cast<size_t>(n);
        }
        int pending = 0;
        ::ioctl(fd, FIONREAD, &pending);
        close_fd(fd);
        return pending > 0 ? CloseKind::Rst : CloseKind::Fin;
    }

    void handle_connection(int fd, uint64_t conn_seed) {
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        switch (cfg_.persona) {
            case Persona::OpenVpn: handle_openvpn(fd, {}, conn_seed); break;
            case Persona::Http: handle_http(fd, {}); break;
            case Persona::Tls: handle_tls(fd, {}); break;
            case Persona::Ssh: handle_ssh(fd, {}); break;
            case Persona::Echo: handle_echo(fd); break;
            case Persona::Obfs4Like: handle_obfs4(fd); break;
            case Persona::PortShared: handle_port_shared(fd, conn_seed); break;
            default: drain_close(fd, 0, 0); break;
        }
    }

    // Figure: read 2-byte length; reject 0 or > max_len outright; otherwise
    // wait for the full packet before any syntax or HMAC handling.
    void handle_openvpn(int fd, Bytes initial, uint64_t conn_seed) {
        Rng rng(conn_seed);
        const size_t cap = cfg_.read_buffer();
        const uint32_t max_len = cfg_.max_len();
        const double deadline = detail::steady_now() + cfg_.hand_window;
        Bytes buf = std::move(initial);
        size_t app_read = buf.size();
        uint8_t tmp[65536];
        for (;;) {
            while (buf.size() >= 2) {
                uint32_t len = load_be16(buf.data());
                if (len == 0 || len > max_len) {
                    drain_close(fd, app_read, cap);
                    return;
                }
                if (buf.size() < 2 + len) break;
                Bytes frame(buf.begin() + 2, buf.begin() + 2 + len);
                buf.erase(buf.begin(), buf.begin() + 2 + len);
                if (cfg_.tls_auth) {
                    // No valid HMAC can exist on a probe; drop at once.
                    drain_close(fd, app_read, cap);
                    return;
                }
                Bytes plain = cfg_.obfuscation.invert(frame);
                if ((plain[0] >> 3) == 7) {
                    Bytes reset = cfg_.obfuscation.apply(detail::make_server_reset(rng));
                    Bytes wire(2 + reset.size());
                    store_be16(wire.data(), static_cast<uint16_t>(reset.size()));
                    std::copy(reset.begin(), reset.end(), wire.begin() + 2);
                    if (!detail::send_all(fd, wire)) {
                        close_fd(fd);
                        return;
                    }
                    continue;
                }
                drain_close(fd, app_read, cap);
                return;
            }
            size_t room = cap > buf.size() ? cap - buf.size() : 0;
            if (room == 0) {
                // Buffer exhausted without a complete packet; hold until the
                // handshake window lapses.
                wait_readable(-1, deadline);
                drain_close(fd, app_read, cap);
                return;
            }
            int w = wait_readable(fd, deadline);
            if (w <= 0) {
                drain_close(fd, app_read, cap);
                return;
            }
            ssize_t n = ::recv(fd, tmp, std::min(room, sizeof(tmp)), 0);
            if (n <= 0) {
                close_fd(fd);
                return;
            }
            buf.insert(buf.end(), tmp, tmp + n);
            app_read += static_cast<size_t>(n);
        }
    }

    void handle_port_shared(int fd, uint64_t conn_seed) {
        // Port sharing inspects the first length field: OpenVPN-conforming
        // traffic is handled locally, everything else goes to the backend.
        Bytes buf;
        const double deadline = detail::steady_now() + cfg_.hand_window;
        uint8_t tmp[4096];
        while (buf.size() < 2) {
            int w = wait_readable(fd, deadline);
            if (w <= 0) {
                drain_close(fd, buf.size(), cfg_.read_buffer());
                return;
            }
            ssize_t n = ::recv(fd, tmp, sizeof(tmp), 0);
            if (n <= 0) {
                close_fd(fd);
                return;
            }
            buf.insert(buf.end(), tmp, tmp + n);
        }
        uint32_t len = load_be16(buf.data());
        if (len >= 1 && len <= cfg_.max_len()) {
            handle_openvpn(fd, std::move(buf), conn_seed);
            return;
        }
        switch (cfg_.port_share_backend) {
            case Persona::Tls: handle_tls(fd, std::move(buf)); break;
            case Persona::Ssh: handle_ssh(fd, std::move(buf)); break;
            case Persona::Echo: handle_echo(fd, std::move(buf)); break;
            default: handle_http(fd, std::move(buf)); break;
        }
    }

    void handle_http(int fd, Bytes req) {
        const double deadline = detail::steady_now() + 2.0;
        uint8_t tmp[8192];
        while (req.size() < 8192) {
            if (req.size() >= 4 &&
                std::memcmp(req.data() + req.size() - 4, "\r\n\r\n", 4) == 0)
                break;
            int w = wait_readable(fd, deadline);
            if (w <= 0) break;
            ssize_t n = ::recv(fd, tmp, sizeof(tmp), 0);
            if (n <= 0) break;
            req.insert(req.end(), tmp, tmp + n);
        }
        bool looks_http = req.size() >= 4 && (std::memcmp(req.data(), "GET ", 4) == 0 ||
                                              std::memcmp(req.data(), "POST", 4) == 0 ||
                                              std::memcmp(req.data(), "HEAD", 4) == 0);
        std::string body = "<html><body>ok</body></html>";
        std::string resp = std::string("HTTP/1.0 ") + (looks_http ? "200 OK" : "400 Bad Request") +
                           "\r\nServer: emu\r\nContent-Type: text/html\r\nContent-Length: " +
                           std::to_string(body.size()) + "\r\nConnection: close\r\n\r\n" + body;
        detail::send_all(fd, {reinterpret_cast<const uint8_t*>(resp.data()), resp.size()});
        drain_close(fd, req.size(), req.size() + 65536);
    }

    void handle_tls(int fd, Bytes got) {
        const double deadline = detail::steady_now() + 2.0;
        uint8_t tmp[8192];
        while (got.empty()) {
            int w = wait_readable(fd, deadline);
            if (w <= 0) break;
            ssize_t n = ::recv(fd, tmp, sizeof(tmp), 0);
            if (n <= 0) break;
            got.insert(got.end(), tmp, tmp + n);
        }
        Bytes resp;
        if (!got.empty() && got[0] == 0x16) {
            // Minimal ServerHello record.
            Bytes hello = {0x02, 0x00, 0x00, 0x26, 0x03, 0x03};
            Rng rng(cfg_.seed + 3);
            Bytes rand32 = rng.bytes(32);
            append_bytes(hello, rand32);
            hello.push_back(0x00);        // empty session id
            hello.push_back(0x13);        // TLS_AES_128_GCM_SHA256
            hello.push_back(0x01);
            hello.push_back(0x00);        // null compression
            resp = {0x16, 0x03, 0x03, 0x00, 0x00};
            store_be16(&resp[3], static_cast<uint16_t>(hello.size()));
            append_bytes(resp, hello);
        } else {
            resp = {0x15, 0x03, 0x03, 0x00, 0x02, 0x02, 0x0a};  // fatal unexpected_message
        }
        detail::send_all(fd, resp);
        drain_close(fd, got.size(), got.size() + 65536);
    }

    void handle_ssh(int fd, Bytes got) {
        std::string banner = "SSH-2.0-OpenSSH_8.9p1\r\n";
        detail::send_all(fd, {reinterpret_cast<const uint8_t*>(banner.data()), banner.size()});
        const double deadline = detail::steady_now() + 2.0;
        uint8_t tmp[8192];
        size_t total = got.size();
        for (;;) {
            int w = wait_readable(fd, deadline);
            if (w <= 0) break;
            ssize_t n = ::recv(fd, tmp, sizeof(tmp), 0);
            if (n <= 0) break;
            total += static_cast<size_t>(n);
        }
        drain_close(fd, total, total + 65536);
    }

    void handle_echo(int fd, Bytes initial = {}) {
        if (!initial.empty()) detail::send_all(fd, initial);
        const double deadline = detail::steady_now() + cfg_.hand_window;
        uint8_t tmp[65536];
        for (;;) {
            int w = wait_readable(fd, deadline);
            if (w <= 0) break;
            ssize_t n = ::recv(fd, tmp, sizeof(tmp), 0);
            if (n <= 0) break;
            detail::send_all(fd, {tmp, static_cast<size_t>(n)});
        }
        close_fd(fd);
    }

    // Reads and discards everything, closing only after a per-listener random
    // delay; the immediate/handshake-window close signature never appears.
    void handle_obfs4(int fd) {
        const double deadline = detail::steady_now() + obfs4_delay_;
        uint8_t tmp[65536];
        for (;;) {
            int w = wait_readable(fd, deadline);
            if (w <= 0) break;
            ssize_t n = ::recv(fd, tmp, sizeof(tmp), 0);
            if (n <= 0) break;
        }
        drain_close(fd, 0, SIZE_MAX);
    }

    EmulatorConfig cfg_;
    Rng rng_;
    double obfs4_delay_ = 0;
    std::atomic<bool> stopping_{false};
    int listen_fd_ = -1;
    uint16_t port_ = 0;
    std::thread accept_thread_;
    std::mutex conn_mu_;
    std::vector<std::thread> conn_threads_;
    std::set<int> live_fds_;
};

}  // namespace ovpnfp

#endif  // OVPNFP_EMULATOR_HPP
