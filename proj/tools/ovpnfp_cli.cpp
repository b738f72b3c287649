// ovpnfp — passive OpenVPN flow filtering, active server probing, and a
// behavioral emulator for generating test traffic and mock endpoints.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ovpnfp/emulator.hpp"
#include "ovpnfp/filter.hpp"
#include "ovpnfp/probe.hpp"
#include "ovpnfp/trace.hpp"

namespace fs = std::filesystem;
using namespace ovpnfp;

namespace {

constexpr const char* kVersion = "ovpnfp 0.1.0";

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

struct TunnelSpec {
    bool tunnel = false;
    bool padded = false;
    uint32_t overhead = 29;
    uint32_t handshake = 6;
    uint32_t pad_max = 255;
};

Bytes parse_hex(const std::string& s) {
    if (s.size() % 2 != 0) throw CLI::ValidationError("hex string must have even length");
    Bytes out(s.size() / 2);
    for (size_t i = 0; i < out.size(); i++) {
        auto nib = [&](char c) -> int {
            if (c >= '0' && c <= '9') return c - '0';
            if (c >= 'a' && c <= 'f') return c - 'a' + 10;
            if (c >= 'A' && c <= 'F') return c - 'A' + 10;
            throw CLI::ValidationError("bad hex digit in key");
        };
        out[i] = static_cast<uint8_t>(nib(s[2 * i]) << 4 | nib(s[2 * i + 1]));
    }
    return out;
}

// Grammar: none | xor:key=HEX | xorptrpos | reverse | composite:key=HEX |
//          tunnel:oh=29,hs=6 | padded:oh=29,pad=255,hs=6
void parse_obfuscation(const std::string& spec, Obfuscator& ob, TunnelSpec& tn) {
    auto kv_fields = [](const std::string& s) {
        std::map<std::string, std::string> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) {
            auto eq = item.find('=');
            if (eq == std::string::npos)
                throw CLI::ValidationError("expected key=value in obfuscation spec: " + item);
            out[item.substr(0, eq)] = item.substr(eq + 1);
        }
        return out;
    };
    if (spec.empty() || spec == "none") {
        ob.mode = ObfsMode::None;
        return;
    }
    if (spec == "xorptrpos") {
        ob.mode = ObfsMode::XorPtrPos;
        return;
    }
    if (spec == "reverse") {
        ob.mode = ObfsMode::ReverseKeepFirst;
        return;
    }
    if (spec.rfind("xor:", 0) == 0 || spec.rfind("composite:", 0) == 0) {
        auto colon = spec.find(':');
        auto fields = kv_fields(spec.substr(colon + 1));
        if (!fields.count("key")) throw CLI::ValidationError("obfuscation needs key=HEX");
        ob.key = parse_hex(fields["key"]);
        if (ob.key.empty()) throw CLI::ValidationError("obfuscation key must be non-empty");
        ob.mode = spec[0] == 'x' ? ObfsMode::XorMask : ObfsMode::Composite;
        return;
    }
    if (spec.rfind("tunnel:", 0) == 0 || spec.rfind("padded:", 0) == 0) {
        auto fields = kv_fields(spec.substr(spec.find(':') + 1));
        tn.tunnel = true;
        tn.padded = spec[0] == 'p';
        if (fields.count("oh")) tn.overhead = static_cast<uint32_t>(std::stoul(fields["oh"]));
        if (fields.count("hs")) tn.handshake = static_cast<uint32_t>(std::stoul(fields["hs"]));
        if (fields.count("pad")) tn.pad_max = static_cast<uint32_t>(std::stoul(fields["pad"]));
        return;
    }
    throw CLI::ValidationError("unknown obfuscation spec: " + spec);
}

Persona parse_persona(const std::string& s) {
    for (Persona p : {Persona::OpenVpn, Persona::Http, Persona::Tls, Persona::Ssh, Persona::Echo,
                      Persona::Obfs4Like, Persona::PortShared, Persona::Random})
        if (s == persona_name(p)) return p;
    throw CLI::ValidationError("unknown persona: " + s);
}

struct FilterRun {
    FilterSummary summary;
    std::vector<SuspectRecord> records;
};

FilterRun run_filter_on_pcap(const std::string& in_path, const FilterConfig& cfg,
                             SuspectLogWriter* sink = nullptr) {
    FilterPipeline pipe(cfg);
    PcapReader reader(in_path);
    while (auto pkt = reader.next()) {
        auto rec = pipe.process_packet(*pkt);
        if (rec && sink) sink->write(*rec);
        if (g_interrupted) break;
    }
    for (const auto& rec : pipe.finish())
        if (sink) sink->write(rec);
    FilterRun run;
    run.summary = pipe.summary();
    run.records = pipe.records();
    return run;
}

void write_suspects(const std::string& path, const std::vector<SuspectRecord>& records) {
    SuspectLogWriter writer(path);
    for (const auto& r : records) writer.write(r);
}

std::vector<Target> read_targets(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open targets file: " + path);
    std::vector<Target> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        if (line.empty() || line[0] == '#') continue;
        auto t = parse_target(line);
        if (!t)
            throw std::runtime_error("bad target at " + path + ":" + std::to_string(lineno) +
                                     ": " + line);
        out.push_back(*t);
    }
    return out;
}

void write_verdicts(const std::string& path, const std::vector<EndpointVerdict>& verdicts,
                    uint64_t seed) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output: " + path);
    for (const auto& v : verdicts) out << verdict_to_json(v, seed).dump() << "\n";
}

// Emulator fleet spec: one instance per line,
//   <ip:port> <persona> [key=value ...]
// keys: tls-auth, hand-window, mtu, read-buffer, backend, seed.
// Suspects matching <ip:port> are probed against the spawned instance.
struct Fleet {
    std::vector<std::unique_ptr<EmulatorServer>> servers;
    std::map<std::string, Endpoint> redirects;

    void load(const std::string& path, double hand_window_default) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open fleet spec: " + path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::stringstream ss(line);
            std::string addr, persona;
            ss >> addr >> persona;
            EmulatorConfig cfg;
            cfg.persona = parse_persona(persona);
            cfg.hand_window = hand_window_default;
            std::string opt;
            while (ss >> opt) {
                auto eq = opt.find('=');
                std::string k = opt.substr(0, eq);
                std::string v = eq == std::string::npos ? "" : opt.substr(eq + 1);
                if (k == "tls-auth") cfg.tls_auth = v != "0" && v != "false";
                else if (k == "hand-window") cfg.hand_window = std::stod(v);
                else if (k == "mtu") cfg.mtu = static_cast<uint32_t>(std::stoul(v));
                else if (k == "read-buffer") cfg.read_buffer_override = static_cast<uint32_t>(std::stoul(v));
                else if (k == "backend") cfg.port_share_backend = parse_persona(v);
                else if (k == "seed") cfg.seed = std::stoull(v);
                else throw std::runtime_error("unknown fleet option: " + k);
            }
            auto server = std::make_unique<EmulatorServer>(cfg);
            server->start();
            redirects[addr] = server->endpoint();
            servers.push_back(std::move(server));
        }
    }
};

int cmd_filter(const std::string& in, const std::string& out, const FilterConfig& cfg) {
    SuspectLogWriter sink(out);
    FilterRun run = run_filter_on_pcap(in, cfg, &sink);
    std::fprintf(stderr,
                 "filter: packets=%llu flows_seen=%llu flows_at_window=%llu flagged=%llu "
                 "abandoned=%llu evicted=%llu window=%u sample_rate=%g loss=%g seed=%llu\n",
                 static_cast<unsigned long long>(run.summary.packets),
                 static_cast<unsigned long long>(run.summary.flows_seen),
                 static_cast<unsigned long long>(run.summary.flows_at_window),
                 static_cast<unsigned long long>(run.summary.flagged),
                 static_cast<unsigned long long>(run.summary.abandoned),
                 static_cast<unsigned long long>(run.summary.evicted), cfg.window,
                 cfg.sample_rate, cfg.loss, static_cast<unsigned long long>(cfg.seed));
    return 0;
}

int cmd_sweep(const std::string& corpus, const std::vector<uint32_t>& windows,
              const std::vector<double>& losses, const std::string& out_path,
              FilterConfig base_cfg) {
    std::vector<std::string> positives, negatives;
    for (const char* sub : {"positive", "negative"}) {
        fs::path dir = fs::path(corpus) / sub;
        if (!fs::is_directory(dir)) continue;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.path().extension() == ".pcap")
                (sub[0] == 'p' ? positives : negatives).push_back(entry.path().string());
    }
    std::sort(positives.begin(), positives.end());
    std::sort(negatives.begin(), negatives.end());
    if (positives.empty() && negatives.empty())
        throw std::runtime_error("corpus has no positive/ or negative/ pcaps: " + corpus);

    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open output: " + out_path);
    out << "# ovpnfp sweep seed=" << base_cfg.seed << " positives=" << positives.size()
        << " negatives=" << negatives.size() << "\n";
    out << "window\tloss\tflagged_positive\tflagged_negative\n";
    for (uint32_t w : windows) {
        for (double p : losses) {
            FilterConfig cfg = base_cfg;
            cfg.window = w;
            cfg.loss = p;
            // Per-file loss streams derive from (seed, path) so captures do
            // not share drop positions; still reproducible run to run.
            auto seeded = [&](const std::string& path) {
                FilterConfig c = cfg;
                c.seed = base_cfg.seed ^ fnv1a64({reinterpret_cast<const uint8_t*>(path.data()),
                                                  path.size()});
                return c;
            };
            uint64_t fp = 0, fn = 0;
            for (const auto& path : positives)
                fp += run_filter_on_pcap(path, seeded(path)).records.size();
            for (const auto& path : negatives)
                fn += run_filter_on_pcap(path, seeded(path)).records.size();
            out << w << "\t" << p << "\t" << fp << "\t" << fn << "\n";
            std::fprintf(stderr, "sweep: window=%u loss=%g flagged_pos=%llu flagged_neg=%llu\n", w,
                         p, static_cast<unsigned long long>(fp),
                         static_cast<unsigned long long>(fn));
            if (g_interrupted) return 1;
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::signal(SIGPIPE, SIG_IGN);

    CLI::App app{"OpenVPN flow filtering, active probing, and behavioral emulation"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // ---- filter ----
    auto* filter_cmd = app.add_subcommand("filter", "Passive fingerprinting over a capture file");
    filter_cmd->set_config("--config", "", "INI/TOML config file (flags override)");
    std::string f_in, f_out;
    FilterConfig fcfg;
    filter_cmd->add_option("--in", f_in, "input pcap")->required();
    filter_cmd->add_option("--out", f_out, "suspect log (JSONL)")->required();
    filter_cmd->add_option("--window", fcfg.window, "observation window N")
        ->default_val(100)
        ->check(CLI::Range(10, 200));
    filter_cmd->add_option("--sample-rate", fcfg.sample_rate, "flow sampling rate (IP-pair based)")
        ->default_val(1.0);
    filter_cmd->add_option("--loss", fcfg.loss, "simulated packet loss probability")->default_val(0.0);
    filter_cmd->add_option("--seed", fcfg.seed, "RNG seed")->default_val(0);
    filter_cmd->add_option("--opcode-min", fcfg.opcode.min_distinct)->default_val(4);
    filter_cmd->add_option("--opcode-max", fcfg.opcode.max_distinct)->default_val(10);
    filter_cmd->add_option("--ack-search-bound", fcfg.ack.search_bound)->default_val(16);
    filter_cmd->add_option("--ack-min-bins", fcfg.ack.min_bins)->default_val(6);
    filter_cmd->add_option("--ack-bin1-min", fcfg.ack.thresholds.bin1_min)->default_val(1);
    filter_cmd->add_option("--ack-bin1-max", fcfg.ack.thresholds.bin1_max)->default_val(3);
    filter_cmd->add_option("--ack-bin2-min", fcfg.ack.thresholds.bin2_min)->default_val(2);
    filter_cmd->add_option("--ack-bin2-max", fcfg.ack.thresholds.bin2_max)->default_val(5);
    filter_cmd->add_option("--ack-bins3to5-max", fcfg.ack.thresholds.bins3to5_max)->default_val(5);
    filter_cmd->add_option("--ack-bins6plus-max", fcfg.ack.thresholds.bins6plus_max)->default_val(1);
    filter_cmd->add_option("--reorder-cap", fcfg.framing.reorder_cap)->default_val(65536);
    filter_cmd->add_option("--frame-sanity-max", fcfg.framing.frame_sanity_max)->default_val(16384);
    filter_cmd->add_option("--flow-capacity", fcfg.table.capacity)->default_val(1 << 20);

    // ---- probe ----
    auto* probe_cmd = app.add_subcommand("probe", "Active probing of suspect endpoints");
    probe_cmd->set_config("--config", "", "INI/TOML config file (flags override)");
    std::string p_targets, p_out, p_expand = "/29", p_rst = "off", p_fleet;
    double p_batch_delay = 0.0;
    ProberConfig pcfg;
    probe_cmd->add_option("--targets", p_targets, "file of tcp://ip:port / udp://ip:port lines")
        ->required();
    probe_cmd->add_option("--out", p_out, "verdict log (JSONL)")->required();
    probe_cmd->add_option("--seed", pcfg.seed, "seed for probe payload randomness")->default_val(0);
    probe_cmd->add_option("--t-short", pcfg.timings.t_short, "short close bound (s)")
        ->default_val(3.0);
    probe_cmd->add_option("--t-long-min", pcfg.timings.t_long_min, "long close lower bound (s)")
        ->default_val(30.0);
    probe_cmd->add_option("--deadline", pcfg.timings.deadline, "per-probe deadline (s)")
        ->default_val(75.0);
    probe_cmd->add_option("--connect-timeout", pcfg.timings.connect_timeout)->default_val(5.0);
    probe_cmd->add_option("--expand-subnet", p_expand, "co-location sweep prefix (/29) or off")
        ->default_val("/29");
    probe_cmd->add_option("--ports", pcfg.extra_ports, "extra ports for subnet expansion");
    probe_cmd->add_option("--rst-search", p_rst, "on/off: RST threshold binary search")
        ->default_val("off");
    probe_cmd->add_option("--min-matches", pcfg.min_matches, "secondary expectations required")
        ->default_val(5);
    probe_cmd->add_option("--workers", pcfg.workers, "concurrent endpoints")->default_val(8);
    probe_cmd
        ->add_option("--batch-delay", p_batch_delay,
                     "seconds to wait before probing (documents batched operation; suspects may "
                     "churn while waiting)")
        ->default_val(0.0);
    probe_cmd->add_option("--fleet", p_fleet, "emulator fleet spec for offline runs");

    // ---- emulate ----
    auto* emulate_cmd = app.add_subcommand("emulate", "OpenVPN behavior emulator");
    emulate_cmd->require_subcommand(1);

    auto* serve_cmd = emulate_cmd->add_subcommand("serve", "Run a mock server");
    EmulatorConfig ecfg;
    std::string e_persona = "openvpn", e_transport = "tcp", e_backend = "http", e_obfs = "none";
    uint32_t e_read_buffer = 0;
    serve_cmd->add_option("--persona", e_persona,
                          "openvpn|http|tls|ssh|echo|obfs4like|portshared");
    serve_cmd->add_option("--transport", e_transport, "tcp|udp");
    serve_cmd->add_option("--port", ecfg.port, "listen port (0 = ephemeral)")->default_val(0);
    serve_cmd->add_option("--bind", ecfg.bind_addr)->default_val("127.0.0.1");
    serve_cmd->add_flag("--tls-auth,!--no-tls-auth", ecfg.tls_auth,
                        "HMAC-protect the control channel (silent to probes)");
    serve_cmd->add_option("--mtu", ecfg.mtu)->default_val(1500);
    serve_cmd->add_option("--hand-window", ecfg.hand_window, "handshake timeout (s)")
        ->default_val(60.0);
    serve_cmd->add_option("--read-buffer", e_read_buffer, "packet reassembly buffer (bytes)")
        ->default_val(0);
    serve_cmd->add_option("--backend", e_backend, "port-share backend persona");
    serve_cmd->add_option("--obfuscation", e_obfs, "xor:key=HEX|xorptrpos|reverse|composite:key=HEX");
    serve_cmd->add_option("--seed", ecfg.seed)->default_val(1);
    serve_cmd->add_option("--obfs4-delay-min", ecfg.obfs4_delay_min)->default_val(20.0);
    serve_cmd->add_option("--obfs4-delay-max", ecfg.obfs4_delay_max)->default_val(120.0);

    auto* gen_cmd = emulate_cmd->add_subcommand("gen", "Generate a synthetic trace pcap");
    TraceConfig tcfg;
    std::string g_persona = "openvpn", g_transport = "udp", g_obfs = "none", g_out;
    std::string g_client_ip = "10.0.0.1", g_server_ip = "10.0.0.2";
    uint16_t g_client_port = 34012, g_server_port = 1194;
    uint64_t g_seed = 1;
    bool g_nanosecond = false;
    gen_cmd->add_option("--persona", g_persona, "openvpn|http|tls|ssh|echo|random");
    gen_cmd->add_option("--transport", g_transport, "tcp|udp");
    gen_cmd->add_option("--packets", tcfg.n_packets)->default_val(200);
    gen_cmd->add_option("--seed", g_seed)->default_val(1);
    gen_cmd->add_option("--obfuscation", g_obfs,
                        "xor:key=HEX|xorptrpos|reverse|composite:key=HEX|tunnel:oh=29,hs=6|"
                        "padded:oh=29,pad=255");
    gen_cmd->add_option("--out", g_out, "output pcap")->required();
    gen_cmd->add_flag("--nanosecond", g_nanosecond, "write nanosecond-resolution pcap");
    gen_cmd->add_option("--client-ip", g_client_ip);
    gen_cmd->add_option("--server-ip", g_server_ip);
    gen_cmd->add_option("--client-port", g_client_port)->default_val(34012);
    gen_cmd->add_option("--server-port", g_server_port)->default_val(1194);

    // ---- sweep ----
    auto* sweep_cmd = app.add_subcommand("sweep", "Window/loss sweeps over a labeled corpus");
    std::string s_corpus, s_out;
    std::vector<uint32_t> s_windows;
    std::vector<double> s_losses;
    FilterConfig scfg;
    sweep_cmd->add_option("--corpus", s_corpus, "directory with positive/ and negative/ pcaps")
        ->required();
    sweep_cmd->add_option("--windows", s_windows, "window sizes")->delimiter(',')->required();
    sweep_cmd->add_option("--loss", s_losses, "loss rates")->delimiter(',')->default_val("0");
    sweep_cmd->add_option("--out", s_out, "output table (TSV)")->required();
    sweep_cmd->add_option("--seed", scfg.seed)->default_val(0);
    sweep_cmd->add_option("--sample-rate", scfg.sample_rate)->default_val(1.0);

    // ---- pipeline ----
    auto* pipe_cmd = app.add_subcommand("pipeline", "filter then probe, chained");
    std::string pl_in, pl_targets_out, pl_verdicts_out, pl_fleet, pl_expand = "/29";
    FilterConfig plf;
    ProberConfig plp;
    pipe_cmd->add_option("--in", pl_in, "input pcap")->required();
    pipe_cmd->add_option("--targets-out", pl_targets_out, "suspect log (JSONL)")->required();
    pipe_cmd->add_option("--verdicts-out", pl_verdicts_out, "verdict log (JSONL)")->required();
    pipe_cmd->add_option("--window", plf.window)->default_val(100)->check(CLI::Range(10, 200));
    pipe_cmd->add_option("--sample-rate", plf.sample_rate)->default_val(1.0);
    pipe_cmd->add_option("--loss", plf.loss)->default_val(0.0);
    pipe_cmd->add_option("--seed", plf.seed)->default_val(0);
    pipe_cmd->add_option("--fleet", pl_fleet, "emulator fleet spec (see probe --fleet)");
    pipe_cmd->add_option("--t-short", plp.timings.t_short)->default_val(3.0);
    pipe_cmd->add_option("--t-long-min", plp.timings.t_long_min)->default_val(30.0);
    pipe_cmd->add_option("--deadline", plp.timings.deadline)->default_val(75.0);
    pipe_cmd->add_option("--connect-timeout", plp.timings.connect_timeout)->default_val(5.0);
    pipe_cmd->add_option("--expand-subnet", pl_expand)->default_val("/29");
    pipe_cmd->add_option("--workers", plp.workers)->default_val(8);

    // Every subcommand gets --dump-config for reproducibility.
    bool dump_config = false;
    for (auto* sc : {filter_cmd, probe_cmd, serve_cmd, gen_cmd, sweep_cmd, pipe_cmd})
        sc->add_flag("--dump-config", dump_config, "print effective config and exit");

    CLI11_PARSE(app, argc, argv);

    auto parse_prefix = [](const std::string& s) -> int {
        if (s == "off" || s == "0") return 0;
        std::string digits = s;
        if (!digits.empty() && digits[0] == '/') digits = digits.substr(1);
        int v = std::stoi(digits);
        if (v < 1 || v > 128) throw CLI::ValidationError("bad subnet prefix: " + s);
        return v;
    };

    try {
        if (app.got_subcommand(filter_cmd)) {
            if (dump_config) {
                std::cout << filter_cmd->config_to_str(true, true);
                return 0;
            }
            fcfg.validate();
            return cmd_filter(f_in, f_out, fcfg);
        }

        if (app.got_subcommand(probe_cmd)) {
            if (dump_config) {
                std::cout << probe_cmd->config_to_str(true, true);
                return 0;
            }
            pcfg.expand_prefix = parse_prefix(p_expand);
            pcfg.rst_search = p_rst == "on" || p_rst == "true" || p_rst == "1";
            if (p_batch_delay > 0) {
                std::fprintf(stderr, "probe: batching, waiting %.1f s before probing\n",
                             p_batch_delay);
                std::this_thread::sleep_for(std::chrono::duration<double>(p_batch_delay));
            }
            auto targets = read_targets(p_targets);
            Fleet fleet;
            ProbeRunner runner(pcfg);
            if (!p_fleet.empty()) {
                fleet.load(p_fleet, 60.0);
                runner.set_redirect([&fleet](const Target& t) -> std::optional<Endpoint> {
                    auto it = fleet.redirects.find(t.endpoint.str());
                    if (it == fleet.redirects.end()) return std::nullopt;
                    return it->second;
                });
            }
            auto verdicts = runner.run(targets);
            write_verdicts(p_out, verdicts, pcfg.seed);
            size_t by[5] = {0, 0, 0, 0, 0};
            for (const auto& v : verdicts) by[static_cast<size_t>(v.verdict)]++;
            std::fprintf(stderr,
                         "probe: targets=%zu openvpn=%zu nohmac=%zu portshared=%zu "
                         "notopenvpn=%zu unreachable=%zu seed=%llu\n",
                         verdicts.size(), by[0], by[1], by[2], by[3], by[4],
                         static_cast<unsigned long long>(pcfg.seed));
            return 0;
        }

        if (app.got_subcommand(emulate_cmd) && emulate_cmd->got_subcommand(serve_cmd)) {
            if (dump_config) {
                std::cout << serve_cmd->config_to_str(true, true);
                return 0;
            }
            ecfg.persona = parse_persona(e_persona);
            ecfg.transport = e_transport == "udp" ? Transport::Udp : Transport::Tcp;
            ecfg.port_share_backend = parse_persona(e_backend);
            if (e_read_buffer > 0) ecfg.read_buffer_override = e_read_buffer;
            TunnelSpec tn;
            parse_obfuscation(e_obfs, ecfg.obfuscation, tn);
            if (tn.tunnel) throw CLI::ValidationError("serve supports byte-transform obfuscations only");
            EmulatorServer server(ecfg);
            server.start();
            std::fprintf(stderr, "emulate: %s %s persona=%s listening on %s:%u\n",
                         transport_name(ecfg.transport), ecfg.tls_auth ? "tls-auth" : "no-hmac",
                         persona_name(ecfg.persona), ecfg.bind_addr.c_str(), server.port());
            while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
            server.stop();
            return 0;
        }

        if (app.got_subcommand(emulate_cmd) && emulate_cmd->got_subcommand(gen_cmd)) {
            if (dump_config) {
                std::cout << gen_cmd->config_to_str(true, true);
                return 0;
            }
            tcfg.persona = parse_persona(g_persona);
            tcfg.transport = g_transport == "udp" ? Transport::Udp : Transport::Tcp;
            TunnelSpec tn;
            parse_obfuscation(g_obfs, tcfg.obfuscation, tn);
            SyntheticTrace trace = generate_trace(tcfg, g_seed);
            if (tn.tunnel) {
                trace = tn.padded ? wrap_padded(trace, tn.overhead, tn.pad_max, g_seed)
                                  : wrap_tunnel(trace, tn.overhead, tn.handshake, g_seed);
            }
            TraceEndpoints ep;
            auto cip = parse_ip(g_client_ip);
            auto sip = parse_ip(g_server_ip);
            if (!cip || !sip) throw CLI::ValidationError("bad --client-ip/--server-ip");
            ep.client = {*cip, g_client_port};
            ep.server = {*sip, g_server_port};
            PcapWriter writer(g_out, g_nanosecond);
            trace_to_pcap(trace, writer, ep);
            writer.flush();
            std::fprintf(stderr, "gen: persona=%s transport=%s packets=%zu obfuscation=%s seed=%llu out=%s\n",
                         persona_name(trace.persona), transport_name(trace.transport),
                         trace.packets.size(), trace.obfuscation.c_str(),
                         static_cast<unsigned long long>(g_seed), g_out.c_str());
            return 0;
        }

        if (app.got_subcommand(sweep_cmd)) {
            if (dump_config) {
                std::cout << sweep_cmd->config_to_str(true, true);
                return 0;
            }
            return cmd_sweep(s_corpus, s_windows, s_losses, s_out, scfg);
        }

        if (app.got_subcommand(pipe_cmd)) {
            if (dump_config) {
                std::cout << pipe_cmd->config_to_str(true, true);
                return 0;
            }
            plf.validate();
            FilterRun run = run_filter_on_pcap(pl_in, plf);
            write_suspects(pl_targets_out, run.records);
            std::fprintf(stderr, "pipeline: filter flagged %zu flow(s)\n", run.records.size());
            std::vector<Target> targets;
            for (const auto& r : run.records) {
                Target t;
                t.transport = r.transport;
                t.endpoint = {r.server_addr, r.server_port};
                bool dup = false;
                for (const auto& seen : targets)
                    if (seen.endpoint == t.endpoint && seen.transport == t.transport) dup = true;
                if (!dup) targets.push_back(t);
            }
            std::vector<EndpointVerdict> verdicts;
            if (!targets.empty()) {
                plp.seed = plf.seed;
                plp.expand_prefix = parse_prefix(pl_expand);
                Fleet fleet;
                ProbeRunner runner(plp);
                if (!pl_fleet.empty()) {
                    fleet.load(pl_fleet, 60.0);
                    runner.set_redirect([&fleet](const Target& t) -> std::optional<Endpoint> {
                        auto it = fleet.redirects.find(t.endpoint.str());
                        if (it == fleet.redirects.end()) return std::nullopt;
                        return it->second;
                    });
                }
                verdicts = runner.run(targets);
            } else {
                std::fprintf(stderr, "pipeline: no suspects, prober not invoked\n");
            }
            write_verdicts(pl_verdicts_out, verdicts, plf.seed);
            size_t confirmed = 0;
            for (const auto& v : verdicts)
                if (v.verdict == Verdict::OpenVPN || v.verdict == Verdict::OpenVPNNoHmac)
                    confirmed++;
            std::fprintf(stderr, "pipeline: %zu suspect(s), %zu confirmed OpenVPN, seed=%llu\n",
                         targets.size(), confirmed, static_cast<unsigned long long>(plf.seed));
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
