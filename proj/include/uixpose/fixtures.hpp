#pragma once

/**
 * @file fixtures.hpp
 * @brief Seeded synthetic session bundles.
 *
 *   benign-idle   empty-state screen, flat memory, idle CPU, no traffic
 *   benign-heavy  media-rich feed with matching traffic, memory and CPU load
 *   exfil         static input form while large uploads leave for a tracker
 *   crash-burst   feed usage interrupted by crash dialogs with memory/CPU bursts
 */

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uixpose/core.hpp"
#include "uixpose/evidence.hpp"
#include "uixpose/pipeline.hpp"
#include "uixpose/providers.hpp"
#include "uixpose/telemetry.hpp"

namespace uixpose {

enum class FixtureKind { BenignIdle, BenignHeavy, Exfil, CrashBurst };

inline constexpr std::array<std::string_view, 4> kFixtureKinds{"benign-idle", "benign-heavy", "exfil", "crash-burst"};

inline std::optional<FixtureKind> parse_fixture_kind(std::string_view s) {
    if (s == "benign-idle") return FixtureKind::BenignIdle;
    if (s == "benign-heavy") return FixtureKind::BenignHeavy;
    if (s == "exfil") return FixtureKind::Exfil;
    if (s == "crash-burst") return FixtureKind::CrashBurst;
    return std::nullopt;
}

struct FixtureOptions {
    std::size_t steps = 60;
    double dt_seconds = 5.0;
    int cores = 4;
    std::string package = "com.example.fixture";
};

struct FixtureSummary {
    std::size_t steps = 0;
    std::set<std::size_t> crash_steps;   // crash-burst only
    std::set<std::size_t> exfil_steps;   // exfil only
};

namespace detail {

/// Platform-independent draws from a 64-bit Mersenne Twister.
class FixtureRng {
public:
    explicit FixtureRng(std::uint64_t seed) : eng_(seed) {}
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(uniform() * static_cast<double>(hi - lo + 1));
    }

private:
    std::mt19937_64 eng_;
};

struct Screen {
    std::vector<std::pair<std::string, std::array<int, 4>>> components;
    std::map<std::string, std::string> flags;  // flag -> quoted evidence text
    std::string media;
    std::string description, goal, ui_class;
    std::vector<std::string> bullets;
};

inline Screen screen_empty_home() {
    Screen s;
    s.components = {{"Toolbar", {0, 0, 1080, 160}}, {"Text", {60, 900, 1020, 980}}, {"Text", {60, 1000, 1020, 1060}}};
    s.flags[std::string(kEmptyState)] = "Nothing here yet";
    s.description = "Empty home screen";
    s.goal = "Wait on 'Nothing here yet' home";
    s.ui_class = "Home / empty";
    s.bullets = {"Toolbar at top", "Text 'Nothing here yet' centred"};
    return s;
}

inline Screen screen_converter() {
    Screen s;
    s.components = {{"Toolbar", {0, 0, 1080, 160}},       {"EditText", {60, 300, 1020, 420}},
                    {"TextButton", {60, 480, 520, 580}},   {"Text", {60, 640, 1020, 700}},
                    {"Text", {60, 720, 1020, 780}},        {"Text", {60, 800, 1020, 860}}};
    s.description = "Currency converter input form";
    s.goal = "Enter an amount and tap 'Convert'";
    s.ui_class = "Converter / input";
    s.bullets = {"EditText labelled 'Amount'", "TextButton 'Convert'", "Rate text rows"};
    return s;
}

inline Screen screen_feed() {
    Screen s;
    s.components = {{"Toolbar", {0, 0, 1080, 160}}, {"Image", {0, 180, 1080, 980}}, {"Text", {40, 1000, 1040, 1060}},
                    {"Text", {40, 1080, 1040, 1140}}, {"Text", {40, 1160, 1040, 1220}}};
    s.description = "Image feed";
    s.goal = "Scroll the 'Discover' feed";
    s.ui_class = "Feed / browsing";
    s.bullets = {"Large Image card", "Caption Text rows"};
    return s;
}

inline Screen screen_launch() {
    Screen s;
    s.components = {{"Toolbar", {0, 0, 1080, 160}}, {"Text", {240, 1100, 840, 1200}}};
    s.description = "App launch";
    s.goal = "Wait for the app to open";
    s.ui_class = "Launch";
    s.bullets = {"Toolbar with app name", "Text 'Loading your feed'"};
    return s;
}

inline Screen screen_crash() {
    Screen s;
    s.components = {{"Modal", {90, 900, 990, 1400}}, {"Text", {140, 960, 940, 1040}},
                    {"TextButton", {600, 1280, 940, 1360}}};
    s.flags[std::string(kErrorBanner)] = "App keeps stopping";
    s.flags[std::string(kCrashDialog)] = "App keeps stopping";
    s.description = "Crash dialog over the app";
    s.goal = "Dismiss 'App keeps stopping'";
    s.ui_class = "Crash dialog";
    s.bullets = {"Modal 'App keeps stopping'", "TextButton 'Close app'"};
    return s;
}

inline json screen_json(const Screen& s, std::size_t step, std::int64_t ts, FixtureRng& rng) {
    json comps = json::array();
    for (const auto& [kind, bb] : s.components)
        comps.push_back({{"kind", kind},
                         {"bbox", {bb[0], bb[1], bb[2], bb[3]}},
                         {"confidence", std::round(rng.uniform(0.85, 0.99) * 100.0) / 100.0}});
    json ind = json::object();
    json ev = json::object();
    json texts = json::array();
    for (const auto& [flag, text] : s.flags) {
        ind[flag] = true;
        if (text.empty()) {
            ev[flag] = {{"bbox", {500, 2120, 580, 2190}}};
        } else {
            ev[flag] = {{"text", text}};
            texts.push_back(text);
        }
    }
    if (!s.media.empty()) ind[std::string(kMediaPlaying)] = s.media;
    if (!texts.empty()) ind["indicator_texts"] = texts;
    if (!ev.empty()) ind["evidence"] = ev;
    return {{"components", comps},
            {"state_indicators", ind},
            {"screen_summary",
             {{"description", s.description},
              {"primary_goal", s.goal},
              {"evidence_bullets", s.bullets},
              {"ui_class", s.ui_class}}},
            {"step", step},
            {"timestamp_ms", ts}};
}

struct MemState {
    double pss = 80000, heap_alloc = 20000, heap_size = 40000, swap = 0;
    double local_binders = 12, proxy_binders = 30, parcels = 4, webviews = 0, views = 120, vri = 2;
};

inline std::string meminfo_text(const MemState& m, const std::string& pkg) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(0);
    o << "Applications Memory Usage (in Kilobytes):\n";
    o << "** MEMINFO in pid 4242 [" << pkg << "] **\n";
    o << " App Summary\n";
    o << "           TOTAL PSS: " << m.pss << "\n";
    o << "           HeapAlloc: " << m.heap_alloc << "\n";
    o << "            HeapSize: " << m.heap_size << "\n";
    o << "        SwapPssDirty: " << m.swap << "\n";
    o << " Objects\n";
    o << "               Views: " << m.views << "         ViewRootImpl: " << m.vri << "\n";
    o << "       Local Binders: " << m.local_binders << "        Proxy Binders: " << m.proxy_binders << "\n";
    o << "        Parcel count: " << m.parcels << "             WebViews: " << m.webviews << "\n";
    return o.str();
}

struct ProcState {
    double cpu = 0.0, mem = 2.0, res_mb = 150, virt_gb = 1.2, shr_mb = 80;
};

inline std::string top_text(const ProcState& p, const std::string& pkg) {
    std::ostringstream o;
    o << "Tasks: 612 total,   1 running, 611 sleeping\n";
    o << "  PID USER         PR  NI VIRT  RES  SHR S[%CPU] %MEM     TIME+ ARGS\n";
    o << std::fixed;
    o << " 4242 u0_a123      10 -10 " << std::setprecision(1) << p.virt_gb << "G " << std::setprecision(0)
      << p.res_mb << "M " << p.shr_mb << "M S " << std::setprecision(1) << p.cpu << ' ' << p.mem
      << " 0:12.34 " << pkg << "\n";
    o << " 1001 system       18  -2 4.1G 210M 120M S 1.0 4.0 9:01.00 system_server\n";
    return o.str();
}

struct Flow {
    std::string src, dst;
    int sport, dport;
    std::uint64_t bytes = 0;
    bool malicious = false;
};

inline std::string flows_text(const std::vector<Flow>& flows) {
    std::ostringstream o;
    o << "src_ip,dst_ip,src_port,dst_port,cumulative_bytes,malicious\n";
    for (const auto& f : flows)
        o << f.src << ',' << f.dst << ',' << f.sport << ',' << f.dport << ',' << f.bytes << ','
          << (f.malicious ? 1 : 0) << '\n';
    return o.str();
}

inline json http_get(std::int64_t ts, double size, std::optional<double> entropy, int id, bool cdn) {
    json j{{"method", "GET"},
           {"status", 200},
           {"headers_present", {"Host", "User-Agent", "Accept"}},
           {"body_size", std::round(size)},
           {"registrable_origin", cdn ? "fastimg-cdn.net" : "example.com"},
           {"is_third_party", cdn},
           {"tracker_match", false},
           {"reputation", 1.0},
           {"in_flight", false},
           {"request_id", "r" + std::to_string(id)},
           {"timestamp_ms", ts}};
    if (entropy) j["body_entropy"] = *entropy;
    return j;
}

inline json http_exfil(std::int64_t ts, double size, int id) {
    return {{"method", "POST"},
            {"status", 200},
            {"headers_present", {"Host", "Content-Length"}},
            {"body_size", std::round(size)},
            {"registrable_origin", "metrics-collect.io"},
            {"is_third_party", true},
            {"tracker_match", true},
            {"reputation", 0.1},
            {"in_flight", false},
            {"request_id", "x" + std::to_string(id)},
            {"timestamp_ms", ts}};
}

// 1x1 transparent PNG.
inline constexpr char kPlaceholderPngBytes[] =
    "\x89PNG\r\n\x1a\n\0\0\0\rIHDR\0\0\0\x01\0\0\0\x01\x08\x06\0\0\0\x1f\x15\xc4\x89\0\0\0\rIDATx\x9c"
    "c\xf8\x0f\0\0\x01\x01\0\x05\x18\xd8N\0\0\0\0IEND\xae\x42\x60\x82";
inline const std::string kPlaceholderPng(kPlaceholderPngBytes, sizeof kPlaceholderPngBytes - 1);

}  // namespace detail

/// Writes a complete bundle under `out_dir`; identical (kind, seed, options) give identical bytes.
inline FixtureSummary gen_fixture(FixtureKind kind, const std::string& out_dir, std::uint64_t seed,
                                  const FixtureOptions& opt = {}) {
    namespace fs = std::filesystem;
    using namespace detail;
    FixtureRng rng(seed);
    FixtureSummary summary;
    summary.steps = opt.steps;

    const fs::path root(out_dir);
    fs::create_directories(root / "steps");
    fs::create_directories(root / "providers");
    write_text(root / "meta.json", json{{"format_version", kFormatVersion},
                                        {"package", opt.package},
                                        {"dt_seconds", opt.dt_seconds},
                                        {"cores", opt.cores}}
                                       .dump(2) + "\n");

    MemState mem;
    ProcState proc;
    std::vector<Flow> flows;
    int req_id = 0;
    const std::size_t exfil_start = 3;
    auto is_crash = [&](std::size_t i) {
        if (kind != FixtureKind::CrashBurst) return false;
        const std::size_t period = 20;
        return i >= 10 && i % period >= 10 && i % period <= 12;
    };

    if (kind == FixtureKind::BenignHeavy || kind == FixtureKind::CrashBurst) {
        flows = {{"10.0.2.15", "93.184.216.34", 40000, 443, 0, false},
                 {"10.0.2.15", "151.101.1.69", 40002, 443, 0, false}};
        mem = {180000, 60000, 96000, 0, 20, 60, 10, 1, 400, 3};
        proc = {45.0, 5.0, 300, 2.1, 120};
    } else if (kind == FixtureKind::Exfil) {
        flows = {{"10.0.2.15", "93.184.216.34", 40000, 443, 0, false}};
    }

    for (std::size_t i = 0; i < opt.steps; ++i) {
        const auto ts = static_cast<std::int64_t>(std::llround(static_cast<double>(i) * opt.dt_seconds * 1000.0));
        char name[16];
        std::snprintf(name, sizeof name, "%04zu", i);
        const fs::path dir = root / "steps" / name;
        fs::create_directories(dir);

        const bool crash = is_crash(i);
        if (crash) summary.crash_steps.insert(i);
        Screen screen;
        switch (kind) {
            case FixtureKind::BenignIdle: screen = screen_empty_home(); break;
            case FixtureKind::BenignHeavy: screen = i == 0 ? screen_launch() : screen_feed(); break;
            case FixtureKind::Exfil: screen = screen_converter(); break;
            case FixtureKind::CrashBurst:
                screen = crash ? screen_crash() : (i == 0 ? screen_launch() : screen_feed());
                break;
        }
        write_text(dir / "evidence.json", screen_json(screen, i, ts, rng).dump(2) + "\n");
        write_text(dir / "screenshot.png", kPlaceholderPng);

        std::vector<json> http;
        bool write_flows = !flows.empty();
        switch (kind) {
            case FixtureKind::BenignIdle:
                break;
            case FixtureKind::Exfil:
                // UI is static: memory and CPU stay flat while the upload runs.
                flows[0].bytes += static_cast<std::uint64_t>(rng.integer(200, 600));
                if (i >= exfil_start) {
                    summary.exfil_steps.insert(i);
                    if (flows.size() == 1) flows.push_back({"10.0.2.15", "185.199.110.7", 40100, 443, 0, true});
                    const double chunk = rng.uniform(250000, 320000);
                    flows[1].bytes += static_cast<std::uint64_t>(chunk);
                    const int n = static_cast<int>(rng.integer(3, 4));
                    for (int k = 0; k < n; ++k) http.push_back(http_exfil(ts, chunk / n, ++req_id));
                    // Contact rows are pulled over IPC before upload.
                    mem.proxy_binders += rng.integer(2, 4);
                    mem.parcels += rng.integer(20, 40);
                }
                break;
            case FixtureKind::BenignHeavy:
            case FixtureKind::CrashBurst:
                if (crash) {
                    write_flows = false;
                    mem.pss += rng.uniform(3200, 3800);
                    mem.heap_alloc = std::min(mem.heap_size * 0.99, mem.heap_alloc + rng.uniform(4500, 5500));
                    mem.swap += rng.uniform(350, 450);
                    mem.views += rng.uniform(35, 45);
                    proc.cpu = rng.uniform(250, 270);
                    proc.mem += rng.uniform(0.25, 0.35);
                    proc.res_mb += rng.uniform(7, 9);
                    proc.shr_mb = std::max(20.0, proc.shr_mb - rng.uniform(2, 4));
                } else {
                    for (auto& f : flows) f.bytes += static_cast<std::uint64_t>(rng.uniform(180000, 240000));
                    const int n = static_cast<int>(rng.integer(9, 11));
                    for (int k = 0; k < n; ++k) {
                        std::optional<double> ent;
                        if (k % 2 == 0) ent = rng.uniform(4.5, 5.5);
                        http.push_back(http_get(ts, rng.uniform(30000, 90000), ent, ++req_id, k % 3 == 0));
                    }
                    mem.pss += rng.uniform(1500, 2500);
                    mem.heap_alloc = (i % 6 == 5) ? mem.heap_alloc * 0.7
                                                  : std::min(mem.heap_size * 0.95, mem.heap_alloc + rng.uniform(2500, 3500));
                    mem.swap += rng.uniform(150, 250);
                    mem.local_binders += rng.integer(1, 2);
                    mem.parcels += rng.integer(1, 3);
                    mem.views += rng.uniform(15, 25);
                    proc.cpu = rng.uniform(150, 200);
                    proc.mem = std::min(40.0, proc.mem + rng.uniform(0.1, 0.2));
                    proc.res_mb += rng.uniform(3, 5);
                    proc.shr_mb += rng.uniform(0, 1);
                }
                break;
        }
        write_text(dir / "meminfo.txt", meminfo_text(mem, opt.package));
        write_text(dir / "top.txt", top_text(proc, opt.package));
        if (write_flows) write_text(dir / "flows.csv", flows_text(flows));
        if (!http.empty()) {
            std::string jl;
            for (const auto& h : http) jl += h.dump() + "\n";
            write_text(dir / "http.jsonl", jl);
        }

        double recorded = 0.9;
        if (kind == FixtureKind::Exfil && i >= exfil_start) recorded = 0.3;
        if (crash) recorded = 0.1;
        write_text(root / "providers" / ReplayProvider::step_file(i),
                   json{{"confidence", recorded}, {"completion_tokens", 42}, {"total_tokens", 1337}}.dump(2) + "\n");
    }
    return summary;
}

}  // namespace uixpose
