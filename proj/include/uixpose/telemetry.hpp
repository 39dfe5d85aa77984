#pragma once

/**
 * @file telemetry.hpp
 * @brief Parsers for per-step runtime artifacts (dumpsys meminfo, top rows,
 *        flow snapshots, decoded HTTP records) and the session bundle loader.
 *
 * Bundle layout on disk:
 *
 *   session/meta.json
 *   session/steps/<NNNN>/evidence.json   required
 *   session/steps/<NNNN>/screenshot.png  opaque, passed to providers
 *   session/steps/<NNNN>/meminfo.txt     dumpsys meminfo
 *   session/steps/<NNNN>/top.txt         top rows for the target process
 *   session/steps/<NNNN>/flows.csv       cumulative per-flow bytes
 *   session/steps/<NNNN>/http.jsonl      one decoded HTTP record per line
 *   session/providers/<NNNN>.json        recorded provider responses (optional)
 */

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "uixpose/core.hpp"
#include "uixpose/evidence.hpp"

namespace uixpose {

namespace fs = std::filesystem;

inline constexpr int kFormatVersion = 1;

// ---------------------------------------------------------------------------
// Shared text helpers
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

inline std::vector<std::string> split_char(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline std::optional<double> to_double(std::string_view s) {
    const std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    double v = 0.0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<std::int64_t> to_int(std::string_view s) {
    const std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size()) return std::nullopt;
    return v;
}

/// "180M" -> 184320 (KiB). Bare numbers are already KiB.
inline std::optional<double> to_kib(std::string_view s) {
    std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    double mult = 1.0;
    switch (std::toupper(static_cast<unsigned char>(t.back()))) {
        case 'K': mult = 1.0; t.pop_back(); break;
        case 'M': mult = 1024.0; t.pop_back(); break;
        case 'G': mult = 1024.0 * 1024.0; t.pop_back(); break;
        case 'T': mult = 1024.0 * 1024.0 * 1024.0; t.pop_back(); break;
        default: break;
    }
    auto v = to_double(t);
    if (!v || *v < 0.0) return std::nullopt;
    return *v * mult;
}

inline std::string squash_key(std::string_view s) {
    std::string out;
    for (char c : s)
        if (std::isalnum(static_cast<unsigned char>(c)))
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// dumpsys meminfo
// ---------------------------------------------------------------------------

struct MeminfoSnapshot {
    double pss_total = 0.0;  // KB
    double heap_alloc = 0.0;
    double heap_size = 0.0;
    double swap_pss_dirty = 0.0;
    double local_binders = 0.0;
    double proxy_binders = 0.0;
    double parcel_count = 0.0;
    double webviews = 0.0;
    double views = 0.0;
    double view_root_impl = 0.0;
    std::int64_t timestamp_ms = 0;

    double heap_pressure(double eps = 1e-9) const { return heap_alloc / (heap_size + eps); }
};

struct MeminfoParse {
    MeminfoSnapshot snapshot;
    std::vector<std::string> diagnostics;
};

/**
 * Accepts both the "App Summary"/"Objects" key-value sections
 * ("TOTAL PSS: 120000", "Views: 150  ViewRootImpl: 3") and the per-category
 * table whose TOTAL row carries the Heap Size / Heap Alloc columns.
 * Key-value lines take precedence over table values.
 */
inline MeminfoParse parse_meminfo(std::string_view text, double heap_slack_kb = 4096.0) {
    std::map<std::string, double> kv;
    std::map<std::string, double> table_total;

    static const std::regex pair_re(R"(([A-Za-z][A-Za-z ()]*?)\s*:\s*(-?[0-9]+(?:\.[0-9]+)?))");
    std::istringstream in{std::string(text)};
    std::string line;
    std::vector<std::string> prev_header;
    std::vector<std::string> columns;
    while (std::getline(in, line)) {
        for (auto it = std::sregex_iterator(line.begin(), line.end(), pair_re);
             it != std::sregex_iterator(); ++it) {
            const auto key = detail::squash_key((*it)[1].str());
            if (auto v = detail::to_double((*it)[2].str())) kv[key] = *v;
        }

        auto toks = detail::split_ws(line);
        if (toks.empty()) continue;
        if (toks.front().find_first_not_of('-') == std::string::npos) continue;
        // Two stacked header lines with equal token counts name the table columns.
        const bool header_like = std::none_of(toks.begin(), toks.end(), [](const std::string& t) {
            return detail::to_double(t).has_value();
        });
        if (header_like && line.find(':') == std::string::npos) {
            if (!prev_header.empty() && prev_header.size() == toks.size()) {
                columns.clear();
                for (std::size_t i = 0; i < toks.size(); ++i)
                    columns.push_back(detail::squash_key(prev_header[i] + toks[i]));
            }
            prev_header = toks;
            continue;
        }
        prev_header.clear();
        if (!columns.empty() && toks.front() == "TOTAL" && toks.size() >= columns.size() + 1 &&
            line.find(':') == std::string::npos) {
            for (std::size_t i = 0; i < columns.size(); ++i)
                if (auto v = detail::to_double(toks[i + 1])) table_total[columns[i]] = *v;
        }
    }

    auto pick = [&](std::initializer_list<const char*> kv_keys,
                    std::initializer_list<const char*> table_keys) -> std::optional<double> {
        for (const char* k : kv_keys)
            if (auto it = kv.find(k); it != kv.end()) return it->second;
        for (const char* k : table_keys)
            if (auto it = table_total.find(k); it != table_total.end()) return it->second;
        return std::nullopt;
    };

    MeminfoParse out;
    auto& s = out.snapshot;
    auto pss = pick({"totalpss"}, {"psstotal"});
    auto alloc = pick({"heapalloc"}, {"heapalloc"});
    auto size = pick({"heapsize"}, {"heapsize"});
    std::string missing;
    if (!pss) missing += " PssTotal";
    if (!alloc) missing += " HeapAlloc";
    if (!size) missing += " HeapSize";
    if (!missing.empty()) throw ParseError("meminfo: required field(s) missing:" + missing);
    s.pss_total = *pss;
    s.heap_alloc = *alloc;
    s.heap_size = *size;

    auto optional_counter = [&](double& dst, const char* name,
                                std::initializer_list<const char*> kv_keys,
                                std::initializer_list<const char*> table_keys) {
        if (auto v = pick(kv_keys, table_keys)) {
            dst = *v;
        } else {
            dst = 0.0;
            out.diagnostics.push_back(std::string("meminfo: ") + name + " absent, defaulted to 0");
        }
    };
    optional_counter(s.swap_pss_dirty, "SwapPssDirty", {"swappssdirty", "totalswappss"}, {"swappssdirty"});
    optional_counter(s.local_binders, "LocalBinders", {"localbinders"}, {});
    optional_counter(s.proxy_binders, "ProxyBinders", {"proxybinders"}, {});
    optional_counter(s.parcel_count, "ParcelCount", {"parcelcount"}, {});
    optional_counter(s.webviews, "WebViews", {"webviews"}, {});
    optional_counter(s.views, "Views", {"views"}, {});
    optional_counter(s.view_root_impl, "ViewRootImpl", {"viewrootimpl"}, {});

    for (double* f : {&s.pss_total, &s.heap_alloc, &s.heap_size, &s.swap_pss_dirty, &s.local_binders,
                      &s.proxy_binders, &s.parcel_count, &s.webviews, &s.views, &s.view_root_impl}) {
        if (*f < 0.0) throw ParseError("meminfo: negative counter");
    }
    if (s.heap_alloc > s.heap_size + heap_slack_kb)
        out.diagnostics.push_back("meminfo: HeapAlloc exceeds HeapSize beyond slack");
    return out;
}

// ---------------------------------------------------------------------------
// top
// ---------------------------------------------------------------------------

struct ProcSnapshot {
    double cpu_pct = 0.0;
    double mem_pct = 0.0;
    double res_kb = 0.0;
    double virt_kb = 0.0;
    double shr_kb = 0.0;
    int cores = 1;
    std::int64_t timestamp_ms = 0;

    double cpu_cap_norm() const { return cpu_pct / (100.0 * std::max(cores, 1)); }
};

/// Parses a top listing; picks the row naming `process` (or the first row when empty).
inline ProcSnapshot parse_proc(std::string_view text, int cores, std::string_view process = {}) {
    if (cores < 1) throw ParseError("top: core count must be >= 1");
    std::istringstream in{std::string(text)};
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        auto toks = detail::split_ws(line);
        const bool has_pid = std::find(toks.begin(), toks.end(), "PID") != toks.end();
        const bool has_cpu = line.find("%CPU") != std::string::npos || line.find("CPU%") != std::string::npos;
        if (!has_pid || !has_cpu) continue;
        // toybox top glues the state column onto %CPU: "S[%CPU]".
        for (auto& t : toks) {
            if (t == "S[%CPU]") {
                header.push_back("S");
                header.push_back("%CPU");
            } else if (t == "CPU%") {
                header.push_back("%CPU");
            } else if (t == "MEM%") {
                header.push_back("%MEM");
            } else {
                header.push_back(t);
            }
        }
        break;
    }
    if (header.empty()) throw ParseError("top: no header row with PID and %CPU");

    auto col = [&](std::string_view name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return std::nullopt;
    };
    const auto c_cpu = col("%CPU"), c_mem = col("%MEM"), c_res = col("RES"), c_virt = col("VIRT"),
               c_shr = col("SHR");
    if (!c_cpu || !c_mem || !c_res || !c_virt || !c_shr)
        throw ParseError("top: header lacks one of %CPU %MEM RES VIRT SHR");

    while (std::getline(in, line)) {
        auto toks = detail::split_ws(line);
        if (toks.size() < header.size()) continue;
        if (!detail::to_int(toks[0])) continue;  // not a process row
        if (!process.empty() && line.find(process) == std::string::npos) continue;

        ProcSnapshot p;
        p.cores = cores;
        auto num = [&](std::size_t i, const char* name) {
            auto v = detail::to_double(toks[i]);
            if (!v || *v < 0.0) throw ParseError(std::string("top: malformed ") + name + " '" + toks[i] + "'");
            return *v;
        };
        auto kib = [&](std::size_t i, const char* name) {
            auto v = detail::to_kib(toks[i]);
            if (!v) throw ParseError(std::string("top: malformed ") + name + " '" + toks[i] + "'");
            return *v;
        };
        p.cpu_pct = num(*c_cpu, "%CPU");
        p.mem_pct = num(*c_mem, "%MEM");
        p.res_kb = kib(*c_res, "RES");
        p.virt_kb = kib(*c_virt, "VIRT");
        p.shr_kb = kib(*c_shr, "SHR");
        return p;
    }
    throw ParseError(process.empty() ? std::string("top: no process row")
                                     : "top: no row for process '" + std::string(process) + "'");
}

// ---------------------------------------------------------------------------
// Flow snapshots
// ---------------------------------------------------------------------------

struct FlowKey {
    std::string src_ip, dst_ip;
    std::uint32_t src_port = 0, dst_port = 0;

    auto tie() const { return std::tie(src_ip, dst_ip, src_port, dst_port); }
    friend bool operator<(const FlowKey& a, const FlowKey& b) { return a.tie() < b.tie(); }
    friend bool operator==(const FlowKey& a, const FlowKey& b) { return a.tie() == b.tie(); }

    std::string to_string() const {
        return src_ip + ":" + std::to_string(src_port) + "->" + dst_ip + ":" + std::to_string(dst_port);
    }
};

struct FlowRecord {
    std::uint64_t cumulative_bytes = 0;
    bool malicious = false;
};

struct FlowWindow {
    std::map<FlowKey, FlowRecord> flows;
    std::int64_t begin_ms = 0;
    std::int64_t end_ms = 0;
    std::vector<std::string> diagnostics;

    bool empty() const noexcept { return flows.empty(); }
};

inline FlowWindow parse_flow_snapshot(std::string_view csv) {
    FlowWindow w;
    std::istringstream in{std::string(csv)};
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        header = detail::split_char(line, ',');
        break;
    }
    const std::vector<std::string> expected{"src_ip", "dst_ip", "src_port", "dst_port",
                                            "cumulative_bytes", "malicious"};
    if (header != expected)
        throw ParseError("flows.csv: header must be src_ip,dst_ip,src_port,dst_port,cumulative_bytes,malicious");

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        auto f = detail::split_char(line, ',');
        const std::string where = "flows.csv:" + std::to_string(lineno);
        if (f.size() != expected.size()) throw ParseError(where + ": expected 6 fields");
        auto sp = detail::to_int(f[2]);
        auto dp = detail::to_int(f[3]);
        auto bytes = detail::to_int(f[4]);
        if (!sp || !dp || *sp < 0 || *dp < 0 || *sp > 65535 || *dp > 65535)
            throw ParseError(where + ": malformed port");
        if (!bytes || *bytes < 0) throw ParseError(where + ": malformed cumulative_bytes");
        const auto flag = detail::to_lower(f[5]);
        bool mal = false;
        if (flag == "1" || flag == "true") mal = true;
        else if (flag == "0" || flag == "false") mal = false;
        else throw ParseError(where + ": malicious must be 0/1");

        FlowKey key{f[0], f[1], static_cast<std::uint32_t>(*sp), static_cast<std::uint32_t>(*dp)};
        if (w.flows.count(key))
            w.diagnostics.push_back(where + ": duplicate flow " + key.to_string() + ", keeping last");
        w.flows[key] = FlowRecord{static_cast<std::uint64_t>(*bytes), mal};
    }
    return w;
}

struct FlowDeltas {
    std::map<FlowKey, std::uint64_t> per_flow;
    double total_bytes = 0.0;
    double malicious_bytes = 0.0;
    std::vector<std::string> warnings;
};

/// Per-flow byte deltas between successive snapshots. Counters that go backwards are clamped to 0.
class FlowLedger {
public:
    FlowDeltas observe(const FlowWindow& w) {
        FlowDeltas d;
        for (const auto& [key, rec] : w.flows) {
            std::uint64_t delta = rec.cumulative_bytes;
            if (auto it = last_.find(key); it != last_.end()) {
                if (rec.cumulative_bytes < it->second) {
                    d.warnings.push_back("non-monotone cumulative bytes for " + key.to_string() + " (" +
                                         std::to_string(it->second) + " -> " +
                                         std::to_string(rec.cumulative_bytes) + "), delta clamped to 0");
                    delta = 0;
                } else {
                    delta = rec.cumulative_bytes - it->second;
                }
            }
            last_[key] = rec.cumulative_bytes;
            d.per_flow[key] = delta;
            d.total_bytes += static_cast<double>(delta);
            if (rec.malicious) d.malicious_bytes += static_cast<double>(delta);
        }
        return d;
    }

private:
    std::map<FlowKey, std::uint64_t> last_;
};

// ---------------------------------------------------------------------------
// HTTP records
// ---------------------------------------------------------------------------

struct HttpRecord {
    std::string method;
    std::optional<int> status;
    std::set<std::string> headers_present;
    double body_size = 0.0;
    std::optional<double> body_entropy;  // bits/byte; only for decodable payloads
    std::string registrable_origin;
    bool is_third_party = false;
    bool tracker_match = false;
    double reputation = 1.0;  // 1 = trusted endpoint
    bool in_flight = false;
    std::optional<std::string> request_id;
    std::int64_t timestamp_ms = 0;
};

inline HttpRecord http_record_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("http record must be an object");
    HttpRecord r;
    auto req = [&](const char* k) -> const json& {
        if (!j.contains(k)) throw ParseError(std::string("http record missing '") + k + "'");
        return j.at(k);
    };
    try {
        r.method = req("method").get<std::string>();
        if (j.contains("status") && !j["status"].is_null()) r.status = j["status"].get<int>();
        if (j.contains("headers_present"))
            for (const auto& h : j["headers_present"]) r.headers_present.insert(h.get<std::string>());
        r.body_size = req("body_size").get<double>();
        if (j.contains("body_entropy") && !j["body_entropy"].is_null())
            r.body_entropy = j["body_entropy"].get<double>();
        r.registrable_origin = j.value("registrable_origin", std::string{});
        r.is_third_party = j.value("is_third_party", false);
        r.tracker_match = j.value("tracker_match", false);
        r.reputation = j.value("reputation", 1.0);
        r.in_flight = j.value("in_flight", false);
        if (j.contains("request_id") && j["request_id"].is_string())
            r.request_id = j["request_id"].get<std::string>();
        r.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
    } catch (const json::exception& e) {
        throw ParseError(std::string("http record: ") + e.what());
    }
    if (!(r.body_size >= 0.0)) throw ParseError("http record: body_size must be >= 0");
    if (r.body_entropy && !(*r.body_entropy >= 0.0 && *r.body_entropy <= 8.0))
        throw ParseError("http record: body_entropy must lie in [0,8]");
    if (!(r.reputation >= 0.0 && r.reputation <= 1.0))
        throw ParseError("http record: reputation must lie in [0,1]");
    return r;
}

inline json to_json(const HttpRecord& r) {
    json j{{"method", r.method},
           {"headers_present", r.headers_present},
           {"body_size", r.body_size},
           {"registrable_origin", r.registrable_origin},
           {"is_third_party", r.is_third_party},
           {"tracker_match", r.tracker_match},
           {"reputation", r.reputation},
           {"in_flight", r.in_flight},
           {"timestamp_ms", r.timestamp_ms}};
    j["status"] = r.status ? json(*r.status) : json(nullptr);
    if (r.body_entropy) j["body_entropy"] = *r.body_entropy;
    if (r.request_id) j["request_id"] = *r.request_id;
    return j;
}

/// Newline-delimited registrable domains; a record matches on the domain or any parent.
class TrackerList {
public:
    static TrackerList parse(std::string_view text) {
        TrackerList t;
        std::istringstream in{std::string(text)};
        std::string line;
        while (std::getline(in, line)) {
            auto d = detail::to_lower(detail::trim(line));
            if (d.empty() || d[0] == '#') continue;
            t.domains_.insert(d);
        }
        return t;
    }

    bool matches(std::string_view origin) const {
        std::string d = detail::to_lower(origin);
        while (!d.empty()) {
            if (domains_.count(d)) return true;
            auto dot = d.find('.');
            if (dot == std::string::npos) break;
            d = d.substr(dot + 1);
        }
        return false;
    }

    std::size_t size() const noexcept { return domains_.size(); }

private:
    std::set<std::string> domains_;
};

struct HttpParse {
    std::vector<HttpRecord> records;
    std::vector<std::string> diagnostics;
};

/// One record per line; bad lines are dropped with a diagnostic.
inline HttpParse parse_http_jsonl(std::string_view text, const TrackerList* trackers = nullptr) {
    HttpParse out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        try {
            auto r = http_record_from_json(json::parse(line));
            if (trackers && trackers->matches(r.registrable_origin)) r.tracker_match = true;
            out.records.push_back(std::move(r));
        } catch (const std::exception& e) {
            out.diagnostics.push_back("http.jsonl:" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Session bundle
// ---------------------------------------------------------------------------

struct SessionMeta {
    int format_version = kFormatVersion;
    std::string package;
    std::optional<double> dt_seconds;
    int cores = 1;
};

struct StepBundle {
    std::size_t index = 0;
    std::int64_t timestamp_ms = 0;
    EvidencePack evidence;
    std::string screenshot;  // path; may not exist
    std::optional<FlowWindow> flows;
    std::vector<HttpRecord> http;
    std::optional<MeminfoSnapshot> meminfo;
    std::optional<ProcSnapshot> proc;
    std::vector<std::string> diagnostics;
};

struct SessionBundle {
    std::string root;
    SessionMeta meta;
    double dt_seconds = 5.0;
    std::vector<StepBundle> steps;
};

struct LoadOptions {
    std::optional<double> dt_seconds;  // overrides meta and inference
    std::optional<int> cores;
    std::optional<TrackerList> trackers;
    ValidationOptions validation;
    bool require_evidence = true;
    double default_dt_seconds = 5.0;
};

inline double median_gap_seconds(const std::vector<StepBundle>& steps) {
    std::vector<double> gaps;
    for (std::size_t i = 1; i < steps.size(); ++i)
        gaps.push_back(static_cast<double>(steps[i].timestamp_ms - steps[i - 1].timestamp_ms) / 1000.0);
    if (gaps.empty()) return 0.0;
    std::sort(gaps.begin(), gaps.end());
    const auto n = gaps.size();
    return n % 2 ? gaps[n / 2] : 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]);
}

inline SessionMeta load_session_meta(const fs::path& root) {
    SessionMeta m;
    const auto p = root / "meta.json";
    if (!fs::exists(p)) return m;
    json j;
    try {
        j = json::parse(read_text_file(p.string()));
    } catch (const json::exception& e) {
        throw LoadError("meta.json: " + std::string(e.what()));
    }
    try {
        m.format_version = j.value("format_version", kFormatVersion);
        m.package = j.value("package", std::string{});
        if (j.contains("dt_seconds") && !j["dt_seconds"].is_null()) m.dt_seconds = j["dt_seconds"].get<double>();
        m.cores = j.value("cores", 1);
    } catch (const json::exception& e) {
        throw LoadError("meta.json: " + std::string(e.what()));
    }
    if (m.format_version != kFormatVersion)
        throw LoadError("meta.json: unsupported format_version " + std::to_string(m.format_version));
    if (m.cores < 1) throw LoadError("meta.json: cores must be >= 1");
    if (m.dt_seconds && !(*m.dt_seconds > 0.0)) throw LoadError("meta.json: dt_seconds must be > 0");
    return m;
}

/// Loads and time-orders a session directory. Telemetry parse failures degrade to absent pieces.
inline SessionBundle load_session(const std::string& dir, const LoadOptions& opts = {}) {
    const fs::path root(dir);
    if (!fs::is_directory(root)) throw LoadError("session directory '" + dir + "' does not exist");

    SessionBundle bundle;
    bundle.root = root.string();
    bundle.meta = load_session_meta(root);
    const int cores = opts.cores.value_or(bundle.meta.cores);

    std::vector<std::pair<std::size_t, fs::path>> step_dirs;
    const auto steps_root = root / "steps";
    if (fs::is_directory(steps_root)) {
        for (const auto& entry : fs::directory_iterator(steps_root)) {
            if (!entry.is_directory()) continue;
            const auto name = entry.path().filename().string();
            if (name.empty() || !std::all_of(name.begin(), name.end(), ::isdigit)) continue;
            step_dirs.emplace_back(std::stoull(name), entry.path());
        }
    }
    if (step_dirs.empty()) throw LoadError("session '" + dir + "' contains no steps");
    std::sort(step_dirs.begin(), step_dirs.end());

    const double meta_dt = opts.dt_seconds.value_or(bundle.meta.dt_seconds.value_or(opts.default_dt_seconds));
    for (const auto& [index, path] : step_dirs) {
        StepBundle step;
        step.index = index;
        const auto ev_path = path / "evidence.json";
        if (fs::exists(ev_path)) {
            try {
                step.evidence = load_evidence_file(ev_path.string(), opts.validation);
            } catch (const Error& e) {
                throw LoadError("step " + std::to_string(index) + ": " + e.what());
            }
        } else if (opts.require_evidence) {
            throw LoadError("step " + std::to_string(index) + " has no evidence.json");
        }
        step.evidence.step = index;
        step.timestamp_ms = step.evidence.timestamp_ms != 0 || index == step_dirs.front().first
                                ? step.evidence.timestamp_ms
                                : static_cast<std::int64_t>(std::llround(static_cast<double>(index) * meta_dt * 1000.0));
        step.evidence.timestamp_ms = step.timestamp_ms;
        step.screenshot = (path / "screenshot.png").string();

        auto piece = [&](const char* file, auto&& fn) {
            const auto p = path / file;
            if (!fs::exists(p)) return;
            try {
                fn(read_text_file(p.string()));
            } catch (const Error& e) {
                step.diagnostics.push_back(std::string(file) + ": " + e.what());
            }
        };
        piece("meminfo.txt", [&](const std::string& t) {
            auto m = parse_meminfo(t);
            m.snapshot.timestamp_ms = step.timestamp_ms;
            step.meminfo = m.snapshot;
            for (auto& d : m.diagnostics) step.diagnostics.push_back(std::move(d));
        });
        piece("top.txt", [&](const std::string& t) {
            auto p = parse_proc(t, cores, bundle.meta.package);
            p.timestamp_ms = step.timestamp_ms;
            step.proc = p;
        });
        piece("flows.csv", [&](const std::string& t) {
            auto w = parse_flow_snapshot(t);
            w.end_ms = step.timestamp_ms;
            for (auto& d : w.diagnostics) step.diagnostics.push_back(d);
            step.flows = std::move(w);
        });
        piece("http.jsonl", [&](const std::string& t) {
            auto h = parse_http_jsonl(t, opts.trackers ? &*opts.trackers : nullptr);
            step.http = std::move(h.records);
            for (auto& d : h.diagnostics) step.diagnostics.push_back(std::move(d));
        });
        bundle.steps.push_back(std::move(step));
    }

    for (std::size_t i = 1; i < bundle.steps.size(); ++i) {
        if (bundle.steps[i].timestamp_ms <= bundle.steps[i - 1].timestamp_ms)
            throw LoadError("timestamps not strictly increasing at step " +
                            std::to_string(bundle.steps[i].index));
        if (bundle.steps[i].flows) bundle.steps[i].flows->begin_ms = bundle.steps[i - 1].timestamp_ms;
    }

    if (opts.dt_seconds) bundle.dt_seconds = *opts.dt_seconds;
    else if (bundle.meta.dt_seconds) bundle.dt_seconds = *bundle.meta.dt_seconds;
    else if (bundle.steps.size() > 1) bundle.dt_seconds = median_gap_seconds(bundle.steps);
    else bundle.dt_seconds = opts.default_dt_seconds;
    if (!(bundle.dt_seconds > 0.0)) throw LoadError("could not determine a positive sampling interval");
    return bundle;
}

}  // namespace uixpose
