#pragma once

/**
 * @file channels.hpp
 * @brief Per-step evidence extractors projecting telemetry onto (net, mem, res).
 *
 *   HChannel  network flows + decoded HTTP records
 *   MChannel  dumpsys meminfo counters
 *   RChannel  scheduler-side process telemetry (top)
 *
 * Every extractor owns its StreamStats and is fed steps strictly in order.
 */

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "uixpose/core.hpp"
#include "uixpose/stream_stats.hpp"
#include "uixpose/telemetry.hpp"

namespace uixpose {

enum class ChannelId { H, M, R };

inline std::string_view channel_name(ChannelId c) noexcept {
    switch (c) {
        case ChannelId::H: return "H";
        case ChannelId::M: return "M";
        case ChannelId::R: return "R";
    }
    return "?";
}

struct ChannelEvidence {
    ChannelId channel = ChannelId::H;
    std::size_t step = 0;
    Vec3 s;
    bool mask = false;  // false => s is the zero vector
    std::map<std::string, double> terms;  // diagnostic breakdown

    static ChannelEvidence masked(ChannelId c, std::size_t step) {
        ChannelEvidence e;
        e.channel = c;
        e.step = step;
        return e;
    }
};

// ---------------------------------------------------------------------------
// H channel
// ---------------------------------------------------------------------------

/// Reference tables for message-level metadata scoring.
struct HttpBaselines {
    std::map<std::string, double> method_freq;                   // relative frequency
    std::map<std::string, std::set<std::string>> expected_headers;  // per method, lower-case

    static HttpBaselines defaults() {
        HttpBaselines b;
        b.method_freq = {{"GET", 0.62},  {"POST", 0.30},   {"PUT", 0.03},   {"HEAD", 0.02},
                         {"DELETE", 0.01}, {"PATCH", 0.01}, {"OPTIONS", 0.01}};
        b.expected_headers["*"] = {"host", "user-agent", "accept"};
        b.expected_headers["POST"] = {"host", "user-agent", "accept", "content-type", "content-length"};
        b.expected_headers["PUT"] = {"host", "user-agent", "accept", "content-type", "content-length"};
        b.expected_headers["PATCH"] = {"host", "user-agent", "accept", "content-type", "content-length"};
        return b;
    }

    /// method<TAB>frequency per line; '#' comments.
    static std::map<std::string, double> parse_method_freq(std::string_view text) {
        std::map<std::string, double> out;
        std::istringstream in{std::string(text)};
        std::string line;
        while (std::getline(in, line)) {
            auto t = detail::trim(line);
            if (t.empty() || t[0] == '#') continue;
            auto f = detail::split_ws(t);
            if (f.size() != 2) throw ParseError("method table: expected 'METHOD<TAB>freq': " + t);
            auto v = detail::to_double(f[1]);
            if (!v || *v < 0.0) throw ParseError("method table: bad frequency in: " + t);
            out[f[0]] = *v;
        }
        return out;
    }

    /// method<TAB>comma-separated header names per line; '*' is the fallback row.
    static std::map<std::string, std::set<std::string>> parse_expected_headers(std::string_view text) {
        std::map<std::string, std::set<std::string>> out;
        std::istringstream in{std::string(text)};
        std::string line;
        while (std::getline(in, line)) {
            auto t = detail::trim(line);
            if (t.empty() || t[0] == '#') continue;
            auto f = detail::split_ws(t);
            if (f.size() != 2) throw ParseError("header table: expected 'METHOD<TAB>h1,h2': " + t);
            auto& set = out[f[0]];
            for (auto& h : detail::split_char(f[1], ','))
                if (!h.empty()) set.insert(detail::to_lower(h));
        }
        return out;
    }

    static HttpBaselines load(const std::string& data_dir) {
        HttpBaselines b;
        b.method_freq = parse_method_freq(read_text_file(data_dir + "/http_method_freq.tsv"));
        b.expected_headers = parse_expected_headers(read_text_file(data_dir + "/expected_headers.tsv"));
        return b;
    }

    double method_rarity(const std::string& method) const {
        double top = 0.0;
        for (const auto& [_, f] : method_freq) top = std::max(top, f);
        auto it = method_freq.find(method);
        if (it == method_freq.end() || top <= 0.0) return 1.0;
        return clip01(1.0 - it->second / top);
    }

    double header_atypicality(const HttpRecord& r) const {
        auto it = expected_headers.find(r.method);
        if (it == expected_headers.end()) it = expected_headers.find("*");
        if (it == expected_headers.end() || it->second.empty()) return 0.0;
        std::set<std::string> present;
        for (const auto& h : r.headers_present) present.insert(detail::to_lower(h));
        std::size_t missing = 0;
        for (const auto& h : it->second)
            if (!present.count(h)) ++missing;
        return static_cast<double>(missing) / static_cast<double>(it->second.size());
    }

    static double status_deviation(const HttpRecord& r) {
        if (!r.status) return 0.0;
        const int cls = *r.status / 100;
        if (cls == 2 || cls == 3) return 0.0;
        if (cls == 4) return 0.5;
        return 1.0;
    }
};

struct HChannelConfig {
    double w_b = 0.25, w_r = 0.15, w_f = 0.10, w_x = 0.10, w_e = 0.15, w_t = 0.10, w_m = 0.15;
    double kappa_l = 0.15, kappa_p = 0.15, kappa_h = 0.20;
    double max_mem = 0.35, max_res = 0.30;
    std::size_t min_samples = 1;
    double large_payload_bytes = 65536.0;
    double backlog_expiry_steps = 3.0;  // expiry = this * dt
    // Message metadata score: rarity, header atypicality, status-class deviation.
    double msg_w_method = 0.4, msg_w_header = 0.3, msg_w_status = 0.3;

    std::vector<std::string> check() const {
        std::vector<std::string> issues;
        for (auto [k, v] : {std::pair{"w_b", w_b}, {"w_r", w_r}, {"w_f", w_f}, {"w_x", w_x}, {"w_e", w_e},
                            {"w_t", w_t}, {"w_m", w_m}, {"kappa_l", kappa_l}, {"kappa_p", kappa_p},
                            {"kappa_h", kappa_h}})
            if (!(v >= 0.0) || !std::isfinite(v)) issues.push_back(std::string("channels.h.") + k + " must be finite and >= 0");
        if (!(max_mem > 0.0 && max_mem <= 1.0)) issues.push_back("channels.h.max_mem must lie in (0,1]");
        if (!(max_res > 0.0 && max_res <= 1.0)) issues.push_back("channels.h.max_res must lie in (0,1]");
        return issues;
    }
};

/// Raw per-step H precursors before smoothing.
struct HRates {
    double bytes = 0, requests = 0, failures = 0, cross_domain = 0, reputation_risk = 0, tracker_density = 0,
           entropy_proxy = 0, large_share = 0, backlog = 0, malicious_bytes = 0;
};

class HChannel {
public:
    HChannel(HChannelConfig cfg = {}, StreamConfig stream = {}, HttpBaselines baselines = HttpBaselines::defaults())
        : cfg_(cfg), stats_(stream), baselines_(std::move(baselines)) {}

    double message_score(const HttpRecord& r) const {
        return clip01(cfg_.msg_w_method * baselines_.method_rarity(r.method) +
                      cfg_.msg_w_header * baselines_.header_atypicality(r) +
                      cfg_.msg_w_status * HttpBaselines::status_deviation(r));
    }

    /// Derives rates from one window; advances the flow ledger and backlog tracker.
    HRates rates(std::int64_t step_ts, const FlowWindow* window, const std::vector<HttpRecord>& http, double dt,
                 std::vector<std::string>* warnings = nullptr) {
        HRates r;
        if (window) {
            auto d = ledger_.observe(*window);
            r.malicious_bytes = d.malicious_bytes / dt;
            if (warnings)
                for (auto& w : d.warnings) warnings->push_back(std::move(w));
        }
        const double n = static_cast<double>(http.size());
        double bytes = 0, failures = 0, third = 0, risk = 0, trackers = 0, entropy = 0, large = 0;
        for (const auto& rec : http) {
            bytes += rec.body_size;
            if ((rec.status && *rec.status >= 400) || (!rec.status && !rec.in_flight)) failures += 1;
            if (rec.is_third_party) third += 1;
            if (rec.tracker_match) trackers += 1;
            risk += std::max(1.0 - rec.reputation, message_score(rec));
            if (rec.body_entropy) entropy += (*rec.body_entropy / 8.0) * rec.body_size;
            if (rec.body_size >= cfg_.large_payload_bytes) large += 1;
        }
        r.bytes = bytes / dt;
        r.requests = n / dt;
        r.failures = failures / dt;
        r.entropy_proxy = entropy / dt;
        if (n > 0) {
            r.cross_domain = third / n;
            r.tracker_density = trackers / n;
            r.reputation_risk = risk / n;
            r.large_share = large / n;
        }
        r.backlog = update_backlog(step_ts, http, dt);
        return r;
    }

    ChannelEvidence step(std::size_t index, std::int64_t step_ts, const FlowWindow* window,
                         const std::vector<HttpRecord>& http, double dt, std::vector<std::string>* warnings = nullptr) {
        const std::size_t samples = (window ? window->flows.size() : 0) + http.size();
        const HRates r = rates(step_ts, window, http, dt, warnings);
        if (samples < std::max<std::size_t>(cfg_.min_samples, 1)) return ChannelEvidence::masked(ChannelId::H, index);

        ChannelEvidence e;
        e.channel = ChannelId::H;
        e.step = index;
        e.mask = true;
        auto& t = e.terms;
        t["B"] = stats_.smooth_norm("B", r.bytes);
        t["R"] = stats_.smooth_norm("R", r.requests);
        t["F"] = stats_.smooth_norm("F", r.failures);
        t["X"] = stats_.smooth_norm("X", r.cross_domain);
        t["E"] = stats_.smooth_norm("E", r.reputation_risk);
        t["T"] = stats_.smooth_norm("T", r.tracker_density);
        t["M"] = stats_.smooth_norm("M", r.malicious_bytes);
        t["L"] = stats_.smooth_norm("L", r.backlog);
        t["P"] = stats_.smooth_norm("P", r.large_share);
        t["Hproxy"] = stats_.smooth_norm("Hproxy", r.entropy_proxy);

        e.s[Axis::Net] = std::min(cfg_.w_b * t["B"] + cfg_.w_r * t["R"] + cfg_.w_f * t["F"] + cfg_.w_x * t["X"] +
                                      cfg_.w_e * t["E"] + cfg_.w_t * t["T"] + cfg_.w_m * t["M"],
                                  1.0);
        e.s[Axis::Mem] = std::min(cfg_.kappa_l * t["L"] + cfg_.kappa_p * t["P"], cfg_.max_mem);
        e.s[Axis::Res] = std::min(cfg_.kappa_h * t["Hproxy"], cfg_.max_res);
        return e;
    }

    const HChannelConfig& config() const noexcept { return cfg_; }

private:
    double update_backlog(std::int64_t step_ts, const std::vector<HttpRecord>& http, double dt) {
        for (const auto& rec : http) {
            if (rec.in_flight) {
                const std::string id = rec.request_id ? *rec.request_id : "#anon" + std::to_string(anon_++);
                pending_[id] = rec.timestamp_ms ? rec.timestamp_ms : step_ts;
            } else if (rec.request_id) {
                pending_.erase(*rec.request_id);
            }
        }
        const double expiry_ms = cfg_.backlog_expiry_steps * dt * 1000.0;
        std::size_t expired = 0;
        for (auto it = pending_.begin(); it != pending_.end();) {
            if (static_cast<double>(step_ts - it->second) > expiry_ms) {
                ++expired;
                it = pending_.erase(it);
            } else {
                ++it;
            }
        }
        return static_cast<double>(pending_.size() + expired);
    }

    HChannelConfig cfg_;
    StreamStats stats_;
    HttpBaselines baselines_;
    FlowLedger ledger_;
    std::map<std::string, std::int64_t> pending_;
    std::uint64_t anon_ = 0;
};

// ---------------------------------------------------------------------------
// M channel
// ---------------------------------------------------------------------------

struct MChannelConfig {
    std::array<double, 4> alpha{0.30, 0.30, 0.25, 0.15};  // PSS rate, heap rate, heap pressure, swap
    double beta_ipc = 0.15, beta_wv = 0.10;
    double gamma_ui = 0.20;
    double tau_mem = 0.20;
    std::size_t gate_window = 3;  // K
    double eps = 1e-9;

    std::vector<std::string> check() const {
        std::vector<std::string> issues;
        for (double a : alpha)
            if (!(a >= 0.0)) issues.push_back("channels.m.alpha entries must be >= 0");
        if (!(beta_ipc >= 0.0 && beta_wv >= 0.0)) issues.push_back("channels.m.beta_* must be >= 0");
        if (!(gamma_ui >= 0.0)) issues.push_back("channels.m.gamma_ui must be >= 0");
        if (!(tau_mem >= 0.0 && tau_mem <= 1.0)) issues.push_back("channels.m.tau_mem must lie in [0,1]");
        if (gate_window < 1) issues.push_back("channels.m.gate_window must be >= 1");
        if (!(eps > 0.0)) issues.push_back("channels.m.eps must be > 0");
        return issues;
    }
};

struct MRates {
    double pss_rate = 0, heap_rate = 0, heap_pressure = 0, swap = 0, binder_rate = 0, webview_rate = 0, ui_rate = 0;
};

inline MRates meminfo_rates(const MeminfoSnapshot& prev, const MeminfoSnapshot& curr, double dt, double eps) {
    MRates r;
    r.pss_rate = (curr.pss_total - prev.pss_total) / dt;
    r.heap_rate = (curr.heap_alloc - prev.heap_alloc) / dt;
    r.heap_pressure = curr.heap_alloc / (curr.heap_size + eps);
    r.swap = curr.swap_pss_dirty;
    r.binder_rate = ((curr.local_binders + curr.proxy_binders) - (prev.local_binders + prev.proxy_binders)) / dt +
                    (curr.parcel_count - prev.parcel_count) / dt;
    r.webview_rate = (curr.webviews - prev.webviews) / dt;
    r.ui_rate = ((curr.views + curr.view_root_impl) - (prev.views + prev.view_root_impl)) / dt;
    return r;
}

/// Stateful memory-pressure extractor; returns nullopt when the step is skipped.
inline std::optional<ChannelEvidence> m_channel(std::size_t index, const MeminfoSnapshot* prev,
                                                const MeminfoSnapshot* curr, double dt, const MChannelConfig& cfg,
                                                StreamStats& stats) {
    if (!prev || !curr || !(dt > 0.0)) return std::nullopt;
    const MRates r = meminfo_rates(*prev, *curr, dt, cfg.eps);

    ChannelEvidence e;
    e.channel = ChannelId::M;
    e.step = index;
    e.mask = true;
    auto& t = e.terms;
    t["pss_rate"] = stats.smooth_norm("pss_rate", r.pss_rate);
    t["heap_rate"] = stats.smooth_norm("heap_rate", r.heap_rate);
    t["heap_pressure"] = stats.norm("heap_pressure", r.heap_pressure);
    t["swap"] = stats.smooth_norm("swap", r.swap);
    const double raw = clip01(cfg.alpha[0] * t["pss_rate"] + cfg.alpha[1] * t["heap_rate"] +
                              cfg.alpha[2] * t["heap_pressure"] + cfg.alpha[3] * t["swap"]);
    const double ubar = stats.mean("raw_mem_gate", stats.ewma("raw_mem", raw), cfg.gate_window);
    t["raw_mem"] = raw;
    t["gate_mean"] = ubar;
    t["gate_open"] = ubar >= cfg.tau_mem ? 1.0 : 0.0;

    t["binder"] = stats.smooth_norm("binder", r.binder_rate);
    t["webview"] = stats.smooth_norm("webview", r.webview_rate);
    t["ui"] = stats.smooth_norm("ui", r.ui_rate);

    e.s[Axis::Net] = std::min(1.0, cfg.beta_ipc * t["binder"] + cfg.beta_wv * t["webview"]);
    e.s[Axis::Mem] = ubar >= cfg.tau_mem ? raw : 0.0;
    e.s[Axis::Res] = std::min(1.0, cfg.gamma_ui * t["ui"]);
    return e;
}

class MChannel {
public:
    MChannel(MChannelConfig cfg = {}, StreamConfig stream = {}) : cfg_(cfg), stats_(stream) {}

    /// Missing snapshots skip the step; the next present snapshot pairs with the last seen one.
    ChannelEvidence step(std::size_t index, const std::optional<MeminfoSnapshot>& curr, double dt) {
        if (!curr) return ChannelEvidence::masked(ChannelId::M, index);
        std::optional<ChannelEvidence> e;
        if (prev_) {
            double elapsed = static_cast<double>(curr->timestamp_ms - prev_->timestamp_ms) / 1000.0;
            if (!(elapsed > 0.0)) elapsed = dt;
            e = m_channel(index, &*prev_, &*curr, elapsed, cfg_, stats_);
        }
        prev_ = curr;
        return e ? *e : ChannelEvidence::masked(ChannelId::M, index);
    }

private:
    MChannelConfig cfg_;
    StreamStats stats_;
    std::optional<MeminfoSnapshot> prev_;
};

// ---------------------------------------------------------------------------
// R channel
// ---------------------------------------------------------------------------

struct RChannelConfig {
    double gamma_1 = 0.8, gamma_2 = 0.2;
    std::array<double, 4> alpha{0.30, 0.30, 0.25, 0.15};  // MEM% rate, RES rate, MEM% level, SHR shrink
    double tau_mem = 0.20;
    std::size_t gate_window = 3;

    std::vector<std::string> check() const {
        std::vector<std::string> issues;
        if (!(gamma_1 >= 0.0 && gamma_2 >= 0.0)) issues.push_back("channels.r.gamma must be >= 0");
        for (double a : alpha)
            if (!(a >= 0.0)) issues.push_back("channels.r.alpha entries must be >= 0");
        if (!(tau_mem >= 0.0 && tau_mem <= 1.0)) issues.push_back("channels.r.tau_mem must lie in [0,1]");
        if (gate_window < 1) issues.push_back("channels.r.gate_window must be >= 1");
        return issues;
    }
};

/// Compute and memory-corroborator projections. The network component is always 0.
inline ChannelEvidence r_channel(std::size_t index, const ProcSnapshot* prev, const ProcSnapshot& curr, double dt,
                                 const RChannelConfig& cfg, StreamStats& stats) {
    ChannelEvidence e;
    e.channel = ChannelId::R;
    e.step = index;
    e.mask = true;
    auto& t = e.terms;

    t["cpu_cap_norm"] = curr.cpu_cap_norm();
    t["cpu_level"] = stats.norm("cpu_cap", t["cpu_cap_norm"]);
    t["cpu_z"] = stats.zabs("cpu_pct", curr.cpu_pct);
    e.s[Axis::Res] = clip01(cfg.gamma_1 * t["cpu_level"] + cfg.gamma_2 * t["cpu_z"]);

    double mem_rate = 0.0, res_rate = 0.0, shr_shrink = 0.0;
    if (prev && dt > 0.0) {
        mem_rate = (curr.mem_pct - prev->mem_pct) / dt;
        res_rate = (curr.res_kb - prev->res_kb) / dt;
        shr_shrink = std::max(0.0, -(curr.shr_kb - prev->shr_kb) / dt);
    }
    t["mem_rate"] = stats.smooth_norm("mem_rate", mem_rate);
    t["res_rate"] = stats.smooth_norm("res_rate", res_rate);
    t["mem_level"] = stats.smooth_norm("mem_level", curr.mem_pct);
    t["shr_shrink"] = stats.smooth_norm("shr_shrink", shr_shrink);
    const double raw = clip01(cfg.alpha[0] * t["mem_rate"] + cfg.alpha[1] * t["res_rate"] +
                              cfg.alpha[2] * t["mem_level"] + cfg.alpha[3] * t["shr_shrink"]);
    const double vbar = stats.mean("raw_mem_gate", stats.ewma("raw_mem", raw), cfg.gate_window);
    t["raw_mem"] = raw;
    t["gate_mean"] = vbar;
    e.s[Axis::Mem] = vbar >= cfg.tau_mem ? raw : 0.0;
    e.s[Axis::Net] = 0.0;
    return e;
}

class RChannel {
public:
    RChannel(RChannelConfig cfg = {}, StreamConfig stream = {}) : cfg_(cfg), stats_(stream) {}

    ChannelEvidence step(std::size_t index, const std::optional<ProcSnapshot>& curr, double dt) {
        if (!curr) return ChannelEvidence::masked(ChannelId::R, index);
        double elapsed = dt;
        if (prev_) {
            elapsed = static_cast<double>(curr->timestamp_ms - prev_->timestamp_ms) / 1000.0;
            if (!(elapsed > 0.0)) elapsed = dt;
        }
        auto e = r_channel(index, prev_ ? &*prev_ : nullptr, *curr, elapsed, cfg_, stats_);
        prev_ = curr;
        return e;
    }

private:
    RChannelConfig cfg_;
    StreamStats stats_;
    std::optional<ProcSnapshot> prev_;
};

}  // namespace uixpose
