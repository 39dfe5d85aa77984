#pragma once

/**
 * @file calibration.hpp
 * @brief Channel hyperparameter derivation from a paired-delta table.
 *
 * Each candidate series is scored against a physical delta by the blended
 * magnitude of its Spearman and Pearson correlations. Candidates that fail
 * Benjamini-Hochberg selection are shrunk to zero; the survivors' strengths
 * are normalised into weights.
 */

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "uixpose/channels.hpp"
#include "uixpose/core.hpp"
#include "uixpose/intent.hpp"
#include "uixpose/telemetry.hpp"

namespace uixpose {

// ---------------------------------------------------------------------------
// Statistics primitives
// ---------------------------------------------------------------------------

/// Average (fractional) ranks, 1-based.
inline std::vector<double> average_ranks(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && xs[idx[j + 1]] == xs[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

/// Percentile rank into [0,1]: (rank - 1) / (n - 1); a singleton maps to 0.5.
inline std::vector<double> rank_normalise(const std::vector<double>& xs) {
    if (xs.size() == 1) return {0.5};
    auto r = average_ranks(xs);
    const double d = static_cast<double>(xs.size()) - 1.0;
    for (auto& v : r) v = (v - 1.0) / d;
    return r;
}

/// Pearson correlation; nullopt when either series is constant.
inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 2) return std::nullopt;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(average_ranks(x), average_ranks(y));
}

/// Two-sided p-value of a correlation coefficient via the t approximation with n-2 dof.
inline double correlation_p_value(double r, std::size_t n) {
    if (n < 3) return 1.0;
    const double ar = std::abs(r);
    if (ar >= 1.0) return 0.0;
    const double dof = static_cast<double>(n) - 2.0;
    const double t = ar * std::sqrt(dof / (1.0 - ar * ar));
    boost::math::students_t dist(dof);
    return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, t)), 0.0, 1.0);
}

struct Strength {
    double strength = 0.0;
    double p_value = 1.0;
    double pearson = 0.0;
    double spearman = 0.0;
};

/**
 * strength = (|rho_s| + |rho_p|) / 2. The p-value comes from the stronger
 * coefficient, doubled (Bonferroni over the two coefficients that were
 * compared) so that picking the larger one does not inflate false positives.
 */
inline Strength blended_strength(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw Error("blended_strength: series lengths differ");
    if (x.size() < 3) throw Error("blended_strength: need at least 3 observations");
    Strength s;
    auto p = pearson(x, y);
    auto r = spearman(x, y);
    if (!p || !r) return s;
    s.pearson = *p;
    s.spearman = *r;
    s.strength = 0.5 * (std::abs(*p) + std::abs(*r));
    const double stronger = std::abs(*p) >= std::abs(*r) ? *p : *r;
    s.p_value = std::min(1.0, 2.0 * correlation_p_value(stronger, x.size()));
    return s;
}

/// Benjamini-Hochberg step-up: rejects the k smallest p-values for the largest k with p_(k) <= k q / m.
inline std::vector<bool> bh_select(const std::vector<double>& p, double q) {
    const std::size_t m = p.size();
    std::vector<bool> reject(m, false);
    if (m == 0) return reject;
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::size_t k = 0;
    for (std::size_t i = 1; i <= m; ++i)
        if (p[order[i - 1]] <= static_cast<double>(i) / static_cast<double>(m) * q) k = i;
    for (std::size_t i = 0; i < k; ++i) reject[order[i]] = true;
    return reject;
}

/// Scales so the entries sum to 1; all-zero input stays zero.
inline std::vector<double> normalise_weights(std::vector<double> w) {
    double s = 0.0;
    for (double v : w) s += v;
    if (s <= 0.0) return w;
    for (auto& v : w) v /= s;
    return w;
}

/// Mean |Pearson| between x and y over lags -max_lag..max_lag.
inline double mean_abs_cross_correlation(const std::vector<double>& x, const std::vector<double>& y,
                                         std::size_t max_lag = 3) {
    const std::size_t n = std::min(x.size(), y.size());
    double acc = 0.0;
    std::size_t cnt = 0;
    const auto L = static_cast<long>(max_lag);
    for (long lag = -L; lag <= L; ++lag) {
        std::vector<double> a, b;
        for (std::size_t i = 0; i < n; ++i) {
            const long j = static_cast<long>(i) + lag;
            if (j < 0 || j >= static_cast<long>(n)) continue;
            a.push_back(x[i]);
            b.push_back(y[static_cast<std::size_t>(j)]);
        }
        if (a.size() < 3) continue;
        acc += std::abs(pearson(a, b).value_or(0.0));
        ++cnt;
    }
    return cnt ? acc / static_cast<double>(cnt) : 0.0;
}

// ---------------------------------------------------------------------------
// Paired-delta table
// ---------------------------------------------------------------------------

/**
 * Column roles (sidecar JSON maps column name -> role):
 *   physical.throughput  physical.memory  physical.traffic_volume
 *   h.requests h.failures h.cross_domain h.reputation h.trackers h.malicious_bytes
 *   m.pss_rate m.heap_rate m.heap_pressure m.swap m.binder m.webview m.ui_churn
 *   r.pss r.heap r.pressure r.swap
 */
struct PairedDeltaTable {
    std::map<std::string, std::vector<double>> columns;
    std::map<std::string, std::string> roles;  // role -> column name

    std::size_t rows() const { return columns.empty() ? 0 : columns.begin()->second.size(); }

    const std::vector<double>* role(const std::string& r) const {
        auto it = roles.find(r);
        if (it == roles.end()) return nullptr;
        auto c = columns.find(it->second);
        return c == columns.end() ? nullptr : &c->second;
    }

    std::vector<std::string> check() const {
        std::vector<std::string> issues;
        const std::size_t n = rows();
        if (n < 3) issues.push_back("table needs at least 3 rows");
        for (const auto& [name, col] : columns)
            if (col.size() != n) issues.push_back("column '" + name + "' has a different length");
        for (const auto& [r, col] : roles)
            if (!columns.count(col)) issues.push_back("role '" + r + "' names missing column '" + col + "'");
        return issues;
    }

    static PairedDeltaTable parse_csv(std::string_view csv) {
        PairedDeltaTable t;
        std::istringstream in{std::string(csv)};
        std::string line;
        std::vector<std::string> header;
        while (std::getline(in, line))
            if (!detail::trim(line).empty()) {
                header = detail::split_char(line, ',');
                break;
            }
        if (header.empty()) throw ParseError("paired-delta table: missing header");
        for (const auto& h : header) t.columns[h];
        std::size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (detail::trim(line).empty()) continue;
            auto f = detail::split_char(line, ',');
            if (f.size() != header.size())
                throw ParseError("paired-delta table line " + std::to_string(lineno) + ": wrong field count");
            for (std::size_t i = 0; i < f.size(); ++i) {
                auto v = detail::to_double(f[i]);
                if (!v) throw ParseError("paired-delta table line " + std::to_string(lineno) + ": bad number '" + f[i] + "'");
                t.columns[header[i]].push_back(*v);
            }
        }
        return t;
    }

    /// Sidecar: {"column": "role", ...}.
    void apply_roles(const json& sidecar) {
        if (!sidecar.is_object()) throw ParseError("roles sidecar must be an object");
        for (auto& [col, role] : sidecar.items()) {
            if (!role.is_string()) throw ParseError("role for column '" + col + "' must be a string");
            roles[role.get<std::string>()] = col;
        }
    }
};

struct SurrogateScore {
    std::string role;
    Strength strength;
    bool present = false;
    bool selected = false;
    double weight = 0.0;
};

struct CalibrationResult {
    std::vector<SurrogateScore> surrogates;
    double spillover = 0.0;
    std::optional<double> baseline_anchor;
    std::vector<std::string> warnings;

    const SurrogateScore* find(const std::string& role) const {
        for (const auto& s : surrogates)
            if (s.role == role) return &s;
        return nullptr;
    }
    double weight(const std::string& role) const {
        auto s = find(role);
        return s ? s->weight : 0.0;
    }
};

struct CalibrationOptions {
    double q = 0.05;
    double spillover_cap = 0.2;
    double handshake_budget = 0.25;
    double churn_cap = 0.20;
    double gate_quantile = 80.0;
    std::size_t cross_lags = 3;
};

namespace detail {

/// Strengths of each present role against `target`, BH-selected; unselected weights are 0.
inline std::vector<SurrogateScore> score_roles(const PairedDeltaTable& t, const std::vector<std::string>& roles,
                                               const std::vector<double>& target, double q) {
    std::vector<SurrogateScore> out;
    std::vector<double> pvals;
    std::vector<std::size_t> present_idx;
    for (const auto& r : roles) {
        SurrogateScore s;
        s.role = r;
        if (const auto* col = t.role(r)) {
            s.present = true;
            s.strength = blended_strength(rank_normalise(*col), target);
            present_idx.push_back(out.size());
            pvals.push_back(s.strength.p_value);
        }
        out.push_back(s);
    }
    const auto rej = bh_select(pvals, q);
    for (std::size_t i = 0; i < present_idx.size(); ++i) out[present_idx[i]].selected = rej[i];
    return out;
}

inline void weights_from_strength(std::vector<SurrogateScore>& s) {
    std::vector<double> raw;
    for (const auto& x : s) raw.push_back(x.selected ? x.strength.strength : 0.0);
    raw = normalise_weights(raw);
    for (std::size_t i = 0; i < s.size(); ++i) s[i].weight = raw[i];
}

}  // namespace detail

inline const std::vector<std::string> kHSurrogates{"h.requests", "h.failures",   "h.cross_domain",
                                                   "h.reputation", "h.trackers", "h.malicious_bytes"};

/// H-channel surrogate weights, spillover multiplier, and traffic-volume anchor.
inline CalibrationResult calibrate_h(const PairedDeltaTable& t, const CalibrationOptions& opt = {}) {
    if (auto issues = t.check(); !issues.empty()) throw Error("calibrate_h: " + issues.front());
    const auto* thr = t.role("physical.throughput");
    if (!thr) throw Error("calibrate_h: table has no physical.throughput column");

    CalibrationResult res;
    res.surrogates = detail::score_roles(t, kHSurrogates, *thr, opt.q);
    detail::weights_from_strength(res.surrogates);

    const bool any = std::any_of(res.surrogates.begin(), res.surrogates.end(),
                                 [](const SurrogateScore& s) { return s.selected; });
    if (!any) {
        std::size_t present = 0;
        for (const auto& s : res.surrogates) present += s.present;
        for (auto& s : res.surrogates) s.weight = s.present && present ? 1.0 / static_cast<double>(present) : 0.0;
        res.warnings.push_back("WARNING: no H surrogate is significant at q=" + std::to_string(opt.q) +
                               "; falling back to uniform weights");
    }

    if (const auto* mem = t.role("physical.memory"))
        res.spillover = opt.spillover_cap * clip01(mean_abs_cross_correlation(*mem, *thr, opt.cross_lags));

    if (const auto* vol = t.role("physical.traffic_volume"); vol && vol->size() >= 4) {
        std::vector<double> now(vol->begin() + 1, vol->end()), lag(vol->begin(), vol->end() - 1);
        res.baseline_anchor = blended_strength(now, lag).strength;
    }
    return res;
}

struct MCalibration {
    CalibrationResult mixture;      // m.pss_rate, m.heap_rate, m.heap_pressure, m.swap
    CalibrationResult handshake;    // m.binder, m.webview
    std::array<double, 4> alpha{};  // after the rate >= level rebalance
    double beta_ipc = 0.0, beta_wv = 0.0;
    double gamma_ui = 0.0;
    double tau_mem = 1.0;
    std::vector<std::string> warnings;
};

/// Enforces sum(rate weights) >= sum(level weights) by scaling the level weights down.
inline std::array<double, 4> rebalance_rates_over_levels(std::array<double, 4> a) {
    const double rates = a[0] + a[1];
    const double levels = a[2] + a[3];
    if (levels > rates && levels > 0.0) {
        const double k = rates / levels;
        a[2] *= k;
        a[3] *= k;
        while (a[2] + a[3] > rates) {
            std::size_t i = a[2] >= a[3] ? 2 : 3;
            a[i] = std::nextafter(a[i], 0.0);
        }
    }
    return a;
}

/// Proportional scale-down so the entries sum to at most `budget`.
inline std::vector<double> cap_total(std::vector<double> w, double budget) {
    double s = 0.0;
    for (double v : w) s += v;
    if (s > budget && s > 0.0)
        for (auto& v : w) v *= budget / s;
    return w;
}

inline MCalibration calibrate_m(const PairedDeltaTable& t, const CalibrationOptions& opt = {}) {
    if (auto issues = t.check(); !issues.empty()) throw Error("calibrate_m: " + issues.front());
    const auto* thr = t.role("physical.throughput");
    const auto* mem = t.role("physical.memory");
    if (!thr || !mem) throw Error("calibrate_m: table needs physical.throughput and physical.memory");

    MCalibration out;
    out.mixture.surrogates =
        detail::score_roles(t, {"m.pss_rate", "m.heap_rate", "m.heap_pressure", "m.swap"}, *mem, opt.q);
    detail::weights_from_strength(out.mixture.surrogates);
    std::array<double, 4> a{};
    for (std::size_t i = 0; i < 4; ++i) a[i] = out.mixture.surrogates[i].weight;
    out.alpha = rebalance_rates_over_levels(a);

    out.handshake.surrogates = detail::score_roles(t, {"m.binder", "m.webview"}, *thr, opt.q);
    std::vector<double> hs;
    for (const auto& s : out.handshake.surrogates) hs.push_back(s.selected ? s.strength.strength : 0.0);
    hs = cap_total(hs, opt.handshake_budget);
    out.beta_ipc = hs[0];
    out.beta_wv = hs[1];
    for (std::size_t i = 0; i < 2; ++i) out.handshake.surrogates[i].weight = hs[i];

    if (const auto* churn = t.role("m.ui_churn")) {
        auto s = blended_strength(rank_normalise(*churn), *mem);
        if (bh_select({s.p_value}, opt.q)[0]) out.gamma_ui = std::min(s.strength, opt.churn_cap);
    }

    const double total = std::accumulate(out.alpha.begin(), out.alpha.end(), 0.0);
    if (total <= 0.0) {
        out.tau_mem = 1.0;  // zero mixture: gate never opens on a zero score
        out.warnings.push_back("no significant memory component; mixture is zero");
    } else {
        std::vector<double> composite(t.rows(), 0.0);
        const std::array<const char*, 4> roles{"m.pss_rate", "m.heap_rate", "m.heap_pressure", "m.swap"};
        for (std::size_t i = 0; i < 4; ++i) {
            const auto* col = t.role(roles[i]);
            if (!col || out.alpha[i] == 0.0) continue;
            const auto rn = rank_normalise(*col);
            for (std::size_t r = 0; r < composite.size(); ++r) composite[r] += out.alpha[i] * rn[r];
        }
        out.tau_mem = clip01(percentile_nearest_rank(composite, opt.gate_quantile));
    }
    return out;
}

inline constexpr std::array<double, 4> kDefaultCorroboratorMix{0.30, 0.30, 0.25, 0.15};

struct RCalibration {
    CalibrationResult mixture;      // r.pss, r.heap, r.pressure, r.swap
    std::array<double, 4> alpha{};
    double tau_mem = 0.2;
    bool used_default = false;
    std::vector<std::string> warnings;
};

inline RCalibration calibrate_r(const PairedDeltaTable& t, const CalibrationOptions& opt = {}) {
    if (auto issues = t.check(); !issues.empty()) throw Error("calibrate_r: " + issues.front());
    const auto* mem = t.role("physical.memory");
    if (!mem) throw Error("calibrate_r: table needs physical.memory");

    RCalibration out;
    const std::array<const char*, 4> roles{"r.pss", "r.heap", "r.pressure", "r.swap"};
    out.mixture.surrogates = detail::score_roles(t, {roles.begin(), roles.end()}, *mem, opt.q);
    detail::weights_from_strength(out.mixture.surrogates);

    const bool any_present = std::any_of(out.mixture.surrogates.begin(), out.mixture.surrogates.end(),
                                         [](const SurrogateScore& s) { return s.present; });
    const bool any_selected = std::any_of(out.mixture.surrogates.begin(), out.mixture.surrogates.end(),
                                          [](const SurrogateScore& s) { return s.selected; });
    if (!any_present || !any_selected) {
        out.alpha = kDefaultCorroboratorMix;
        out.used_default = true;
        out.warnings.push_back(any_present ? "no significant corroborator; using the default distribution"
                                           : "no corroborator columns; using the default distribution");
    } else {
        for (std::size_t i = 0; i < 4; ++i) out.alpha[i] = out.mixture.surrogates[i].weight;
    }

    std::vector<double> composite(t.rows(), 0.0);
    bool any_col = false;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto* col = t.role(roles[i]);
        if (!col) continue;
        any_col = true;
        const auto rn = rank_normalise(*col);
        for (std::size_t r = 0; r < composite.size(); ++r) composite[r] += out.alpha[i] * rn[r];
    }
    if (any_col) out.tau_mem = clip01(percentile_nearest_rank(composite, opt.gate_quantile));
    return out;
}

/// Channel-config fragment in the main config's key namespace.
inline json calibration_fragment(const CalibrationResult& h, const MCalibration& m, const RCalibration& r) {
    json j;
    auto& jh = j["channels"]["h"];
    jh["w_r"] = h.weight("h.requests");
    jh["w_f"] = h.weight("h.failures");
    jh["w_x"] = h.weight("h.cross_domain");
    jh["w_e"] = h.weight("h.reputation");
    jh["w_t"] = h.weight("h.trackers");
    jh["w_m"] = h.weight("h.malicious_bytes");
    jh["kappa_l"] = h.spillover;
    jh["kappa_p"] = h.spillover;
    jh["kappa_h"] = h.spillover;
    auto& jm = j["channels"]["m"];
    jm["alpha"] = m.alpha;
    jm["beta_ipc"] = m.beta_ipc;
    jm["beta_wv"] = m.beta_wv;
    jm["gamma_ui"] = m.gamma_ui;
    jm["tau_mem"] = m.tau_mem;
    auto& jr = j["channels"]["r"];
    jr["alpha"] = r.alpha;
    jr["tau_mem"] = r.tau_mem;
    return j;
}

inline json calibration_report(const CalibrationResult& h, const MCalibration& m, const RCalibration& r) {
    auto dump = [](const CalibrationResult& c) {
        json arr = json::array();
        for (const auto& s : c.surrogates)
            arr.push_back({{"role", s.role},
                           {"present", s.present},
                           {"strength", s.strength.strength},
                           {"p_value", s.strength.p_value},
                           {"selected", s.selected},
                           {"weight", s.weight}});
        return arr;
    };
    json j;
    j["h"] = {{"surrogates", dump(h)}, {"spillover", h.spillover}, {"warnings", h.warnings}};
    j["h"]["baseline_anchor"] = h.baseline_anchor ? json(*h.baseline_anchor) : json(nullptr);
    j["m"] = {{"mixture", dump(m.mixture)}, {"handshake", dump(m.handshake)}, {"warnings", m.warnings}};
    j["r"] = {{"mixture", dump(r.mixture)}, {"used_default", r.used_default}, {"warnings", r.warnings}};
    return j;
}

}  // namespace uixpose
