#pragma once

/**
 * @file intent.hpp
 * @brief Deterministic EVIDENCE -> intent mapping.
 *
 * Each detected component contributes w[kind] * confidence * E[kind] to a
 * per-axis pre-squash sum. Sums are soft-capped at kappa, squashed through
 * sigmoid(s / tau), then adjusted by visible state indicators: multiplicative
 * dampers first, additive nudges second, clipped to [0,1].
 */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "uixpose/core.hpp"
#include "uixpose/evidence.hpp"

namespace uixpose {

struct IntentVector {
    Vec3 v{{0.5, 0.5, 0.5}};
    double net() const noexcept { return v.net(); }
    double mem() const noexcept { return v.mem(); }
    double res() const noexcept { return v.res(); }
    friend bool operator==(const IntentVector&, const IntentVector&) = default;
};

struct ImpactEntry {
    double w = 0.0;
    Vec3 e;  // (E_net, E_mem, E_res)
};

/// Per-class impact weight and effect triple.
struct UIImpactPrior {
    std::map<std::string, ImpactEntry> entries;

    const ImpactEntry* find(const std::string& kind) const {
        auto it = entries.find(kind);
        return it == entries.end() ? nullptr : &it->second;
    }

    /// Robustly aggregated UI-impact prior (final column of the elicitation table).
    static UIImpactPrior defaults() {
        UIImpactPrior p;
        auto put = [&](const char* k, double w, double n, double m, double r) {
            p.entries[k] = ImpactEntry{w, Vec3{{n, m, r}}};
        };
        put("BackgroundImage", 0.67, 0.30, 0.70, 0.30);
        put("Bottom_Navigation", 0.46, 0.30, 0.20, 0.40);
        put("Card", 0.48, 0.33, 0.30, 0.34);
        put("CheckBox(box)", 0.12, 0.10, 0.10, 0.10);
        put("CheckedTextView", 0.16, 0.10, 0.10, 0.20);
        put("Drawer", 0.56, 0.30, 0.30, 0.40);
        put("EditText", 0.64, 0.60, 0.20, 0.40);
        put("Icon", 0.21, 0.10, 0.20, 0.10);
        put("Image", 1.01, 0.70, 0.83, 0.32);
        put("Map", 1.32, 0.90, 0.90, 0.90);
        put("Modal", 0.53, 0.40, 0.30, 0.40);
        put("Multi_Tab", 0.78, 0.60, 0.50, 0.60);
        put("PageIndicator", 0.23, 0.00, 0.10, 0.20);
        put("Remember", 0.30, 0.10, 0.10, 0.10);
        put("Spinner", 0.64, 0.60, 0.30, 0.40);
        put("Switch", 0.28, 0.14, 0.10, 0.13);
        put("Text", 0.10, 0.00, 0.00, 0.10);
        put("TextButton", 0.43, 0.38, 0.10, 0.20);
        put("Toolbar", 0.39, 0.18, 0.20, 0.32);
        put("UpperTaskBar", 0.40, 0.18, 0.20, 0.30);
        return p;
    }

    /// Checks coverage of the ontology and effect ranges; returns violations.
    std::vector<std::string> check() const {
        std::vector<std::string> issues;
        for (auto cls : kOntology) {
            if (!entries.count(std::string(cls)))
                issues.push_back("prior has no entry for " + std::string(cls));
        }
        for (const auto& [k, e] : entries) {
            if (!is_ontology_class(k)) issues.push_back("prior entry for unknown class " + k);
            if (!(e.w >= 0.0)) issues.push_back("prior." + k + ".w must be >= 0");
            for (std::size_t a = 0; a < 3; ++a)
                if (!(e.e[a] >= 0.0 && e.e[a] <= 1.0))
                    issues.push_back("prior." + k + ".e must lie in [0,1]");
        }
        return issues;
    }
};

/// Table row rendering "w/[E_net, E_mem, E_res]" with two decimals.
inline std::string format_prior_row(const ImpactEntry& e) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f/[%.2f, %.2f, %.2f]", e.w, e.e[0], e.e[1], e.e[2]);
    return buf;
}

struct AxisConstants {
    Vec3 kappa{{6.7310, 6.7041, 3.1326}};
    Vec3 tau{{1.3077, 1.3147, 0.8558}};

    std::vector<std::string> check() const {
        std::vector<std::string> issues;
        for (Axis a : kAxes) {
            if (!(kappa[a] > 0.0))
                issues.push_back("constants." + std::string(axis_name(a)) + ".kappa must be > 0");
            if (!(tau[a] > 0.0))
                issues.push_back("constants." + std::string(axis_name(a)) + ".tau must be > 0");
        }
        return issues;
    }
};

// Indicator keys beyond the boolean flags.
inline constexpr std::string_view kProgressIndicator = "progress";
inline constexpr std::string_view kTextIndicator = "text";
inline constexpr std::string_view kMediaIndicator = "media";

struct StateParams {
    std::map<std::string, Vec3> alpha_add;  // indicator -> additive strength per axis
    std::map<std::string, Vec3> beta_mul;   // indicator -> damper per axis, in [0,1]
    std::map<std::string, double> keyword_weights;

    static StateParams defaults() {
        StateParams sp;
        sp.alpha_add[std::string(kLoadingSpinner)] = Vec3{{0.15, 0.0, 0.0}};
        sp.beta_mul[std::string(kErrorBanner)] = Vec3{{0.5, 0.0, 0.0}};
        sp.alpha_add[std::string(kErrorBanner)] = Vec3{{0.0, 0.0, 0.05}};
        sp.beta_mul[std::string(kEmptyState)] = Vec3{{0.3, 0.3, 0.3}};
        sp.alpha_add[std::string(kMediaIndicator)] = Vec3{{0.2, 0.0, 0.1}};
        sp.alpha_add[std::string(kTextIndicator)] = Vec3{{0.15, 0.0, 0.0}};
        for (const char* w : {"uploading", "downloading", "syncing", "loading"})
            sp.keyword_weights[w] = 0.5;
        return sp;
    }

    std::vector<std::string> check() const {
        std::vector<std::string> issues;
        for (const auto& [k, v] : alpha_add)
            for (std::size_t a = 0; a < 3; ++a)
                if (!(v[a] >= 0.0)) issues.push_back("state_params.alpha_add." + k + " must be >= 0");
        for (const auto& [k, v] : beta_mul)
            for (std::size_t a = 0; a < 3; ++a)
                if (!(v[a] >= 0.0 && v[a] <= 1.0))
                    issues.push_back("state_params.beta_mul." + k + " must lie in [0,1]");
        for (const auto& [k, t] : keyword_weights)
            if (!(t >= 0.0)) issues.push_back("state_params.keywords." + k + " must be >= 0");
        return issues;
    }
};

/// Rolling window of the last N (intent, goal) pairs, most recent first.
class IntentContext {
public:
    explicit IntentContext(std::size_t capacity = 3) : capacity_(std::max<std::size_t>(capacity, 1)) {}

    void push(const IntentVector& i, std::string goal) {
        history_.emplace_front(i, std::move(goal));
        while (history_.size() > capacity_) history_.pop_back();
    }

    const std::deque<std::pair<IntentVector, std::string>>& history() const noexcept { return history_; }
    std::size_t capacity() const noexcept { return capacity_; }

private:
    std::size_t capacity_;
    std::deque<std::pair<IntentVector, std::string>> history_;
};

struct IntentDiagnostics {
    Vec3 presquash;                  // sums before the cap
    std::array<bool, 3> capped{};    // cap engaged per axis
    Vec3 squashed;                   // before state modifiers
    std::vector<std::string> skipped_kinds;
    std::map<std::string, double> severities;
    Vec3 additive;
    Vec3 multiplicative{{1.0, 1.0, 1.0}};
};

struct IntentResult {
    IntentVector intent;
    IntentDiagnostics diag;
};

/// Per-axis pre-squash sums s_a = sum_c w[kind] * clip(conf) * E_a[kind]; unknown kinds are skipped.
inline Vec3 presquash_sums(const EvidencePack& pack, const UIImpactPrior& prior,
                           std::vector<std::string>* skipped = nullptr) {
    Vec3 s;
    for (const auto& c : pack.components) {
        const ImpactEntry* entry = prior.find(c.kind);
        if (!entry) {
            if (skipped) skipped->push_back(c.kind);
            continue;
        }
        const double p = clip01(c.confidence);
        for (std::size_t a = 0; a < 3; ++a) s[a] += entry->w * p * entry->e[a];
    }
    return s;
}

/// Indicator severities m_k in [0,1].
inline std::map<std::string, double> indicator_severities(const StateIndicators& si,
                                                          const StateParams& sp) {
    std::map<std::string, double> m;
    for (const auto& [name, on] : si.flags) m[name] = on ? 1.0 : 0.0;
    m[std::string(kProgressIndicator)] =
        si.progress_determinate_ratio ? 1.0 - clip01(*si.progress_determinate_ratio) : 0.0;
    double text = 0.0;
    for (const auto& [word, theta] : sp.keyword_weights) {
        const std::string needle = detail::to_lower(word);
        const bool present = std::any_of(si.indicator_texts.begin(), si.indicator_texts.end(),
                                         [&](const std::string& t) {
                                             return detail::to_lower(t).find(needle) != std::string::npos;
                                         });
        if (present) text += theta;
    }
    m[std::string(kTextIndicator)] = clip01(text);
    m[std::string(kMediaIndicator)] = media_severity(si.media);
    return m;
}

inline IntentResult compute_intent_detailed(const EvidencePack& pack, const UIImpactPrior& prior,
                                            const AxisConstants& constants, const StateParams& sp) {
    IntentResult out;
    auto& d = out.diag;
    d.presquash = presquash_sums(pack, prior, &d.skipped_kinds);

    Vec3 i;
    for (std::size_t a = 0; a < 3; ++a) {
        double s = d.presquash[a];
        if (s > constants.kappa[a]) {
            s = constants.kappa[a];
            d.capped[a] = true;
        }
        i[a] = sigmoid(s / constants.tau[a]);
    }
    d.squashed = i;

    d.severities = indicator_severities(pack.state_indicators, sp);
    auto severity = [&](const std::string& k) {
        auto it = d.severities.find(k);
        return it == d.severities.end() ? 0.0 : it->second;
    };
    for (const auto& [k, alpha] : sp.alpha_add) {
        const double mk = severity(k);
        for (std::size_t a = 0; a < 3; ++a) d.additive[a] += alpha[a] * mk;
    }
    for (const auto& [k, beta] : sp.beta_mul) {
        const double mk = severity(k);
        for (std::size_t a = 0; a < 3; ++a) d.multiplicative[a] *= (1.0 - beta[a] * mk);
    }
    for (std::size_t a = 0; a < 3; ++a)
        out.intent.v[a] = clip01(i[a] * d.multiplicative[a] + d.additive[a]);
    return out;
}

inline IntentVector compute_intent(const EvidencePack& pack, const UIImpactPrior& prior,
                                   const AxisConstants& constants, const StateParams& sp) {
    return compute_intent_detailed(pack, prior, constants, sp).intent;
}

// ---------------------------------------------------------------------------
// Corpus estimation of kappa / tau
// ---------------------------------------------------------------------------

/// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value.
inline double percentile_nearest_rank(std::vector<double> values, double pct) {
    if (values.empty()) throw EstimationError("percentile of an empty sample");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(pct * n / 100.0 - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

struct AxisSums {
    std::vector<double> net, mem, res;
    const std::vector<double>& operator[](Axis a) const {
        return a == Axis::Net ? net : (a == Axis::Mem ? mem : res);
    }
    void push(const Vec3& s) {
        net.push_back(s[0]);
        mem.push_back(s[1]);
        res.push_back(s[2]);
    }
};

struct EstimationPercentiles {
    Vec3 cap{{99.0, 98.0, 98.0}};
    double scale = 75.0;      // this percentile maps to target after the sigmoid
    double target = 0.8;
};

/// kappa_a from the high tail; tau_a so that sigmoid(p75 / tau) hits the target (ln 4 for 0.8).
inline AxisConstants estimate_axis_constants(const AxisSums& sums, EstimationPercentiles pc = {}) {
    AxisConstants out;
    const double logit = std::log(pc.target / (1.0 - pc.target));
    for (Axis a : kAxes) {
        const auto& xs = sums[a];
        if (xs.empty())
            throw EstimationError("no pre-squash sums for axis " + std::string(axis_name(a)));
        out.kappa[a] = percentile_nearest_rank(xs, pc.cap[a]);
        const double p = percentile_nearest_rank(xs, pc.scale);
        if (!(p > 0.0) || !(out.kappa[a] > 0.0))
            throw EstimationError("axis " + std::string(axis_name(a)) +
                                  " has a non-positive percentile; constants undefined");
        out.tau[a] = p / logit;
    }
    return out;
}

}  // namespace uixpose
