#pragma once

/**
 * @file alignment.hpp
 * @brief Behaviour fusion, intention-behaviour alignment, triage quadrants,
 *        the deterministic three-layer judge, and the final verdict rule.
 */

#include <cmath>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "uixpose/channels.hpp"
#include "uixpose/core.hpp"
#include "uixpose/evidence.hpp"
#include "uixpose/intent.hpp"

namespace uixpose {

struct FusionConfig {
    double alpha_h = 0.4, alpha_m = 0.3, alpha_r = 0.3;
    double gamma = 2.0;   // RBF sensitivity
    double theta = 0.5;   // misalignment threshold
    double b_hi = 0.4;    // magnitude split for triage
    double c_lo = 0.4;    // judge confidence floor

    double weight(ChannelId c) const noexcept {
        return c == ChannelId::H ? alpha_h : (c == ChannelId::M ? alpha_m : alpha_r);
    }

    std::vector<std::string> check() const {
        std::vector<std::string> issues;
        if (!(alpha_h >= 0 && alpha_m >= 0 && alpha_r >= 0)) issues.push_back("fusion.alpha_* must be >= 0");
        if (!(alpha_h + alpha_m + alpha_r > 0)) issues.push_back("fusion.alpha_* must not all be zero");
        if (!(gamma > 0)) issues.push_back("fusion.gamma must be > 0");
        if (!(theta > 0 && theta < 1)) issues.push_back("fusion.theta must lie in (0,1)");
        if (!(b_hi >= 0)) issues.push_back("fusion.b_hi must be >= 0");
        if (!(c_lo >= 0 && c_lo <= 1)) issues.push_back("fusion.c_lo must lie in [0,1]");
        return issues;
    }
};

struct BehaviourVector {
    Vec3 v;
    bool scored = false;
};

/// Masked, weight-normalised fusion. All channels masked gives an unscored zero vector.
inline BehaviourVector fuse(const ChannelEvidence& h, const ChannelEvidence& m, const ChannelEvidence& r,
                            const FusionConfig& cfg) {
    BehaviourVector b;
    double denom = 0.0;
    Vec3 num;
    for (const ChannelEvidence* ch : {&h, &m, &r}) {
        if (!ch->mask) continue;
        const double w = cfg.weight(ch->channel);
        denom += w;
        for (std::size_t a = 0; a < 3; ++a) num[a] += w * ch->s[a];
    }
    if (denom <= 0.0) return b;
    b.scored = true;
    for (std::size_t a = 0; a < 3; ++a) b.v[a] = clip01(num[a] / denom);
    return b;
}

struct Alignment {
    double a = 1.0;  // in (0,1]
    double m = 0.0;  // 1 - a
};

/// RBF kernel over the squared Euclidean distance.
inline Alignment align(const Vec3& intent, const Vec3& behaviour, double gamma) {
    Alignment out;
    out.a = std::exp(-gamma * squared_distance(intent, behaviour));
    out.m = 1.0 - out.a;
    return out;
}

inline double magnitude(const Vec3& b) { return l2_norm(b); }

enum class Quadrant { SafeAuthorised, OvertAnomaly, IdleSafe, UncertainStealth };

inline std::string_view quadrant_name(Quadrant q) noexcept {
    switch (q) {
        case Quadrant::SafeAuthorised: return "Safe/Authorised";
        case Quadrant::OvertAnomaly: return "Overt Anomaly";
        case Quadrant::IdleSafe: return "Idle/Safe";
        case Quadrant::UncertainStealth: return "Uncertain/Stealth";
    }
    return "?";
}

/// A is "high" at or above 1 - theta; B is "high" at or above b_hi.
inline Quadrant triage(double a, double b_mag, const FusionConfig& cfg) {
    const bool high_a = a >= 1.0 - cfg.theta;
    const bool high_b = b_mag >= cfg.b_hi;
    if (high_b) return high_a ? Quadrant::SafeAuthorised : Quadrant::OvertAnomaly;
    return high_a ? Quadrant::IdleSafe : Quadrant::UncertainStealth;
}

// ---------------------------------------------------------------------------
// Forensic judge
// ---------------------------------------------------------------------------

struct JudgeHistoryEntry {
    Vec3 intent;
    Vec3 behaviour;
};

struct JudgeInput {
    std::string screenshot;
    Vec3 behaviour;
    Vec3 intent;
    std::deque<JudgeHistoryEntry> history;  // most recent first, at most N
    StateIndicators indicators;
    std::vector<UIComponent> components;     // pixel stand-in for the built-in judge
};

struct JudgeRules {
    double base = 0.5;
    double visual_bonus = 0.4;
    double context_bonus = 0.2;
    double trap_penalty = 0.4;
    double context_intent_min = 0.6;
    double trap_evidence_min = 0.8;
    std::size_t history_n = 3;
};

namespace detail {

inline bool has_kind(const std::vector<UIComponent>& comps, std::initializer_list<std::string_view> kinds) {
    for (const auto& c : comps)
        for (auto k : kinds)
            if (c.kind == k) return true;
    return false;
}

}  // namespace detail

/// Layer 1: a visible element that explains load on this axis.
inline bool visual_justifier(Axis axis, const StateIndicators& si, const std::vector<UIComponent>& comps) {
    switch (axis) {
        case Axis::Net:
            return si.flag(kLoadingSpinner) || si.progress_determinate_ratio.has_value() ||
                   detail::has_kind(comps, {"Spinner"});
        case Axis::Mem:
            return detail::has_kind(comps, {"Image", "Map", "BackgroundImage"});
        case Axis::Res:
            return si.media == MediaState::Playing ||
                   detail::has_kind(comps, {"EditText", "Modal", "Drawer", "Multi_Tab"});
    }
    return false;
}

struct JudgeVerdict {
    double confidence = 0.5;
    Axis dominant = Axis::Net;
    bool visual = false, context = false, trap = false;
};

/// Deterministic three-layer stand-in for the forensic judge.
inline JudgeVerdict builtin_judge(const JudgeInput& in, const JudgeRules& rules = {}) {
    JudgeVerdict v;
    v.dominant = dominant_axis(in.behaviour);
    double c = rules.base;
    v.visual = visual_justifier(v.dominant, in.indicators, in.components);
    if (v.visual) c += rules.visual_bonus;
    std::size_t seen = 0;
    for (const auto& h : in.history) {
        if (seen++ >= rules.history_n) break;
        if (h.intent[v.dominant] >= rules.context_intent_min) {
            v.context = true;
            break;
        }
    }
    if (v.context) c += rules.context_bonus;
    v.trap = in.indicators.any_error_state() && in.behaviour[v.dominant] >= rules.trap_evidence_min;
    if (v.trap) c -= rules.trap_penalty;
    v.confidence = clip01(c);
    return v;
}

// ---------------------------------------------------------------------------
// Verdict
// ---------------------------------------------------------------------------

enum class Verdict { Authorised, Anomaly, Uncertain };

inline std::string_view verdict_name(Verdict v) noexcept {
    switch (v) {
        case Verdict::Authorised: return "Authorised";
        case Verdict::Anomaly: return "Anomaly";
        case Verdict::Uncertain: return "Uncertain";
    }
    return "?";
}

struct VerdictOutcome {
    Verdict verdict = Verdict::Uncertain;
    std::string reason;
};

inline VerdictOutcome decide_verdict(double /*a*/, double m, double b_mag, double c, bool scored,
                                     const FusionConfig& cfg) {
    if (!scored) return {Verdict::Uncertain, "no telemetry channel available"};
    if (m >= cfg.theta) return {Verdict::Anomaly, "misaligned"};
    if (c >= cfg.c_lo) return {Verdict::Authorised, "aligned and visually verified"};
    if (b_mag >= cfg.b_hi) return {Verdict::Anomaly, "visually unverified"};
    return {Verdict::Uncertain, "low-energy, visually unverified"};
}

struct AlignmentResult {
    std::size_t step = 0;
    double a = 1.0;
    double m = 0.0;
    double b_mag = 0.0;
    Quadrant quadrant = Quadrant::IdleSafe;
    double c = 0.5;
    Verdict verdict = Verdict::Uncertain;
    std::string reason;
    Axis dominant = Axis::Net;
    bool judge_degraded = false;
};

}  // namespace uixpose
