#pragma once

/**
 * @file pipeline.hpp
 * @brief Per-session orchestration and the report model.
 *
 * Steps run strictly in order: intent, channels, fusion, alignment, judge,
 * verdict. Channel stream state and the intent context live for one session.
 */

#include <array>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uixpose/alignment.hpp"
#include "uixpose/channels.hpp"
#include "uixpose/config.hpp"
#include "uixpose/core.hpp"
#include "uixpose/intent.hpp"
#include "uixpose/providers.hpp"
#include "uixpose/telemetry.hpp"

namespace uixpose {

inline constexpr std::string_view kUnlabelled = "Unlabelled";

struct StepRecord {
    std::size_t index = 0;
    std::int64_t timestamp_ms = 0;
    std::optional<std::string> ui_class;
    std::string goal;
    IntentVector intent;
    IntentDiagnostics intent_diag;
    BehaviourVector behaviour;
    ChannelEvidence h, m, r;
    AlignmentResult result;
    JudgeVerdict builtin_judge;
    std::string judge_provider = "builtin";
    std::string evidence_source = "stored";
    bool evidence_degraded = false;  // provider evidence requested but the stored pack was used
    std::vector<std::string> diagnostics;
};

struct ClassRow {
    std::string ui_class;
    std::array<std::size_t, 3> counts{};  // Authorised, Anomaly, Uncertain

    std::size_t total() const noexcept { return counts[0] + counts[1] + counts[2]; }
};

inline std::size_t verdict_index(Verdict v) noexcept {
    switch (v) {
        case Verdict::Authorised: return 0;
        case Verdict::Anomaly: return 1;
        case Verdict::Uncertain: return 2;
    }
    return 2;
}

/// Verdict counts grouped by UI class, rows ordered by label.
inline std::vector<ClassRow> aggregate_by_class(const std::vector<StepRecord>& records) {
    std::map<std::string, ClassRow> rows;
    for (const auto& rec : records) {
        const std::string label =
            rec.ui_class && !rec.ui_class->empty() ? *rec.ui_class : std::string(kUnlabelled);
        auto& row = rows[label];
        row.ui_class = label;
        ++row.counts[verdict_index(rec.result.verdict)];
    }
    std::vector<ClassRow> out;
    for (auto& [_, r] : rows) out.push_back(std::move(r));
    return out;
}

struct SessionReport {
    std::string session;
    std::string package;
    double dt_seconds = 0.0;
    std::vector<StepRecord> steps;
    std::vector<ClassRow> by_class;
    std::array<std::size_t, 3> totals{};
    std::map<std::string, std::size_t> quadrants;
    std::size_t degraded_steps = 0;
    json config;

    std::size_t anomalies() const noexcept { return totals[1]; }
};

struct PipelineOptions {
    std::vector<std::shared_ptr<Provider>> chain;  // external judge/evidence providers
    std::optional<CallPolicy> policy;
};

inline SessionReport run_session(const SessionBundle& bundle, const EngineConfig& cfg, PipelineOptions opts = {}) {
    const HttpBaselines baselines = [&] {
        const auto dir = std::filesystem::path(cfg.data_dir);
        if (std::filesystem::exists(dir / "http_method_freq.tsv") && std::filesystem::exists(dir / "expected_headers.tsv"))
            return HttpBaselines::load(cfg.data_dir);
        return HttpBaselines::defaults();
    }();
    const CallPolicy policy = opts.policy.value_or(CallPolicy::from(cfg.provider));
    JudgeService judge(opts.chain, policy, cfg.judge);

    HChannel hch(cfg.h, cfg.stream, baselines);
    MChannel mch(cfg.m, cfg.stream);
    RChannel rch(cfg.r, cfg.stream);
    IntentContext context(cfg.context_n);
    std::deque<JudgeHistoryEntry> judge_history;

    SessionReport report;
    report.session = bundle.root;
    report.package = bundle.meta.package;
    report.dt_seconds = bundle.dt_seconds;
    report.config = to_json(cfg);

    for (const auto& step : bundle.steps) {
        StepRecord rec;
        rec.index = step.index;
        rec.timestamp_ms = step.timestamp_ms;
        rec.diagnostics = step.diagnostics;

        EvidencePack pack = step.evidence;
        if (cfg.provider.evidence_from_provider && !opts.chain.empty()) {
            try {
                pack = request_evidence(opts.chain, policy, step.index, step.screenshot, context, cfg.validation);
                pack.step = step.index;
                pack.timestamp_ms = step.timestamp_ms;
                rec.evidence_source = "provider";
            } catch (const ProviderError& e) {
                rec.evidence_degraded = true;
                rec.diagnostics.push_back(std::string("evidence provider: ") + e.what() + "; stored evidence used");
            }
        }
        rec.ui_class = pack.ui_class();
        rec.goal = pack.primary_goal();

        auto ir = compute_intent_detailed(pack, cfg.prior, cfg.constants, cfg.state_params);
        rec.intent = ir.intent;
        rec.intent_diag = std::move(ir.diag);
        for (const auto& k : rec.intent_diag.skipped_kinds)
            rec.diagnostics.push_back("intent: no prior entry for '" + k + "', component skipped");

        std::vector<std::string> warnings;
        rec.h = hch.step(step.index, step.timestamp_ms, step.flows ? &*step.flows : nullptr, step.http,
                         bundle.dt_seconds, &warnings);
        rec.m = mch.step(step.index, step.meminfo, bundle.dt_seconds);
        rec.r = rch.step(step.index, step.proc, bundle.dt_seconds);
        for (auto& w : warnings) rec.diagnostics.push_back(std::move(w));

        rec.behaviour = fuse(rec.h, rec.m, rec.r, cfg.fusion);
        const auto al = align(rec.intent.v, rec.behaviour.v, cfg.fusion.gamma);

        AlignmentResult& res = rec.result;
        res.step = step.index;
        res.a = al.a;
        res.m = al.m;
        res.b_mag = magnitude(rec.behaviour.v);
        res.quadrant = triage(res.a, res.b_mag, cfg.fusion);
        res.dominant = dominant_axis(rec.behaviour.v);

        JudgeInput jin;
        jin.screenshot = step.screenshot;
        jin.behaviour = rec.behaviour.v;
        jin.intent = rec.intent.v;
        jin.history = judge_history;
        jin.indicators = pack.state_indicators;
        jin.components = pack.components;
        const auto jo = judge.judge(jin, step.index);
        rec.builtin_judge = jo.builtin;
        rec.judge_provider = jo.provider;
        res.c = jo.confidence;
        res.judge_degraded = jo.degraded;
        for (const auto& f : jo.failures)
            rec.diagnostics.push_back("judge provider [" + f.provider + "] " + f.message);
        if (jo.degraded || rec.evidence_degraded) ++report.degraded_steps;

        const auto vo = decide_verdict(res.a, res.m, res.b_mag, res.c, rec.behaviour.scored, cfg.fusion);
        res.verdict = vo.verdict;
        res.reason = vo.reason;

        context.push(rec.intent, rec.goal);
        judge_history.push_front({rec.intent.v, rec.behaviour.v});
        while (judge_history.size() > cfg.judge.history_n) judge_history.pop_back();

        ++report.totals[verdict_index(res.verdict)];
        ++report.quadrants[std::string(quadrant_name(res.quadrant))];
        report.steps.push_back(std::move(rec));
    }
    report.by_class = aggregate_by_class(report.steps);
    return report;
}

// ---------------------------------------------------------------------------
// Report writers
// ---------------------------------------------------------------------------

inline json channel_json(const ChannelEvidence& e) {
    json j{{"mask", e.mask}, {"s", vec_json(e.s)}};
    j["terms"] = e.terms;
    return j;
}

inline json report_to_json(const SessionReport& r) {
    json steps = json::array();
    for (const auto& s : r.steps) {
        const auto& a = s.result;
        json js{{"step", s.index},
                {"timestamp_ms", s.timestamp_ms},
                {"ui_class", s.ui_class ? json(*s.ui_class) : json(nullptr)},
                {"goal", s.goal},
                {"intent", vec_json(s.intent.v)},
                {"behaviour", vec_json(s.behaviour.v)},
                {"scored", s.behaviour.scored},
                {"A", a.a},
                {"M", a.m},
                {"B", a.b_mag},
                {"C", a.c},
                {"quadrant", quadrant_name(a.quadrant)},
                {"verdict", verdict_name(a.verdict)},
                {"reason", a.reason},
                {"dominant", axis_name(a.dominant)},
                {"evidence", {{"source", s.evidence_source}, {"degraded", s.evidence_degraded}}},
                {"judge",
                 {{"provider", s.judge_provider},
                  {"degraded", a.judge_degraded},
                  {"builtin_confidence", s.builtin_judge.confidence},
                  {"visual", s.builtin_judge.visual},
                  {"context", s.builtin_judge.context},
                  {"trap", s.builtin_judge.trap}}},
                {"channels", {{"H", channel_json(s.h)}, {"M", channel_json(s.m)}, {"R", channel_json(s.r)}}},
                {"intent_diagnostics",
                 {{"presquash", vec_json(s.intent_diag.presquash)},
                  {"capped", s.intent_diag.capped},
                  {"severities", s.intent_diag.severities},
                  {"skipped", s.intent_diag.skipped_kinds}}},
                {"diagnostics", s.diagnostics}};
        steps.push_back(std::move(js));
    }
    json classes = json::array();
    for (const auto& row : r.by_class)
        classes.push_back({{"ui_class", row.ui_class},
                           {"Authorised", row.counts[0]},
                           {"Anomaly", row.counts[1]},
                           {"Uncertain", row.counts[2]}});
    return {{"session", r.session},
            {"package", r.package},
            {"dt_seconds", r.dt_seconds},
            {"steps", std::move(steps)},
            {"by_class", std::move(classes)},
            {"totals", {{"Authorised", r.totals[0]}, {"Anomaly", r.totals[1]}, {"Uncertain", r.totals[2]},
                        {"steps", r.steps.size()}}},
            {"quadrants", r.quadrants},
            {"degraded_steps", r.degraded_steps},
            {"config", r.config}};
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string fmt(double v) {
    std::ostringstream o;
    o << std::setprecision(6) << std::fixed << v;
    return o.str();
}

}  // namespace detail

inline std::string report_to_csv(const SessionReport& r) {
    std::ostringstream o;
    o << "step,ui_class,i_net,i_mem,i_res,b_net,b_mem,b_res,A,M,B,C,quadrant,verdict\n";
    for (const auto& s : r.steps) {
        const auto& a = s.result;
        o << s.index << ',' << detail::csv_escape(s.ui_class.value_or(std::string(kUnlabelled)));
        for (double v : s.intent.v.v) o << ',' << detail::fmt(v);
        for (double v : s.behaviour.v.v) o << ',' << detail::fmt(v);
        o << ',' << detail::fmt(a.a) << ',' << detail::fmt(a.m) << ',' << detail::fmt(a.b_mag) << ','
          << detail::fmt(a.c) << ',' << quadrant_name(a.quadrant) << ',' << verdict_name(a.verdict) << '\n';
    }
    return o.str();
}

/// Predicted (intent) against observed (behaviour) per axis, one row per step.
inline std::string report_to_series(const SessionReport& r) {
    std::ostringstream o;
    o << "step,t_s,pred_net,obs_net,pred_mem,obs_mem,pred_res,obs_res,M\n";
    for (const auto& s : r.steps) {
        o << s.index << ',' << detail::fmt(static_cast<double>(s.timestamp_ms) / 1000.0);
        for (std::size_t a = 0; a < 3; ++a) o << ',' << detail::fmt(s.intent.v[a]) << ',' << detail::fmt(s.behaviour.v[a]);
        o << ',' << detail::fmt(s.result.m) << '\n';
    }
    return o.str();
}

inline std::string class_table_text(const std::vector<ClassRow>& rows) {
    std::size_t width = 10;
    for (const auto& r : rows) width = std::max(width, r.ui_class.size());
    std::ostringstream o;
    o << std::left << std::setw(static_cast<int>(width)) << "UI class" << "  Authorised  Anomaly  Uncertain\n";
    std::array<std::size_t, 3> tot{};
    for (const auto& r : rows) {
        o << std::left << std::setw(static_cast<int>(width)) << r.ui_class << std::right << "  " << std::setw(10)
          << r.counts[0] << "  " << std::setw(7) << r.counts[1] << "  " << std::setw(9) << r.counts[2] << '\n';
        for (std::size_t i = 0; i < 3; ++i) tot[i] += r.counts[i];
    }
    o << std::left << std::setw(static_cast<int>(width)) << "Total" << std::right << "  " << std::setw(10) << tot[0]
      << "  " << std::setw(7) << tot[1] << "  " << std::setw(9) << tot[2] << '\n';
    return o.str();
}

struct ReportPaths {
    std::string json, csv, series;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write '" + p.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + p.string() + "'");
}

inline ReportPaths write_report(const SessionReport& r, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path d(out_dir);
    ReportPaths p{(d / "report.json").string(), (d / "report.csv").string(), (d / "series.csv").string()};
    write_text(p.json, report_to_json(r).dump(2) + "\n");
    write_text(p.csv, report_to_csv(r));
    write_text(p.series, report_to_series(r));
    return p;
}

}  // namespace uixpose
