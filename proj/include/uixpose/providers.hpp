#pragma once

/**
 * @file providers.hpp
 * @brief Evidence and judge backends behind one call policy.
 *
 * Wire format (remote, HTTP POST, JSON):
 *   judge     {"kind":"judge","step":n,"screenshot_b64":..,"i":[3],"b":[3],
 *              "history":[{"i":[3],"b":[3]}..],"indicators":{..}}  ->  {"confidence":c}
 *   evidence  {"kind":"evidence","step":n,"screenshot_b64":..,
 *              "history":[{"i":[3],"goal":".."}..]}                 ->  EVIDENCE pack
 * Either response may carry "completion_tokens" / "total_tokens".
 *
 * Replay layout: <session>/providers/<NNNN>.json holding
 *   {"confidence": c, "evidence": {...}?, "completion_tokens"?, "total_tokens"?}
 */

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "uixpose/alignment.hpp"
#include "uixpose/config.hpp"
#include "uixpose/core.hpp"
#include "uixpose/evidence.hpp"
#include "uixpose/intent.hpp"

namespace uixpose {

enum class RequestKind { Evidence, Judge };

inline std::string_view request_kind_name(RequestKind k) noexcept {
    return k == RequestKind::Evidence ? "evidence" : "judge";
}

enum class ProviderErrorKind { Timeout, Transport, Schema, Unavailable };

inline std::string_view provider_error_kind_name(ProviderErrorKind k) noexcept {
    switch (k) {
        case ProviderErrorKind::Timeout: return "timeout";
        case ProviderErrorKind::Transport: return "transport";
        case ProviderErrorKind::Schema: return "schema";
        case ProviderErrorKind::Unavailable: return "unavailable";
    }
    return "?";
}

class ProviderError : public Error {
public:
    ProviderError(ProviderErrorKind kind, const std::string& what)
        : Error(std::string(provider_error_kind_name(kind)) + ": " + what), kind_(kind) {}
    ProviderErrorKind kind() const noexcept { return kind_; }
    bool retryable() const noexcept {
        return kind_ == ProviderErrorKind::Timeout || kind_ == ProviderErrorKind::Transport;
    }

private:
    ProviderErrorKind kind_;
};

struct ProviderRequest {
    RequestKind kind = RequestKind::Judge;
    std::size_t step = 0;
    json payload;
};

struct ProviderResponse {
    json payload;
    double latency_ms = 0.0;
    std::optional<std::int64_t> completion_tokens;
    std::optional<std::int64_t> total_tokens;
    std::string provider;
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual std::string name() const = 0;
    virtual ProviderResponse call(const ProviderRequest& req) = 0;
};

namespace detail {

inline void read_token_usage(const json& j, ProviderResponse& r) {
    if (j.is_object()) {
        if (j.contains("completion_tokens") && j["completion_tokens"].is_number_integer())
            r.completion_tokens = j["completion_tokens"].get<std::int64_t>();
        if (j.contains("total_tokens") && j["total_tokens"].is_number_integer())
            r.total_tokens = j["total_tokens"].get<std::int64_t>();
    }
}

}  // namespace detail

/// HTTP backend. Only plain http:// endpoints are supported by this build.
class RemoteProvider : public Provider {
public:
    RemoteProvider(std::string url, std::string token, double timeout_ms)
        : url_(std::move(url)), token_(std::move(token)), timeout_ms_(timeout_ms) {}

    std::string name() const override { return "remote"; }

    ProviderResponse call(const ProviderRequest& req) override {
        if (url_.empty()) throw ProviderError(ProviderErrorKind::Unavailable, "no provider URL configured");
        const auto [base, path] = split_url(url_);
        httplib::Client cli(base);
        const auto to = std::chrono::milliseconds(static_cast<long long>(timeout_ms_));
        cli.set_connection_timeout(to);
        cli.set_read_timeout(to);
        cli.set_write_timeout(to);
        httplib::Headers headers;
        if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

        const auto t0 = std::chrono::steady_clock::now();
        auto res = cli.Post(path, headers, req.payload.dump(), "application/json");
        const double elapsed =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (!res) {
            const auto err = res.error();
            const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                                   (err == httplib::Error::Read && elapsed >= 0.9 * timeout_ms_);
            throw ProviderError(timed_out ? ProviderErrorKind::Timeout : ProviderErrorKind::Transport,
                                "POST " + url_ + ": " + httplib::to_string(err));
        }
        if (res->status < 200 || res->status >= 300)
            throw ProviderError(ProviderErrorKind::Transport,
                                "POST " + url_ + " returned HTTP " + std::to_string(res->status));
        ProviderResponse out;
        out.provider = name();
        out.latency_ms = elapsed;
        try {
            out.payload = json::parse(res->body);
        } catch (const json::parse_error& e) {
            throw ProviderError(ProviderErrorKind::Schema, std::string("response is not JSON: ") + e.what());
        }
        detail::read_token_usage(out.payload, out);
        return out;
    }

    static std::pair<std::string, std::string> split_url(const std::string& url) {
        if (url.rfind("https://", 0) == 0)
            throw ProviderError(ProviderErrorKind::Unavailable, "https endpoints are not supported by this build");
        const std::string scheme = "http://";
        const std::size_t host_start = url.rfind(scheme, 0) == 0 ? scheme.size() : 0;
        const std::size_t slash = url.find('/', host_start);
        if (slash == std::string::npos) return {url, "/"};
        return {url.substr(0, slash), url.substr(slash)};
    }

private:
    std::string url_;
    std::string token_;
    double timeout_ms_;
};

/// Recorded responses keyed by step index.
class ReplayProvider : public Provider {
public:
    explicit ReplayProvider(std::string dir) : dir_(std::move(dir)) {}

    std::string name() const override { return "replay"; }

    static std::string step_file(std::size_t step) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%04zu.json", step);
        return buf;
    }

    ProviderResponse call(const ProviderRequest& req) override {
        const auto path = std::filesystem::path(dir_) / step_file(req.step);
        if (!std::filesystem::exists(path))
            throw ProviderError(ProviderErrorKind::Unavailable, "no recorded response " + path.string());
        json j;
        try {
            j = json::parse(read_text_file(path.string()));
        } catch (const json::parse_error& e) {
            throw ProviderError(ProviderErrorKind::Schema, path.string() + ": " + e.what());
        } catch (const IoError& e) {
            throw ProviderError(ProviderErrorKind::Transport, e.what());
        }
        if (!j.is_object()) throw ProviderError(ProviderErrorKind::Schema, path.string() + ": not an object");
        ProviderResponse out;
        out.provider = name();
        detail::read_token_usage(j, out);
        if (req.kind == RequestKind::Evidence) {
            if (!j.contains("evidence"))
                throw ProviderError(ProviderErrorKind::Unavailable, path.string() + ": no recorded evidence");
            out.payload = j["evidence"];
        } else {
            if (!j.contains("confidence"))
                throw ProviderError(ProviderErrorKind::Unavailable, path.string() + ": no recorded confidence");
            out.payload = json{{"confidence", j["confidence"]}};
        }
        return out;
    }

private:
    std::string dir_;
};

struct CallPolicy {
    double timeout_ms = 30000.0;
    int retries = 2;
    double backoff_ms = 500.0;
    std::function<void(double)> sleep = [](double ms) {
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
    };

    static CallPolicy from(const ProviderSettings& s) {
        CallPolicy p;
        p.timeout_ms = s.timeout_ms;
        p.retries = s.retries;
        p.backoff_ms = s.backoff_ms;
        return p;
    }
};

struct CallAttempt {
    std::string provider;
    ProviderErrorKind kind;
    std::string message;
};

struct CallOutcome {
    std::optional<ProviderResponse> response;
    std::vector<CallAttempt> failures;
};

using ResponseCheck = std::function<void(const json&)>;

/**
 * Tries each provider in order. Timeouts and transport failures are retried
 * with exponential backoff; schema failures and missing recordings move on
 * to the next provider immediately.
 */
inline CallOutcome call_chain(const std::vector<std::shared_ptr<Provider>>& chain, const ProviderRequest& req,
                              const CallPolicy& policy, const ResponseCheck& check = {}) {
    CallOutcome out;
    for (const auto& p : chain) {
        double backoff = policy.backoff_ms;
        for (int attempt = 0; attempt <= policy.retries; ++attempt) {
            try {
                auto r = p->call(req);
                if (check) check(r.payload);
                out.response = std::move(r);
                return out;
            } catch (const ProviderError& e) {
                out.failures.push_back({p->name(), e.kind(), e.what()});
                if (!e.retryable() || attempt == policy.retries) break;
                if (policy.sleep) policy.sleep(backoff);
                backoff *= 2.0;
            }
        }
    }
    return out;
}

/// Judge responses must be {"confidence": c} with c in [0,1].
inline void check_judge_payload(const json& j) {
    if (!j.is_object() || !j.contains("confidence") || !j["confidence"].is_number())
        throw ProviderError(ProviderErrorKind::Schema, "judge response lacks numeric 'confidence'");
    const double c = j["confidence"].get<double>();
    if (!(c >= 0.0 && c <= 1.0)) throw ProviderError(ProviderErrorKind::Schema, "judge confidence outside [0,1]");
}

inline json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

inline json indicators_json(const StateIndicators& si) {
    EvidencePack p;
    p.state_indicators = si;
    return to_json(p)["state_indicators"];
}

inline std::string screenshot_base64(const std::string& path) {
    if (path.empty() || !std::filesystem::exists(path)) return {};
    return httplib::detail::base64_encode(read_text_file(path));
}

struct JudgeOutcome {
    double confidence = 0.5;
    std::string provider = "builtin";
    bool degraded = false;
    JudgeVerdict builtin;  // always computed, for diagnostics
    std::vector<CallAttempt> failures;
    std::optional<std::int64_t> completion_tokens, total_tokens;
};

/// Judge calls through the configured chain, ending at the built-in judge.
class JudgeService {
public:
    JudgeService(std::vector<std::shared_ptr<Provider>> chain = {}, CallPolicy policy = {}, JudgeRules rules = {})
        : chain_(std::move(chain)), policy_(std::move(policy)), rules_(rules) {}

    static json request_payload(const JudgeInput& in, std::size_t step, bool embed_screenshot) {
        json hist = json::array();
        for (const auto& h : in.history) hist.push_back({{"i", vec_json(h.intent)}, {"b", vec_json(h.behaviour)}});
        return {{"kind", "judge"},
                {"step", step},
                {"screenshot_b64", embed_screenshot ? screenshot_base64(in.screenshot) : std::string{}},
                {"i", vec_json(in.intent)},
                {"b", vec_json(in.behaviour)},
                {"history", std::move(hist)},
                {"indicators", indicators_json(in.indicators)}};
    }

    JudgeOutcome judge(const JudgeInput& in, std::size_t step) const {
        JudgeOutcome out;
        out.builtin = builtin_judge(in, rules_);
        out.confidence = out.builtin.confidence;
        if (chain_.empty()) return out;

        bool needs_pixels = false;
        for (const auto& p : chain_) needs_pixels |= p->name() == "remote";
        ProviderRequest req{RequestKind::Judge, step, request_payload(in, step, needs_pixels)};
        auto res = call_chain(chain_, req, policy_, check_judge_payload);
        out.failures = std::move(res.failures);
        if (res.response) {
            out.confidence = res.response->payload["confidence"].get<double>();
            out.provider = res.response->provider;
            out.completion_tokens = res.response->completion_tokens;
            out.total_tokens = res.response->total_tokens;
        } else {
            out.degraded = true;
        }
        return out;
    }

    bool has_external() const noexcept { return !chain_.empty(); }

private:
    std::vector<std::shared_ptr<Provider>> chain_;
    CallPolicy policy_;
    JudgeRules rules_;
};

/// Evidence from the chain, validated; there is no built-in fallback.
inline EvidencePack request_evidence(const std::vector<std::shared_ptr<Provider>>& chain, const CallPolicy& policy,
                                     std::size_t step, const std::string& screenshot, const IntentContext& ctx,
                                     const ValidationOptions& vopts = {}) {
    json hist = json::array();
    for (const auto& [i, goal] : ctx.history()) hist.push_back({{"i", vec_json(i.v)}, {"goal", goal}});
    bool needs_pixels = false;
    for (const auto& p : chain) needs_pixels |= p->name() == "remote";
    ProviderRequest req{RequestKind::Evidence, step,
                        {{"kind", "evidence"},
                         {"step", step},
                         {"screenshot_b64", needs_pixels ? screenshot_base64(screenshot) : std::string{}},
                         {"history", std::move(hist)}}};
    std::optional<EvidencePack> pack;
    auto check = [&](const json& j) {
        auto v = validate_evidence(j.dump(), vopts);
        if (!v.ok()) {
            std::string msg = "evidence response failed validation:";
            for (const auto& e : v.errors) msg += " " + e.to_string() + ";";
            throw ProviderError(ProviderErrorKind::Schema, msg);
        }
        pack = std::move(v.pack);
    };
    auto res = call_chain(chain, req, policy, check);
    if (!res.response || !pack) {
        std::string msg = "no provider returned valid evidence for step " + std::to_string(step);
        ProviderErrorKind kind = ProviderErrorKind::Unavailable;
        for (const auto& f : res.failures) {
            msg += "\n  [" + f.provider + "] " + f.message;
            kind = f.kind;
        }
        throw ProviderError(kind, msg);
    }
    return *pack;
}

/// External chain for a provider kind; builtin yields an empty chain.
inline std::vector<std::shared_ptr<Provider>> make_chain(const ProviderSettings& s, const std::string& session_root) {
    std::vector<std::shared_ptr<Provider>> chain;
    switch (s.kind) {
        case ProviderKind::Builtin: break;
        case ProviderKind::Remote:
            chain.push_back(std::make_shared<RemoteProvider>(s.url, s.token, s.timeout_ms));
            break;
        case ProviderKind::Replay:
            chain.push_back(std::make_shared<ReplayProvider>((std::filesystem::path(session_root) / "providers").string()));
            break;
    }
    return chain;
}

}  // namespace uixpose
