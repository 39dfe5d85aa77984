#pragma once

/**
 * @file config.hpp
 * @brief Engine configuration: one JSON document over the documented key namespace.
 *
 *   prior.<Class>.w / prior.<Class>.e        constants.<axis>.kappa / .tau
 *   state_params.alpha_add.<ind> / beta_mul.<ind> / keywords.<word>
 *   channels.stream.*  channels.h.*  channels.m.*  channels.r.*
 *   fusion.*  judge.*  context.n  evidence.low_confidence_threshold
 *   provider.*  data.*
 *
 * Resolution order: defaults, then file, then environment, then flags.
 * Any unknown key or ill-typed value raises ConfigError naming the key.
 */

#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uixpose/alignment.hpp"
#include "uixpose/channels.hpp"
#include "uixpose/core.hpp"
#include "uixpose/evidence.hpp"
#include "uixpose/intent.hpp"
#include "uixpose/stream_stats.hpp"

#ifndef UIXPOSE_DATA_DIR
#define UIXPOSE_DATA_DIR "data"
#endif

namespace uixpose {

enum class ProviderKind { Builtin, Remote, Replay };

inline std::string_view provider_kind_name(ProviderKind k) noexcept {
    switch (k) {
        case ProviderKind::Builtin: return "builtin";
        case ProviderKind::Remote: return "remote";
        case ProviderKind::Replay: return "replay";
    }
    return "builtin";
}

inline std::optional<ProviderKind> parse_provider_kind(std::string_view s) {
    if (s == "builtin") return ProviderKind::Builtin;
    if (s == "remote") return ProviderKind::Remote;
    if (s == "replay") return ProviderKind::Replay;
    return std::nullopt;
}

struct ProviderSettings {
    ProviderKind kind = ProviderKind::Builtin;
    std::string url;
    std::string token;
    double timeout_ms = 30000.0;
    int retries = 2;
    double backoff_ms = 500.0;
    bool evidence_from_provider = false;  // otherwise stored evidence.json is used
};

struct EngineConfig {
    UIImpactPrior prior = UIImpactPrior::defaults();
    AxisConstants constants;
    StateParams state_params = StateParams::defaults();
    StreamConfig stream;
    HChannelConfig h;
    MChannelConfig m;
    RChannelConfig r;
    FusionConfig fusion;
    JudgeRules judge;
    std::size_t context_n = 3;
    ValidationOptions validation;
    ProviderSettings provider;
    std::string data_dir = UIXPOSE_DATA_DIR;
    std::string trackers_path;  // empty: none

    /// Every constraint violation, each prefixed with its key.
    std::vector<std::string> check() const {
        std::vector<std::string> all;
        auto add = [&](std::vector<std::string> v) { all.insert(all.end(), v.begin(), v.end()); };
        add(prior.check());
        add(constants.check());
        add(state_params.check());
        add(h.check());
        add(m.check());
        add(r.check());
        add(fusion.check());
        if (!(stream.ewma_alpha > 0.0 && stream.ewma_alpha <= 1.0))
            all.push_back("channels.stream.ewma_alpha must lie in (0,1]");
        if (stream.window < 1) all.push_back("channels.stream.window must be >= 1");
        if (!(stream.eps > 0.0)) all.push_back("channels.stream.eps must be > 0");
        if (context_n < 1) all.push_back("context.n must be >= 1");
        if (!(provider.timeout_ms > 0.0)) all.push_back("provider.timeout_ms must be > 0");
        if (provider.retries < 0) all.push_back("provider.retries must be >= 0");
        if (!(provider.backoff_ms >= 0.0)) all.push_back("provider.backoff_ms must be >= 0");
        return all;
    }

    /// Throws ConfigError for the first violation.
    void validate() const {
        auto issues = check();
        if (issues.empty()) return;
        const auto& msg = issues.front();
        throw ConfigError(msg.substr(0, msg.find(' ')), msg);
    }
};

namespace detail {

class ConfigReader {
public:
    explicit ConfigReader(EngineConfig& cfg) : cfg_(cfg) {}

    void apply(const json& root) {
        expect_object(root, "");
        for (auto& [k, v] : root.items()) {
            if (k == "prior") prior(v);
            else if (k == "constants") constants(v);
            else if (k == "state_params") state_params(v);
            else if (k == "channels") channels(v);
            else if (k == "fusion") fusion(v);
            else if (k == "judge") judge(v);
            else if (k == "context") section(v, "context", {{"n", size(cfg_.context_n)}});
            else if (k == "evidence")
                section(v, "evidence", {{"low_confidence_threshold", real(cfg_.validation.low_confidence_threshold)}});
            else if (k == "provider") provider(v);
            else if (k == "data")
                section(v, "data", {{"dir", str(cfg_.data_dir)}, {"trackers", str(cfg_.trackers_path)}});
            else unknown(k);
        }
    }

private:
    using Setter = std::function<void(const json&, const std::string&)>;

    static void expect_object(const json& j, const std::string& key) {
        if (!j.is_object()) throw ConfigError(key.empty() ? "<root>" : key, "config key '" + key + "' must be an object");
    }
    [[noreturn]] static void unknown(const std::string& key) {
        throw ConfigError(key, "unknown config key '" + key + "'");
    }
    static double number(const json& j, const std::string& key) {
        if (!j.is_number()) throw ConfigError(key, "config key '" + key + "' must be a number");
        return j.get<double>();
    }
    static Vec3 vec3(const json& j, const std::string& key) {
        if (!j.is_array() || j.size() != 3) throw ConfigError(key, "config key '" + key + "' must be [net, mem, res]");
        Vec3 v;
        for (std::size_t i = 0; i < 3; ++i) v[i] = number(j[i], key);
        return v;
    }

    static Setter real(double& dst) {
        return [&dst](const json& j, const std::string& key) { dst = number(j, key); };
    }
    static Setter size(std::size_t& dst) {
        return [&dst](const json& j, const std::string& key) {
            if (!j.is_number_integer() || j.get<long long>() < 0)
                throw ConfigError(key, "config key '" + key + "' must be a non-negative integer");
            dst = j.get<std::size_t>();
        };
    }
    static Setter integer(int& dst) {
        return [&dst](const json& j, const std::string& key) {
            if (!j.is_number_integer()) throw ConfigError(key, "config key '" + key + "' must be an integer");
            dst = j.get<int>();
        };
    }
    static Setter str(std::string& dst) {
        return [&dst](const json& j, const std::string& key) {
            if (!j.is_string()) throw ConfigError(key, "config key '" + key + "' must be a string");
            dst = j.get<std::string>();
        };
    }
    static Setter boolean(bool& dst) {
        return [&dst](const json& j, const std::string& key) {
            if (!j.is_boolean()) throw ConfigError(key, "config key '" + key + "' must be a boolean");
            dst = j.get<bool>();
        };
    }
    static Setter array4(std::array<double, 4>& dst) {
        return [&dst](const json& j, const std::string& key) {
            if (!j.is_array() || j.size() != 4) throw ConfigError(key, "config key '" + key + "' must be a 4-element array");
            for (std::size_t i = 0; i < 4; ++i) dst[i] = number(j[i], key);
        };
    }

    static void section(const json& j, const std::string& prefix, const std::map<std::string, Setter>& setters) {
        expect_object(j, prefix);
        for (auto& [k, v] : j.items()) {
            const std::string key = prefix + "." + k;
            auto it = setters.find(k);
            if (it == setters.end()) unknown(key);
            it->second(v, key);
        }
    }

    void prior(const json& j) {
        expect_object(j, "prior");
        for (auto& [cls, v] : j.items()) {
            const std::string key = "prior." + cls;
            if (!is_ontology_class(cls))
                throw ConfigError(key, "prior class '" + cls + "' is not in the component ontology");
            auto& e = cfg_.prior.entries[cls];
            section(v, key, {{"w", real(e.w)}, {"e", [&e](const json& x, const std::string& k) { e.e = vec3(x, k); }}});
        }
    }

    void constants(const json& j) {
        expect_object(j, "constants");
        for (auto& [axis, v] : j.items()) {
            const std::string key = "constants." + axis;
            std::optional<Axis> a;
            for (Axis x : kAxes)
                if (axis_name(x) == axis) a = x;
            if (!a) unknown(key);
            section(v, key, {{"kappa", real(cfg_.constants.kappa[*a])}, {"tau", real(cfg_.constants.tau[*a])}});
        }
    }

    void state_params(const json& j) {
        expect_object(j, "state_params");
        auto& sp = cfg_.state_params;
        for (auto& [k, v] : j.items()) {
            const std::string key = "state_params." + k;
            if (k == "alpha_add" || k == "beta_mul") {
                expect_object(v, key);
                auto& dst = k == "alpha_add" ? sp.alpha_add : sp.beta_mul;
                for (auto& [ind, x] : v.items()) dst[ind] = vec3(x, key + "." + ind);
            } else if (k == "keywords") {
                expect_object(v, key);
                for (auto& [w, x] : v.items()) sp.keyword_weights[w] = number(x, key + "." + w);
            } else {
                unknown(key);
            }
        }
    }

    void channels(const json& j) {
        expect_object(j, "channels");
        for (auto& [k, v] : j.items()) {
            if (k == "stream") {
                auto& s = cfg_.stream;
                section(v, "channels.stream",
                        {{"ewma_alpha", real(s.ewma_alpha)}, {"window", size(s.window)}, {"eps", real(s.eps)}});
            } else if (k == "h") {
                auto& h = cfg_.h;
                section(v, "channels.h",
                        {{"w_b", real(h.w_b)},
                         {"w_r", real(h.w_r)},
                         {"w_f", real(h.w_f)},
                         {"w_x", real(h.w_x)},
                         {"w_e", real(h.w_e)},
                         {"w_t", real(h.w_t)},
                         {"w_m", real(h.w_m)},
                         {"kappa_l", real(h.kappa_l)},
                         {"kappa_p", real(h.kappa_p)},
                         {"kappa_h", real(h.kappa_h)},
                         {"max_mem", real(h.max_mem)},
                         {"max_res", real(h.max_res)},
                         {"min_samples", size(h.min_samples)},
                         {"large_payload_bytes", real(h.large_payload_bytes)},
                         {"backlog_expiry_steps", real(h.backlog_expiry_steps)}});
            } else if (k == "m") {
                auto& m = cfg_.m;
                section(v, "channels.m",
                        {{"alpha", array4(m.alpha)},
                         {"beta_ipc", real(m.beta_ipc)},
                         {"beta_wv", real(m.beta_wv)},
                         {"gamma_ui", real(m.gamma_ui)},
                         {"tau_mem", real(m.tau_mem)},
                         {"gate_window", size(m.gate_window)},
                         {"eps", real(m.eps)}});
            } else if (k == "r") {
                auto& r = cfg_.r;
                section(v, "channels.r",
                        {{"gamma_1", real(r.gamma_1)},
                         {"gamma_2", real(r.gamma_2)},
                         {"alpha", array4(r.alpha)},
                         {"tau_mem", real(r.tau_mem)},
                         {"gate_window", size(r.gate_window)}});
            } else {
                unknown("channels." + k);
            }
        }
    }

    void fusion(const json& j) {
        auto& f = cfg_.fusion;
        section(j, "fusion",
                {{"alpha_h", real(f.alpha_h)},
                 {"alpha_m", real(f.alpha_m)},
                 {"alpha_r", real(f.alpha_r)},
                 {"gamma", real(f.gamma)},
                 {"theta", real(f.theta)},
                 {"b_hi", real(f.b_hi)},
                 {"c_lo", real(f.c_lo)}});
    }

    void judge(const json& j) {
        auto& r = cfg_.judge;
        section(j, "judge",
                {{"base", real(r.base)},
                 {"visual_bonus", real(r.visual_bonus)},
                 {"context_bonus", real(r.context_bonus)},
                 {"trap_penalty", real(r.trap_penalty)},
                 {"context_intent_min", real(r.context_intent_min)},
                 {"trap_evidence_min", real(r.trap_evidence_min)},
                 {"history_n", size(r.history_n)}});
    }

    void provider(const json& j) {
        auto& p = cfg_.provider;
        section(j, "provider",
                {{"kind",
                  [&p](const json& x, const std::string& key) {
                      auto k = x.is_string() ? parse_provider_kind(x.get<std::string>()) : std::nullopt;
                      if (!k) throw ConfigError(key, "config key '" + key + "' must be builtin, remote or replay");
                      p.kind = *k;
                  }},
                 {"url", str(p.url)},
                 {"token", str(p.token)},
                 {"timeout_ms", real(p.timeout_ms)},
                 {"retries", integer(p.retries)},
                 {"backoff_ms", real(p.backoff_ms)},
                 {"evidence_from_provider", boolean(p.evidence_from_provider)}});
    }

    EngineConfig& cfg_;
};

}  // namespace detail

/// Overlays a parsed JSON document onto `cfg`.
inline void apply_config_json(EngineConfig& cfg, const json& j) { detail::ConfigReader(cfg).apply(j); }

inline EngineConfig load_config_file(const std::string& path, EngineConfig base = {}) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("<file>", "config '" + path + "' is not valid JSON: " + e.what());
    }
    apply_config_json(base, j);
    return base;
}

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

inline std::optional<std::string> process_env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

/// Provider endpoint and token from the environment.
inline void apply_env(EngineConfig& cfg, const EnvLookup& env = process_env) {
    if (auto url = env("UIXPOSE_PROVIDER_URL")) cfg.provider.url = *url;
    if (auto tok = env("UIXPOSE_PROVIDER_TOKEN")) cfg.provider.token = *tok;
}

/// Overrides supplied on the command line.
struct ConfigFlags {
    std::optional<std::string> config_path;
    std::optional<ProviderKind> provider;
    std::optional<double> gamma;
    std::optional<double> theta;
};

/// defaults <- file (flag path, else UIXPOSE_CONFIG) <- environment <- flags; validated.
inline EngineConfig resolve_config(const ConfigFlags& flags, const EnvLookup& env = process_env) {
    EngineConfig cfg;
    std::optional<std::string> path = flags.config_path;
    if (!path) path = env("UIXPOSE_CONFIG");
    if (path) cfg = load_config_file(*path, cfg);
    apply_env(cfg, env);
    if (flags.provider) cfg.provider.kind = *flags.provider;
    if (flags.gamma) cfg.fusion.gamma = *flags.gamma;
    if (flags.theta) cfg.fusion.theta = *flags.theta;
    cfg.validate();
    return cfg;
}

/// Full snapshot in the same key namespace (the token is redacted).
inline json to_json(const EngineConfig& c) {
    json j;
    for (const auto& [cls, e] : c.prior.entries) j["prior"][cls] = {{"w", e.w}, {"e", e.e.v}};
    for (Axis a : kAxes)
        j["constants"][std::string(axis_name(a))] = {{"kappa", c.constants.kappa[a]}, {"tau", c.constants.tau[a]}};
    j["state_params"]["alpha_add"] = json::object();
    j["state_params"]["beta_mul"] = json::object();
    j["state_params"]["keywords"] = json::object();
    for (const auto& [k, v] : c.state_params.alpha_add) j["state_params"]["alpha_add"][k] = v.v;
    for (const auto& [k, v] : c.state_params.beta_mul) j["state_params"]["beta_mul"][k] = v.v;
    for (const auto& [k, v] : c.state_params.keyword_weights) j["state_params"]["keywords"][k] = v;
    j["channels"]["stream"] = {{"ewma_alpha", c.stream.ewma_alpha}, {"window", c.stream.window}, {"eps", c.stream.eps}};
    const auto& h = c.h;
    j["channels"]["h"] = {{"w_b", h.w_b},         {"w_r", h.w_r},         {"w_f", h.w_f},
                          {"w_x", h.w_x},         {"w_e", h.w_e},         {"w_t", h.w_t},
                          {"w_m", h.w_m},         {"kappa_l", h.kappa_l}, {"kappa_p", h.kappa_p},
                          {"kappa_h", h.kappa_h}, {"max_mem", h.max_mem}, {"max_res", h.max_res},
                          {"min_samples", h.min_samples},
                          {"large_payload_bytes", h.large_payload_bytes},
                          {"backlog_expiry_steps", h.backlog_expiry_steps}};
    j["channels"]["m"] = {{"alpha", c.m.alpha},       {"beta_ipc", c.m.beta_ipc}, {"beta_wv", c.m.beta_wv},
                          {"gamma_ui", c.m.gamma_ui}, {"tau_mem", c.m.tau_mem},   {"gate_window", c.m.gate_window},
                          {"eps", c.m.eps}};
    j["channels"]["r"] = {{"gamma_1", c.r.gamma_1}, {"gamma_2", c.r.gamma_2},   {"alpha", c.r.alpha},
                          {"tau_mem", c.r.tau_mem}, {"gate_window", c.r.gate_window}};
    const auto& f = c.fusion;
    j["fusion"] = {{"alpha_h", f.alpha_h}, {"alpha_m", f.alpha_m}, {"alpha_r", f.alpha_r}, {"gamma", f.gamma},
                   {"theta", f.theta},     {"b_hi", f.b_hi},       {"c_lo", f.c_lo}};
    const auto& r = c.judge;
    j["judge"] = {{"base", r.base},
                  {"visual_bonus", r.visual_bonus},
                  {"context_bonus", r.context_bonus},
                  {"trap_penalty", r.trap_penalty},
                  {"context_intent_min", r.context_intent_min},
                  {"trap_evidence_min", r.trap_evidence_min},
                  {"history_n", r.history_n}};
    j["context"] = {{"n", c.context_n}};
    j["evidence"] = {{"low_confidence_threshold", c.validation.low_confidence_threshold}};
    j["provider"] = {{"kind", provider_kind_name(c.provider.kind)},
                     {"url", c.provider.url},
                     {"token", c.provider.token.empty() ? "" : "<redacted>"},
                     {"timeout_ms", c.provider.timeout_ms},
                     {"retries", c.provider.retries},
                     {"backoff_ms", c.provider.backoff_ms},
                     {"evidence_from_provider", c.provider.evidence_from_provider}};
    return j;
}

}  // namespace uixpose
