#pragma once

/**
 * @file evidence.hpp
 * @brief The EVIDENCE contract: per-screen UI components from a closed
 *        ontology, visually supported state indicators, and a short screen
 *        summary. validate_evidence() is the single gate every provider
 *        response and stored evidence file passes through.
 */

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "uixpose/core.hpp"

namespace uixpose {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Ontology
// ---------------------------------------------------------------------------

inline constexpr std::array<std::string_view, 20> kOntology{
    "BackgroundImage", "Bottom_Navigation", "Card",     "CheckBox(box)", "CheckedTextView",
    "Drawer",          "EditText",          "Icon",     "Image",         "Map",
    "Modal",           "Multi_Tab",         "PageIndicator", "Remember", "Spinner",
    "Switch",          "Text",              "TextButton", "Toolbar",     "UpperTaskBar"};

inline bool is_ontology_class(std::string_view kind) noexcept {
    for (auto c : kOntology)
        if (c == kind) return true;
    return false;
}

namespace detail {

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace detail

/// Closest ontology class for an unknown label: containment first, then edit distance.
inline std::string nearest_ontology_class(std::string_view kind) {
    const std::string needle = detail::to_lower(kind);
    std::string best;
    std::size_t best_len = 0;
    for (auto c : kOntology) {
        const std::string hay = detail::to_lower(c);
        if (!needle.empty() && hay.find(needle) != std::string::npos &&
            (best.empty() || hay.size() < best_len)) {
            best = std::string(c);
            best_len = hay.size();
        }
    }
    if (!best.empty()) return best;
    std::size_t best_d = static_cast<std::size_t>(-1);
    for (auto c : kOntology) {
        const auto d = detail::edit_distance(needle, detail::to_lower(c));
        if (d < best_d) {
            best_d = d;
            best = std::string(c);
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct BBox {
    std::int64_t x_min = 0, y_min = 0, x_max = 0, y_max = 0;
    friend bool operator==(const BBox&, const BBox&) = default;
};

struct UIComponent {
    std::string kind;
    BBox bbox;
    std::optional<std::string> visible_text;
    double confidence = 1.0;
    bool low_confidence = false;
    friend bool operator==(const UIComponent&, const UIComponent&) = default;
};

enum class MediaState { None, Stopped, Paused, Buffering, Playing };

inline std::string_view media_state_name(MediaState m) noexcept {
    switch (m) {
        case MediaState::None: return "none";
        case MediaState::Stopped: return "stopped";
        case MediaState::Paused: return "paused";
        case MediaState::Buffering: return "buffering";
        case MediaState::Playing: return "playing";
    }
    return "none";
}

/// Severity of the media indicator: playing 1, paused/buffering 0.5, otherwise 0.
inline double media_severity(MediaState m) noexcept {
    switch (m) {
        case MediaState::Playing: return 1.0;
        case MediaState::Paused:
        case MediaState::Buffering: return 0.5;
        default: return 0.0;
    }
}

struct IndicatorEvidence {
    std::optional<BBox> bbox;
    std::optional<std::string> text;
    friend bool operator==(const IndicatorEvidence&, const IndicatorEvidence&) = default;
};

// Documented flag set. Any other boolean key is accepted as an extension flag.
inline constexpr std::string_view kLoadingSpinner = "loading_spinner_visible";
inline constexpr std::string_view kErrorBanner = "error_banner_visible";
inline constexpr std::string_view kEmptyState = "empty_state_visible";
inline constexpr std::string_view kCrashDialog = "crash_dialog_visible";
inline constexpr std::string_view kMediaPlaying = "media_playing";

struct StateIndicators {
    std::map<std::string, bool> flags;
    std::optional<double> progress_determinate_ratio;
    MediaState media = MediaState::None;
    std::vector<std::string> indicator_texts;
    std::map<std::string, double> confidence;
    std::map<std::string, IndicatorEvidence> evidence;
    std::set<std::string> low_confidence;

    bool flag(std::string_view name) const {
        auto it = flags.find(std::string(name));
        return it != flags.end() && it->second;
    }

    bool any_error_state() const {
        return flag(kErrorBanner) || flag(kEmptyState) || flag(kCrashDialog);
    }

    friend bool operator==(const StateIndicators&, const StateIndicators&) = default;
};

struct ScreenSummary {
    std::string description;
    std::string primary_goal;
    std::vector<std::string> evidence_bullets;
    std::optional<std::string> ui_class;
    friend bool operator==(const ScreenSummary&, const ScreenSummary&) = default;
};

struct EvidencePack {
    std::vector<UIComponent> components;
    StateIndicators state_indicators;
    std::optional<ScreenSummary> screen_summary;
    std::uint64_t step = 0;
    std::int64_t timestamp_ms = 0;

    std::optional<std::string> ui_class() const {
        return screen_summary ? screen_summary->ui_class : std::nullopt;
    }
    std::string primary_goal() const {
        return screen_summary ? screen_summary->primary_goal : std::string{};
    }

    friend bool operator==(const EvidencePack&, const EvidencePack&) = default;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class EvidenceErrorKind { Parse, Class, Geometry, Type, Range, Missing };

inline std::string_view evidence_error_kind_name(EvidenceErrorKind k) noexcept {
    switch (k) {
        case EvidenceErrorKind::Parse: return "parse";
        case EvidenceErrorKind::Class: return "class";
        case EvidenceErrorKind::Geometry: return "geometry";
        case EvidenceErrorKind::Type: return "type";
        case EvidenceErrorKind::Range: return "range";
        case EvidenceErrorKind::Missing: return "missing";
    }
    return "?";
}

struct EvidenceError {
    EvidenceErrorKind kind;
    std::string path;  // JSON-pointer-ish location, e.g. /components/3/bbox
    std::string message;

    std::string to_string() const {
        return std::string(evidence_error_kind_name(kind)) + " error at " + path + ": " + message;
    }
};

struct EvidenceValidation {
    std::optional<EvidencePack> pack;
    std::vector<EvidenceError> errors;
    std::vector<std::string> warnings;

    bool ok() const noexcept { return pack.has_value(); }
};

struct ValidationOptions {
    double low_confidence_threshold = 0.2;
};

namespace detail {

class EvidenceValidator {
public:
    explicit EvidenceValidator(ValidationOptions opts) : opts_(opts) {}

    EvidenceValidation run(std::string_view raw) {
        EvidenceValidation out;
        json doc;
        try {
            doc = json::parse(raw.begin(), raw.end());
        } catch (const json::parse_error& e) {
            out.errors.push_back({EvidenceErrorKind::Parse, "/", e.what()});
            return out;
        }
        if (!doc.is_object()) {
            out.errors.push_back({EvidenceErrorKind::Type, "/", "top level must be a JSON object"});
            return out;
        }

        EvidencePack pack;
        for (auto& [key, _] : doc.items()) {
            if (key != "components" && key != "state_indicators" && key != "screen_summary" &&
                key != "step" && key != "timestamp_ms")
                warnings_.push_back("ignoring unknown top-level key '" + key + "'");
        }

        if (!doc.contains("components")) {
            error(EvidenceErrorKind::Missing, "/components", "required array is absent");
        } else if (!doc["components"].is_array()) {
            error(EvidenceErrorKind::Type, "/components", "must be an array");
        } else {
            const auto& arr = doc["components"];
            for (std::size_t i = 0; i < arr.size(); ++i) {
                auto c = component(arr[i], "/components/" + std::to_string(i));
                if (c) pack.components.push_back(std::move(*c));
            }
        }

        if (doc.contains("state_indicators")) indicators(doc["state_indicators"], pack.state_indicators);
        if (doc.contains("screen_summary")) pack.screen_summary = summary(doc["screen_summary"]);

        if (doc.contains("step")) {
            if (doc["step"].is_number_unsigned())
                pack.step = doc["step"].get<std::uint64_t>();
            else
                error(EvidenceErrorKind::Type, "/step", "must be a non-negative integer");
        }
        if (doc.contains("timestamp_ms")) {
            if (doc["timestamp_ms"].is_number_integer())
                pack.timestamp_ms = doc["timestamp_ms"].get<std::int64_t>();
            else
                error(EvidenceErrorKind::Type, "/timestamp_ms", "must be an integer");
        }

        out.errors = std::move(errors_);
        out.warnings = std::move(warnings_);
        if (out.errors.empty()) out.pack = std::move(pack);
        return out;
    }

private:
    void error(EvidenceErrorKind k, std::string path, std::string msg) {
        errors_.push_back({k, std::move(path), std::move(msg)});
    }

    std::optional<BBox> bbox(const json& j, const std::string& path) {
        if (!j.is_array() || j.size() != 4) {
            error(EvidenceErrorKind::Type, path, "bbox must be an array of four integers");
            return std::nullopt;
        }
        for (const auto& v : j) {
            if (!v.is_number_integer()) {
                error(EvidenceErrorKind::Type, path, "bbox coordinates must be integers");
                return std::nullopt;
            }
        }
        BBox b{j[0].get<std::int64_t>(), j[1].get<std::int64_t>(), j[2].get<std::int64_t>(),
               j[3].get<std::int64_t>()};
        bool good = true;
        if (b.x_min >= b.x_max) {
            error(EvidenceErrorKind::Geometry, path,
                  "x_min (" + std::to_string(b.x_min) + ") must be < x_max (" +
                      std::to_string(b.x_max) + ")");
            good = false;
        }
        if (b.y_min >= b.y_max) {
            error(EvidenceErrorKind::Geometry, path,
                  "y_min (" + std::to_string(b.y_min) + ") must be < y_max (" +
                      std::to_string(b.y_max) + ")");
            good = false;
        }
        return good ? std::optional<BBox>(b) : std::nullopt;
    }

    std::optional<UIComponent> component(const json& j, const std::string& path) {
        if (!j.is_object()) {
            error(EvidenceErrorKind::Type, path, "component must be an object");
            return std::nullopt;
        }
        UIComponent c;
        bool good = true;

        // "type" is the provider-side spelling of the same field.
        const char* kind_key = j.contains("kind") ? "kind" : (j.contains("type") ? "type" : nullptr);
        if (!kind_key) {
            error(EvidenceErrorKind::Missing, path + "/kind", "component class is absent");
            good = false;
        } else if (!j[kind_key].is_string()) {
            error(EvidenceErrorKind::Type, path + "/kind", "component class must be a string");
            good = false;
        } else {
            c.kind = j[kind_key].get<std::string>();
            if (!is_ontology_class(c.kind)) {
                error(EvidenceErrorKind::Class, path + "/kind",
                      "unknown component class \"" + c.kind + "\" (nearest allowed: \"" +
                          nearest_ontology_class(c.kind) + "\")");
                good = false;
            }
        }

        if (!j.contains("bbox")) {
            error(EvidenceErrorKind::Missing, path + "/bbox", "bbox is absent");
            good = false;
        } else if (auto b = bbox(j["bbox"], path + "/bbox")) {
            c.bbox = *b;
        } else {
            good = false;
        }

        if (j.contains("visible_text") && !j["visible_text"].is_null()) {
            if (j["visible_text"].is_string())
                c.visible_text = j["visible_text"].get<std::string>();
            else {
                error(EvidenceErrorKind::Type, path + "/visible_text", "must be a string");
                good = false;
            }
        }

        if (!j.contains("confidence")) {
            error(EvidenceErrorKind::Missing, path + "/confidence", "confidence is absent");
            good = false;
        } else if (!j["confidence"].is_number()) {
            error(EvidenceErrorKind::Type, path + "/confidence", "confidence must be a number");
            good = false;
        } else {
            const double raw = j["confidence"].get<double>();
            if (!std::isfinite(raw)) {
                error(EvidenceErrorKind::Range, path + "/confidence", "confidence must be finite");
                good = false;
            } else {
                c.confidence = clip01(raw);
                if (c.confidence != raw)
                    warnings_.push_back(path + ": confidence " + std::to_string(raw) +
                                        " clamped to [0,1]");
                c.low_confidence = c.confidence < opts_.low_confidence_threshold;
            }
        }
        return good ? std::optional<UIComponent>(std::move(c)) : std::nullopt;
    }

    void indicators(const json& j, StateIndicators& si) {
        const std::string base = "/state_indicators";
        if (!j.is_object()) {
            error(EvidenceErrorKind::Type, base, "must be an object");
            return;
        }
        for (auto& [key, val] : j.items()) {
            const std::string path = base + "/" + key;
            if (key == "progress_determinate_ratio") {
                if (val.is_null()) continue;
                if (!val.is_number()) {
                    error(EvidenceErrorKind::Type, path, "must be a number");
                } else {
                    const double r = val.get<double>();
                    if (!(r >= 0.0 && r <= 1.0))
                        error(EvidenceErrorKind::Range, path, "must lie in [0,1]");
                    else
                        si.progress_determinate_ratio = r;
                }
            } else if (key == "indicator_texts") {
                if (!val.is_array()) {
                    error(EvidenceErrorKind::Type, path, "must be an array of strings");
                    continue;
                }
                for (const auto& t : val) {
                    if (t.is_string())
                        si.indicator_texts.push_back(t.get<std::string>());
                    else
                        error(EvidenceErrorKind::Type, path, "entries must be strings");
                }
            } else if (key == kMediaPlaying) {
                media(val, path, si);
            } else if (key == "confidence") {
                if (!val.is_object()) {
                    error(EvidenceErrorKind::Type, path, "must map indicator names to numbers");
                    continue;
                }
                for (auto& [name, c] : val.items()) {
                    if (!c.is_number()) {
                        error(EvidenceErrorKind::Type, path + "/" + name, "must be a number");
                        continue;
                    }
                    const double raw = c.get<double>();
                    si.confidence[name] = clip01(raw);
                    if (si.confidence[name] != raw)
                        warnings_.push_back(path + "/" + name + ": confidence clamped to [0,1]");
                }
            } else if (key == "evidence") {
                if (!val.is_object()) {
                    error(EvidenceErrorKind::Type, path, "must map indicator names to evidence");
                    continue;
                }
                for (auto& [name, ev] : val.items()) {
                    IndicatorEvidence ie;
                    const std::string epath = path + "/" + name;
                    if (!ev.is_object()) {
                        error(EvidenceErrorKind::Type, epath, "must be an object");
                        continue;
                    }
                    if (ev.contains("bbox")) ie.bbox = bbox(ev["bbox"], epath + "/bbox");
                    if (ev.contains("text")) {
                        if (ev["text"].is_string())
                            ie.text = ev["text"].get<std::string>();
                        else
                            error(EvidenceErrorKind::Type, epath + "/text", "must be a string");
                    }
                    si.evidence[name] = std::move(ie);
                }
            } else if (val.is_boolean()) {
                si.flags[key] = val.get<bool>();
            } else if (key == kLoadingSpinner || key == kErrorBanner || key == kEmptyState ||
                       key == kCrashDialog) {
                error(EvidenceErrorKind::Type, path, "flag must be a JSON boolean");
            } else {
                warnings_.push_back("ignoring non-boolean state indicator '" + key + "'");
            }
        }

        // A set flag must be traceable to pixels; otherwise it is kept but marked low-confidence.
        for (const auto& [name, on] : si.flags) {
            if (!on) continue;
            auto ev = si.evidence.find(name);
            const bool supported = ev != si.evidence.end() && (ev->second.bbox || ev->second.text);
            auto conf = si.confidence.find(name);
            const bool low = conf != si.confidence.end() &&
                             conf->second < opts_.low_confidence_threshold;
            if (!supported || low) {
                si.low_confidence.insert(name);
                if (!supported)
                    warnings_.push_back("indicator '" + name +
                                        "' carries no bbox/text evidence; marked low-confidence");
            }
        }
    }

    void media(const json& val, const std::string& path, StateIndicators& si) {
        if (val.is_boolean()) {
            si.media = val.get<bool>() ? MediaState::Playing : MediaState::None;
        } else if (val.is_string()) {
            const auto s = to_lower(val.get<std::string>());
            if (s == "playing") si.media = MediaState::Playing;
            else if (s == "buffering") si.media = MediaState::Buffering;
            else if (s == "paused") si.media = MediaState::Paused;
            else if (s == "stopped") si.media = MediaState::Stopped;
            else if (s == "none") si.media = MediaState::None;
            else error(EvidenceErrorKind::Type, path, "unknown media state \"" + s + "\"");
        } else if (!val.is_null()) {
            error(EvidenceErrorKind::Type, path, "must be a boolean or media-state string");
        }
    }

    std::optional<ScreenSummary> summary(const json& j) {
        const std::string base = "/screen_summary";
        if (!j.is_object()) {
            error(EvidenceErrorKind::Type, base, "must be an object");
            return std::nullopt;
        }
        ScreenSummary s;
        auto str_field = [&](const char* key, std::string& dst, bool required) {
            if (!j.contains(key)) {
                if (required) error(EvidenceErrorKind::Missing, base + "/" + key, "required");
                return;
            }
            if (!j[key].is_string())
                error(EvidenceErrorKind::Type, base + "/" + key, "must be a string");
            else
                dst = j[key].get<std::string>();
        };
        str_field("description", s.description, true);
        str_field("primary_goal", s.primary_goal, true);
        if (j.contains("ui_class") && !j["ui_class"].is_null()) {
            if (j["ui_class"].is_string())
                s.ui_class = j["ui_class"].get<std::string>();
            else
                error(EvidenceErrorKind::Type, base + "/ui_class", "must be a string");
        }
        if (!j.contains("evidence_bullets")) {
            error(EvidenceErrorKind::Missing, base + "/evidence_bullets", "required");
        } else if (!j["evidence_bullets"].is_array()) {
            error(EvidenceErrorKind::Type, base + "/evidence_bullets", "must be an array");
        } else {
            for (const auto& b : j["evidence_bullets"]) {
                if (b.is_string())
                    s.evidence_bullets.push_back(b.get<std::string>());
                else
                    error(EvidenceErrorKind::Type, base + "/evidence_bullets",
                          "entries must be strings");
            }
            const auto n = s.evidence_bullets.size();
            if (n < 2 || n > 5)
                error(EvidenceErrorKind::Range, base + "/evidence_bullets",
                      "expected 2-5 bullets, got " + std::to_string(n));
        }
        return s;
    }

    ValidationOptions opts_;
    std::vector<EvidenceError> errors_;
    std::vector<std::string> warnings_;
};

}  // namespace detail

/// Parses and validates raw EVIDENCE text. Reports every violation, not just the first.
inline EvidenceValidation validate_evidence(std::string_view raw, ValidationOptions opts = {}) {
    return detail::EvidenceValidator(opts).run(raw);
}

// ---------------------------------------------------------------------------
// Serialisation
// ---------------------------------------------------------------------------

inline json bbox_to_json(const BBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

inline json to_json(const EvidencePack& p) {
    json comps = json::array();
    for (const auto& c : p.components) {
        json jc{{"kind", c.kind}, {"bbox", bbox_to_json(c.bbox)}, {"confidence", c.confidence}};
        if (c.visible_text) jc["visible_text"] = *c.visible_text;
        comps.push_back(std::move(jc));
    }
    const auto& si = p.state_indicators;
    json ind = json::object();
    for (const auto& [k, v] : si.flags) ind[k] = v;
    if (si.progress_determinate_ratio) ind["progress_determinate_ratio"] = *si.progress_determinate_ratio;
    if (si.media != MediaState::None) ind[std::string(kMediaPlaying)] = std::string(media_state_name(si.media));
    if (!si.indicator_texts.empty()) ind["indicator_texts"] = si.indicator_texts;
    if (!si.confidence.empty()) ind["confidence"] = si.confidence;
    if (!si.evidence.empty()) {
        json ev = json::object();
        for (const auto& [k, e] : si.evidence) {
            json je = json::object();
            if (e.bbox) je["bbox"] = bbox_to_json(*e.bbox);
            if (e.text) je["text"] = *e.text;
            ev[k] = std::move(je);
        }
        ind["evidence"] = std::move(ev);
    }
    json out{{"components", std::move(comps)}, {"state_indicators", std::move(ind)},
             {"step", p.step}, {"timestamp_ms", p.timestamp_ms}};
    if (p.screen_summary) {
        const auto& s = *p.screen_summary;
        json js{{"description", s.description},
                {"primary_goal", s.primary_goal},
                {"evidence_bullets", s.evidence_bullets}};
        if (s.ui_class) js["ui_class"] = *s.ui_class;
        out["screen_summary"] = std::move(js);
    }
    return out;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed for '" + path + "'");
    return ss.str();
}

class EvidenceValidationError : public Error {
public:
    EvidenceValidationError(std::string source, std::vector<EvidenceError> errors)
        : Error(format(source, errors)), errors_(std::move(errors)) {}
    const std::vector<EvidenceError>& errors() const noexcept { return errors_; }

private:
    static std::string format(const std::string& source, const std::vector<EvidenceError>& errs) {
        std::string msg = "invalid evidence in " + source + ":";
        for (const auto& e : errs) msg += "\n  " + e.to_string();
        return msg;
    }
    std::vector<EvidenceError> errors_;
};

/// Reads and validates an evidence file; throws IoError or EvidenceValidationError.
inline EvidencePack load_evidence_file(const std::string& path, ValidationOptions opts = {}) {
    auto result = validate_evidence(read_text_file(path), opts);
    if (!result.ok()) throw EvidenceValidationError(path, std::move(result.errors));
    return std::move(*result.pack);
}

}  // namespace uixpose
