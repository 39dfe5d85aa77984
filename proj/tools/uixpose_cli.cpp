// uixpose command-line driver.
//
//   uixpose validate EVIDENCE.json
//   uixpose analyze --session DIR [--session DIR ...] --out DIR [--config F] [--provider P]
//                   [--gamma G] [--theta T] [--jobs N]
//   uixpose calibrate --table T.csv --roles R.json --out FRAGMENT.json [--q Q]
//   uixpose constants --corpus DIR [--out F]
//   uixpose gen-fixture KIND --out DIR [--seed N] [--steps N]
//
// Exit codes: 0 success, 1 operational error, 2 analyze emitted an Anomaly verdict.

#include <atomic>
#include <filesystem>
#include <future>
#include <iostream>
#include <mutex>
#include <random>
#include <thread>

#include <CLI11.hpp>

#include "uixpose/uixpose.hpp"

namespace fs = std::filesystem;
using namespace uixpose;

namespace {

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kAnomaly = 2;

int cmd_validate(const std::string& path, double low_conf) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFail;
    }
    ValidationOptions opts;
    opts.low_confidence_threshold = low_conf;
    const auto v = validate_evidence(text, opts);
    for (const auto& w : v.warnings) std::cerr << "warning: " << w << "\n";
    if (!v.ok()) {
        for (const auto& e : v.errors) std::cout << path << ": " << e.to_string() << "\n";
        std::cout << "INVALID (" << v.errors.size() << " violation" << (v.errors.size() == 1 ? "" : "s") << ")\n";
        return kFail;
    }
    std::cout << "OK: " << v.pack->components.size() << " components\n";
    return kOk;
}

struct AnalyzeArgs {
    std::vector<std::string> sessions;
    std::string out;
    ConfigFlags flags;
    std::string provider;
    std::size_t jobs = 1;
    std::optional<double> dt;
};

/// Returns the session's anomaly count; throws on operational errors.
std::size_t analyze_one(const std::string& session, const fs::path& out, const EngineConfig& cfg,
                        std::optional<double> dt, std::mutex& io) {
    LoadOptions lo;
    lo.validation = cfg.validation;
    lo.dt_seconds = dt;
    if (!cfg.trackers_path.empty()) lo.trackers = TrackerList::parse(read_text_file(cfg.trackers_path));
    const auto bundle = load_session(session, lo);

    PipelineOptions po;
    po.chain = make_chain(cfg.provider, bundle.root);
    const auto report = run_session(bundle, cfg, po);
    const auto paths = write_report(report, out.string());

    std::lock_guard<std::mutex> lock(io);
    std::cout << "session " << session << ": " << report.steps.size() << " steps, " << report.totals[0]
              << " Authorised, " << report.totals[1] << " Anomaly, " << report.totals[2] << " Uncertain";
    if (report.degraded_steps) std::cout << ", " << report.degraded_steps << " degraded step(s)";
    std::cout << "\n" << class_table_text(report.by_class);
    std::cout << "wrote " << paths.json << ", " << paths.csv << ", " << paths.series << "\n";
    return report.anomalies();
}

int cmd_analyze(AnalyzeArgs args) {
    EngineConfig cfg;
    try {
        if (!args.provider.empty()) {
            auto k = parse_provider_kind(args.provider);
            if (!k) throw ConfigError("provider.kind", "--provider must be builtin, remote or replay");
            args.flags.provider = *k;
        }
        cfg = resolve_config(args.flags);
    } catch (const ConfigError& e) {
        std::cerr << "config error [" << e.key() << "]: " << e.what() << "\n";
        return kFail;
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kFail;
    }
    if (args.sessions.empty()) {
        std::cerr << "error: at least one --session is required\n";
        return kFail;
    }

    const bool multi = args.sessions.size() > 1;
    std::mutex io;
    std::atomic<std::size_t> next{0}, anomalies{0};
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (std::size_t i = next++; i < args.sessions.size(); i = next++) {
            const auto& s = args.sessions[i];
            const fs::path out = multi ? fs::path(args.out) / fs::path(s).filename() : fs::path(args.out);
            try {
                anomalies += analyze_one(s, out, cfg, args.dt, io);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(io);
                std::cerr << "error: " << s << ": " << e.what() << "\n";
                failed = true;
            }
        }
    };
    const std::size_t n = std::clamp<std::size_t>(args.jobs, 1, args.sessions.size());
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    if (failed) return kFail;
    return anomalies > 0 ? kAnomaly : kOk;
}

int cmd_calibrate(const std::string& table_path, const std::string& roles_path, const std::string& out, double q) {
    try {
        auto table = PairedDeltaTable::parse_csv(read_text_file(table_path));
        json roles;
        try {
            roles = json::parse(read_text_file(roles_path));
        } catch (const json::parse_error& e) {
            throw ParseError(roles_path + ": " + e.what());
        }
        table.apply_roles(roles);
        if (auto issues = table.check(); !issues.empty()) throw Error(issues.front());

        CalibrationOptions opt;
        opt.q = q;
        const auto h = calibrate_h(table, opt);
        const auto m = calibrate_m(table, opt);
        const auto r = calibrate_r(table, opt);
        for (const auto* w : {&h.warnings, &m.warnings, &r.warnings})
            for (const auto& s : *w) std::cerr << s << "\n";

        const auto parent = fs::path(out).parent_path();
        if (!parent.empty()) fs::create_directories(parent);
        write_text(out, calibration_fragment(h, m, r).dump(2) + "\n");
        std::cout << calibration_report(h, m, r).dump(2) << "\n";
        std::cout << "wrote " << out << "\n";
        return kOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFail;
    }
}

int cmd_constants(const std::string& corpus, const std::string& out, const ConfigFlags& flags) {
    try {
        const auto cfg = resolve_config(flags);
        if (!fs::is_directory(corpus)) throw IoError("corpus directory '" + corpus + "' does not exist");
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(corpus))
            if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());

        AxisSums sums;
        std::size_t rejected = 0;
        for (const auto& f : files) {
            auto v = validate_evidence(read_text_file(f.string()), cfg.validation);
            if (!v.ok()) {
                ++rejected;
                std::cerr << "skipped " << f.string() << ": " << v.errors.front().to_string() << "\n";
                continue;
            }
            sums.push(presquash_sums(*v.pack, cfg.prior));
        }
        const auto k = estimate_axis_constants(sums);
        json j;
        for (Axis a : kAxes)
            j["constants"][std::string(axis_name(a))] = {{"kappa", k.kappa[a]}, {"tau", k.tau[a]}};
        std::cerr << "estimated from " << sums.net.size() << " pack(s), " << rejected << " rejected\n";
        const auto text = j.dump(2) + "\n";
        if (out.empty()) {
            std::cout << text;
        } else {
            const auto parent = fs::path(out).parent_path();
            if (!parent.empty()) fs::create_directories(parent);
            write_text(out, text);
            std::cout << "wrote " << out << "\n";
        }
        return kOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error [" << e.key() << "]: " << e.what() << "\n";
        return kFail;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFail;
    }
}

int cmd_gen_fixture(const std::string& kind_name, const std::string& out, std::optional<std::uint64_t> seed,
                    std::size_t steps) {
    const auto kind = parse_fixture_kind(kind_name);
    if (!kind) {
        std::cerr << "error: unknown fixture kind '" << kind_name << "' (expected benign-idle, benign-heavy, exfil, "
                  << "crash-burst)\n";
        return kFail;
    }
    if (!seed) {
        std::random_device rd;
        seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        std::cerr << "no --seed given; using seed " << *seed << "\n";
    }
    try {
        FixtureOptions opt;
        opt.steps = steps;
        const auto s = gen_fixture(*kind, out, *seed, opt);
        std::cout << "wrote " << kind_name << " fixture (" << s.steps << " steps, seed " << *seed << ") to " << out
                  << "\n";
        return kOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFail;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Intention-behaviour alignment analysis over recorded session bundles"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("uixpose 1.0.0"));

    auto* validate = app.add_subcommand("validate", "Validate an EVIDENCE JSON file");
    std::string ev_path;
    double low_conf = 0.2;
    validate->add_option("evidence", ev_path, "Evidence JSON file")->required();
    validate->add_option("--low-confidence", low_conf, "Low-confidence flag threshold")->capture_default_str();

    auto* analyze = app.add_subcommand("analyze", "Score session bundles and write reports");
    AnalyzeArgs aa;
    std::string cfg_path;
    double gamma = 0, theta = 0;
    double dt = 0;
    analyze->add_option("--session", aa.sessions, "Session directory (repeatable)")->required();
    analyze->add_option("--out", aa.out, "Output directory")->required();
    auto* cfg_opt = analyze->add_option("--config", cfg_path, "Config JSON file");
    analyze->add_option("--provider", aa.provider, "Judge provider: builtin, remote or replay")
        ->check(CLI::IsMember({"builtin", "remote", "replay"}));
    auto* gamma_opt = analyze->add_option("--gamma", gamma, "RBF sensitivity");
    auto* theta_opt = analyze->add_option("--theta", theta, "Misalignment threshold");
    auto* dt_opt = analyze->add_option("--dt", dt, "Sampling interval override in seconds");
    analyze->add_option("--jobs", aa.jobs, "Sessions analysed in parallel")->check(CLI::PositiveNumber);

    auto* calibrate = app.add_subcommand("calibrate", "Derive channel hyperparameters from a paired-delta table");
    std::string table, roles, cal_out;
    double q = 0.05;
    calibrate->add_option("--table", table, "Paired-delta CSV")->required();
    calibrate->add_option("--roles", roles, "Column-role JSON sidecar")->required();
    calibrate->add_option("--out", cal_out, "Config fragment to write")->required();
    calibrate->add_option("--q", q, "False discovery rate")->check(CLI::Range(0.0, 1.0))->capture_default_str();

    auto* constants = app.add_subcommand("constants", "Estimate axis caps and scales from an evidence corpus");
    std::string corpus, const_out, const_cfg;
    constants->add_option("--corpus", corpus, "Directory of evidence JSON files")->required();
    constants->add_option("--out", const_out, "Write the constants fragment here instead of stdout");
    auto* const_cfg_opt = constants->add_option("--config", const_cfg, "Config JSON file (prior source)");

    auto* gen = app.add_subcommand("gen-fixture", "Generate a synthetic session bundle");
    std::string kind, gen_out;
    std::uint64_t seed = 0;
    std::size_t steps = 60;
    gen->add_option("kind", kind, "benign-idle, benign-heavy, exfil or crash-burst")->required();
    gen->add_option("--out", gen_out, "Output directory")->required();
    auto* seed_opt = gen->add_option("--seed", seed, "RNG seed");
    gen->add_option("--steps", steps, "Number of steps")->check(CLI::PositiveNumber)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kFail;
    }

    if (*validate) return cmd_validate(ev_path, low_conf);
    if (*analyze) {
        if (*cfg_opt) aa.flags.config_path = cfg_path;
        if (*gamma_opt) aa.flags.gamma = gamma;
        if (*theta_opt) aa.flags.theta = theta;
        if (*dt_opt) aa.dt = dt;
        return cmd_analyze(std::move(aa));
    }
    if (*calibrate) return cmd_calibrate(table, roles, cal_out, q);
    if (*constants) {
        ConfigFlags f;
        if (*const_cfg_opt) f.config_path = const_cfg;
        return cmd_constants(corpus, const_out, f);
    }
    if (*gen) return cmd_gen_fixture(kind, gen_out, *seed_opt ? std::optional<std::uint64_t>(seed) : std::nullopt, steps);
    return kFail;
}
