#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "zcl/analytics.hpp"
#include "zcl/config.hpp"
#include "zcl/error.hpp"
#include "zcl/model.hpp"
#include "zcl/report.hpp"
#include "zcl/simcache.hpp"
#include "zcl/synth.hpp"
#include "zcl/trace.hpp"

namespace zcl::cli {

using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInput = 2;

/// What a command read, wrote and was asked to do.
struct RunManifest {
    std::string command;
    std::vector<std::string> inputs;
    json parameters = json::object();
    std::optional<std::uint64_t> seed;
    std::vector<std::string> outputs;
    std::string status = "ok";
    std::string error;

    json to_json() const {
        json j = {{"command", command},   {"inputs", inputs},  {"parameters", parameters},
                  {"tool_version", kVersion}, {"outputs", outputs}, {"status", status}};
        j["seed"] = seed ? json(*seed) : json(nullptr);
        if (!error.empty()) j["error"] = error;
        return j;
    }
};

inline unsigned thread_cap() {
    if (const char* env = std::getenv("ZCL_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
    }
    return 1;
}

inline std::vector<TraceRecord> load_trace(const std::string& path, RunManifest& manifest) {
    manifest.inputs.push_back(path);
    auto records = read_canonical_csv_file(path);
    if (!is_time_ordered(records)) canonicalize(records);
    return records;
}

inline void write_json(const json& doc, const std::string& path, std::ostream& out, RunManifest& manifest) {
    if (path.empty() || path == "-") {
        out << doc.dump(2) << '\n';
        return;
    }
    auto file = open_output(path);
    file << doc.dump(2) << '\n';
    manifest.outputs.push_back(path);
}

template <typename Writer>
void write_file(const std::string& path, RunManifest& manifest, Writer&& writer) {
    auto file = open_output(path);
    writer(file);
    if (!file) throw IoError("write error on '" + path + "'");
    manifest.outputs.push_back(path);
}

// ---------------------------------------------------------------------------

struct IngestOptions {
    std::string log_path;
    std::string out_csv;
    std::string action_map;
};

inline void cmd_ingest(const IngestOptions& o, std::ostream& out, RunManifest& m) {
    m.inputs.push_back(o.log_path);
    m.parameters = {{"out", o.out_csv}, {"action_map", o.action_map}};
    SquidParseOptions options;
    if (!o.action_map.empty()) {
        m.inputs.push_back(o.action_map);
        const auto kv = KeyValueConfig::parse_file(o.action_map);
        for (const auto& [action, value] : kv.values()) options.action_cacheable[action] = csv::parse_bool(value, action);
    }
    auto in = open_input(o.log_path);
    const auto parsed = parse_squid_log(in, options);
    write_file(o.out_csv, m, [&](std::ostream& f) { write_canonical_csv(f, parsed.records); });
    out << parsed.records.size() << " records, " << parsed.malformed << " malformed\n";
}

// ---------------------------------------------------------------------------

struct SynthOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string out_csv;
    std::string changes_csv;
};

inline void cmd_synth(const SynthOptions& o, std::ostream& out, RunManifest& m) {
    KeyValueConfig kv;
    if (!o.config_path.empty()) {
        m.inputs.push_back(o.config_path);
        kv = KeyValueConfig::parse_file(o.config_path);
    }
    for (const auto& item : o.overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw FormatError("--set expects key=value, got '" + item + "'");
        kv.set(item.substr(0, eq), item.substr(eq + 1));
    }
    if (o.seed) kv.set("seed", std::to_string(*o.seed));
    const auto spec = workload_spec_from(kv);
    kv.require_all_used();
    m.seed = spec.seed;
    m.parameters = kv.values();
    const auto trace = generate_synthetic_trace(spec);
    write_file(o.out_csv, m, [&](std::ostream& f) { write_canonical_csv(f, trace.records); });
    if (!o.changes_csv.empty()) {
        write_file(o.changes_csv, m, [&](std::ostream& f) { trace.changes.write_csv(f); });
    }
    out << trace.records.size() << " records, " << trace.changes.event_count() << " change events\n";
}

// ---------------------------------------------------------------------------

struct AnalyzeOptions {
    std::string trace_path;
    std::optional<double> window_days;
    std::string cache_config;
    std::string changes_csv;
    std::optional<double> hit_ratio;
    std::string profile_csv;
    std::string out_json;
};

inline std::vector<TraceRecord> records_in(const std::vector<TraceRecord>& records, const TimeWindow& w) {
    std::vector<TraceRecord> out;
    for (const auto& r : records) {
        if (w.contains(r.timestamp_s)) out.push_back(r);
    }
    return out;
}

inline void cmd_analyze(const AnalyzeOptions& o, std::ostream& out, std::ostream& err, RunManifest& m) {
    const auto records = load_trace(o.trace_path, m);
    m.parameters = {{"window_days", o.window_days ? json(*o.window_days) : json(nullptr)},
                    {"cache_config", o.cache_config},
                    {"hit_ratio", o.hit_ratio ? json(*o.hit_ratio) : json(nullptr)}};
    if (records.empty()) throw EmptyProfileError("trace has no records");
    const TimeWindow window = o.window_days ? TimeWindow::from_days(records.front().timestamp_s, *o.window_days)
                                            : TimeWindow::covering(records);
    const auto profile = build_popularity_profile(records, window);
    if (profile.special_point() == 0) err << "warning: no object requested twice (M = 0); alpha is undefined\n";

    std::optional<SimulationResult> replay;
    std::optional<LifetimeStats> lifetimes;
    std::optional<ChangeSchedule> changes;
    if (!o.changes_csv.empty()) {
        m.inputs.push_back(o.changes_csv);
        auto in = open_input(o.changes_csv);
        changes = ChangeSchedule::read_csv(in);
    }
    if (!o.cache_config.empty()) {
        m.inputs.push_back(o.cache_config);
        const auto windowed = records_in(records, window);
        const auto kv = KeyValueConfig::parse_file(o.cache_config);
        const auto config = cache_config_from(kv, windowed);
        kv.require_all_used();
        replay = simulate(windowed, config, changes ? &*changes : nullptr, window.days());
        lifetimes = lifetimes_from_evictions(windowed, replay->evictions);
    }
    json row = report::table2_json(profile, replay ? &*replay : nullptr, lifetimes ? &*lifetimes : nullptr);
    const std::optional<double> h = o.hit_ratio ? o.hit_ratio : (replay ? std::optional(replay->hit_ratio()) : std::nullopt);
    if (h && *h > 0.0) row["renewal"] = report::renewal_json(renewal_observables(profile, *h));
    if (!o.profile_csv.empty()) write_file(o.profile_csv, m, [&](std::ostream& f) { write_profile_csv(f, profile); });
    write_json(row, o.out_json, out, m);
}

// ---------------------------------------------------------------------------

struct SimulateOptions {
    std::string trace_path;
    std::vector<std::string> config_paths;
    std::string changes_csv;
    std::optional<double> window_days;
    std::string out_json;
    std::string evictions_csv;
    std::string occupancy_csv;
};

inline json simulation_document(const std::vector<TraceRecord>& records, const SimulationResult& r) {
    json doc = {{"config", report::config_json(r.config)},
                {"table1", report::table1_json(r)},
                {"counts", report::counts_json(r)},
                {"lifetimes", report::lifetimes_json(lifetimes_from_evictions(records, r.evictions))}};
    try {
        const auto profile = build_popularity_profile(records);
        json pr = {{"k", profile.cacheable_requests()},
                   {"p", profile.unique_objects()},
                   {"M", profile.special_point()},
                   {"K", profile.total_requests()},
                   {"alpha", report::detail::number_or_null(report::try_alpha(profile))}};
        if (r.hit_ratio() > 0.0) pr["renewal"] = report::renewal_json(renewal_observables(profile, r.hit_ratio()));
        doc["profile"] = pr;
    } catch (const EmptyProfileError&) {
        doc["profile"] = nullptr;
    }
    return doc;
}

inline void cmd_simulate(const SimulateOptions& o, std::ostream& out, RunManifest& m) {
    const auto records = load_trace(o.trace_path, m);
    std::optional<ChangeSchedule> changes;
    if (!o.changes_csv.empty()) {
        m.inputs.push_back(o.changes_csv);
        auto in = open_input(o.changes_csv);
        changes = ChangeSchedule::read_csv(in);
    }
    std::vector<CacheConfig> configs;
    json params = json::array();
    for (const auto& path : o.config_paths) {
        m.inputs.push_back(path);
        const auto kv = KeyValueConfig::parse_file(path);
        configs.push_back(cache_config_from(kv, records));
        kv.require_all_used();
        params.push_back(kv.values());
    }
    m.parameters = {{"configs", params}, {"window_days", o.window_days ? json(*o.window_days) : json(nullptr)}};
    if (configs.empty()) throw DomainError("simulate needs at least one --config");

    std::vector<SimulationResult> results;
    if (configs.size() == 1) {
        results.push_back(simulate(records, configs.front(), changes ? &*changes : nullptr, o.window_days));
    } else {
        results = compare_policies(records, configs, changes ? &*changes : nullptr, thread_cap());
        if (o.window_days) {
            for (auto& r : results) r.window_days = *o.window_days;
        }
    }

    json doc;
    if (results.size() == 1) {
        doc = simulation_document(records, results.front());
    } else {
        doc = {{"results", json::array()}};
        for (const auto& r : results) doc["results"].push_back(simulation_document(records, r));
    }
    if (!o.evictions_csv.empty()) {
        write_file(o.evictions_csv, m, [&](std::ostream& f) { write_eviction_log_csv(f, results.front().evictions); });
    }
    if (!o.occupancy_csv.empty()) {
        write_file(o.occupancy_csv, m, [&](std::ostream& f) { write_occupancy_csv(f, results.front().occupancy); });
    }
    write_json(doc, o.out_json, out, m);
}

// ---------------------------------------------------------------------------

struct ReportOptions {
    std::vector<std::string> result_paths;
    std::string out_dir = ".";
    double overlay_alpha = 0.77;
    std::string profile_csv;
};

inline std::vector<RankedObject> read_profile_csv(const std::string& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line) || csv::split_line(line) != std::vector<std::string>{"rank", "object_id", "count"}) {
        throw FormatError("profile CSV: expected header 'rank,object_id,count'");
    }
    std::vector<RankedObject> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = csv::split_line(line);
        if (f.size() != 3) throw FormatError("profile CSV: expected 3 fields");
        out.push_back({f[1], csv::parse_uint(f[2], "count"), 0.0});
    }
    return out;
}

inline void cmd_report(const ReportOptions& o, std::ostream& out, RunManifest& m) {
    m.parameters = {{"out_dir", o.out_dir}, {"overlay_alpha", o.overlay_alpha}};
    std::vector<report::FigurePoint> points;
    for (const auto& path : o.result_paths) {
        m.inputs.push_back(path);
        auto in = open_input(path);
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::exception& e) {
            throw FormatError("'" + path + "' is not a result document: " + e.what());
        }
        try {
            if (doc.contains("results")) {
                for (const auto& r : doc.at("results")) points.push_back(report::figure_point_from(r));
            } else {
                points.push_back(report::figure_point_from(doc));
            }
        } catch (const json::exception& e) {
            throw FormatError("'" + path + "' is missing result fields: " + e.what());
        }
    }
    if (points.empty()) throw FormatError("report needs at least one simulation result");
    report::sort_by_size(points);

    const std::filesystem::path dir(o.out_dir);
    std::filesystem::create_directories(dir);
    write_file((dir / "fig2_lifetimes.csv").string(), m,
               [&](std::ostream& f) { report::write_lifetime_figure(f, points); });
    write_file((dir / "fig3_hit_ratio.csv").string(), m,
               [&](std::ostream& f) { report::write_hit_ratio_figure(f, points, o.overlay_alpha); });
    std::size_t files = 2;

    auto with_exponents = std::find_if(points.begin(), points.end(), [](const report::FigurePoint& p) {
        return p.alpha && p.alpha_r && p.unique_objects;
    });
    if (with_exponents != points.end()) {
        std::vector<RankedObject> measured;
        if (!o.profile_csv.empty()) {
            m.inputs.push_back(o.profile_csv);
            measured = read_profile_csv(o.profile_csv);
        }
        write_file((dir / "fig4_renewal.csv").string(), m, [&](std::ostream& f) {
            report::write_renewal_figure(f, *with_exponents->unique_objects, *with_exponents->alpha,
                                         *with_exponents->alpha_r, measured);
        });
        ++files;
    }
    out << points.size() << " points, " << files << " figure files\n";
}

// ---------------------------------------------------------------------------

/// Registers one `model` operation: named double flags, a required subset, and
/// an evaluator producing the JSON result.
struct ModelOperation {
    std::string name;
    std::string description;
    std::vector<std::pair<std::string, std::optional<double>>> flags;  // flag name, default
    std::function<json(const std::map<std::string, double>&, const std::map<std::string, bool>&)> evaluate;
};

inline std::vector<ModelOperation> model_operations() {
    using Args = std::map<std::string, double>;
    using Given = std::map<std::string, bool>;
    std::vector<ModelOperation> ops;
    ops.push_back({"zipf-norm", "Zipf normalization A over [1,p]", {{"alpha", {}}, {"p", {}}},
                   [](const Args& a, const Given&) { return json(model::zipf_normalization(a.at("alpha"), a.at("p"))); }});
    ops.push_back({"wolman",
                   "steady-state aggregate object hit ratio C_N",
                   {{"n", 1e5},
                    {"alpha", 0.8},
                    {"lambda-n", 1e4},
                    {"mu", 0.0},
                    {"mu-popular", {}},
                    {"mu-unpopular", {}},
                    {"cutoff", {}},
                    {"alpha-r", {}},
                    {"tst", {}}},
                   [](const Args& a, const Given& g) {
                       model::WolmanParams params;
                       params.universe = a.at("n");
                       params.alpha = a.at("alpha");
                       params.aggregate_rate = Rate::per_day(a.at("lambda-n"));
                       if (g.at("alpha-r") || g.at("tst")) {
                           params.change = model::RenewalModel{a.at("alpha"), a.at("alpha-r"), a.at("tst"), a.at("n")};
                       } else if (g.at("mu-popular") || g.at("mu-unpopular") || g.at("cutoff")) {
                           params.change = model::TwoValuedChangeRate{Rate::per_day(a.at("mu-popular")),
                                                                      Rate::per_day(a.at("mu-unpopular")),
                                                                      a.at("cutoff")};
                       } else {
                           params.change = model::ConstantChangeRate{Rate::per_day(a.at("mu"))};
                       }
                       const auto r = model::wolman_evaluate(params);
                       return json{{"C_N", r.hit_ratio}, {"C", r.zipf_integral}, {"error_estimate", r.error_estimate}};
                   }});
    ops.push_back({"mu",
                   "rank-dependent document change rate (1/day)",
                   {{"alpha", {}}, {"alpha-r", {}}, {"tst", {}}, {"quantile", {}}, {"rank", {}}, {"p", {}}},
                   [](const Args& a, const Given& g) {
                       double mu = 0.0;
                       if (g.at("rank")) {
                           mu = model::mu_of_rank({a.at("alpha"), a.at("alpha-r"), a.at("tst"), a.at("p")}, a.at("rank"));
                       } else {
                           mu = model::mu_at_quantile(a.at("alpha"), a.at("alpha-r"), a.at("tst"), a.at("quantile"));
                       }
                       return json{{"mu_per_day", mu}, {"period_days", mu > 0.0 ? json(1.0 / mu) : json(nullptr)}};
                   }});
    ops.push_back({"ideal-hit", "ideal hit-ratio bound, optionally renewal-aware", {{"alpha", {}}, {"alpha-r", {}}},
                   [](const Args& a, const Given& g) {
                       return json(g.at("alpha-r") ? model::ideal_hit_ratio_with_renewal(a.at("alpha"), a.at("alpha-r"))
                                                   : model::ideal_hit_ratio(a.at("alpha")));
                   }});
    ops.push_back({"expected-hit", "hit ratio of a kernel of S_k objects", {{"pc", {}}, {"exponent", {}}, {"p", {}}, {"sk", {}}},
                   [](const Args& a, const Given&) {
                       return json(model::expected_hit_ratio(a.at("pc"), a.at("exponent"), a.at("p"), a.at("sk")));
                   }});
    ops.push_back({"hit-scaling", "power-law hit ratio extrapolation", {{"h1", {}}, {"s1", {}}, {"s2", {}}, {"alpha", {}}},
                   [](const Args& a, const Given&) {
                       return json(model::hit_scaling(a.at("h1"), a.at("s1"), a.at("s2"), a.at("alpha")));
                   }});
    ops.push_back({"kernel-size", "kernel size in objects", {{"alpha", {}}, {"hit", {}}, {"nu-out", {}}, {"t-eff", {}}},
                   [](const Args& a, const Given&) {
                       return json(model::kernel_size(a.at("alpha"), a.at("hit"), a.at("nu-out"), a.at("t-eff")));
                   }});
    ops.push_back({"kernel-ratio", "kernel to accessory ratio", {{"alpha", {}}, {"t-eff", {}}, {"t-u", {}}, {"m", {}}, {"p", {}}},
                   [](const Args& a, const Given& g) {
                       std::optional<double> mm, pp;
                       if (g.at("m")) mm = a.at("m");
                       if (g.at("p")) pp = a.at("p");
                       const auto r = model::kernel_accessory_ratio(a.at("alpha"), a.at("t-eff"), a.at("t-u"), mm, pp);
                       return json{{"analytic", r.analytic},
                                   {"empirical", r.empirical ? json(*r.empirical) : json(nullptr)}};
                   }});
    ops.push_back({"residuals", "special-point residuals", {{"a", {}}, {"k-r", {}}, {"m", {}}, {"p", {}}, {"alpha-r", {}}},
                   [](const Args& a, const Given&) {
                       const auto r = model::special_point_residuals(a.at("a"), a.at("k-r"), a.at("m"), a.at("p"),
                                                                     a.at("alpha-r"));
                       return json{{"r_M", r.at_m}, {"r_p", r.at_p}};
                   }});
    ops.push_back({"alpha", "Zipf exponent from special points", {{"m", {}}, {"p", {}}, {"k", {}}},
                   [](const Args& a, const Given&) {
                       return json(alpha_from_special_points(a.at("m"), a.at("p"), a.at("k")));
                   }});
    ops.push_back({"pc", "cacheable fraction", {{"k", {}}, {"nu-out", {}}, {"tst", {}}},
                   [](const Args& a, const Given&) {
                       return json(compute_cacheable_fraction(a.at("k"), a.at("nu-out"), a.at("tst")));
                   }});
    ops.push_back({"renewal", "renewal observables", {{"k", {}}, {"p", {}}, {"m", {}}, {"total", {}}, {"hit", {}}},
                   [](const Args& a, const Given&) {
                       return report::renewal_json(
                           renewal_observables(a.at("k"), a.at("p"), a.at("m"), a.at("total"), a.at("hit")));
                   }});
    ops.push_back({"alpha-growth", "growth constant of alpha with window length",
                   {{"alpha1", {}}, {"t1", {}}, {"alpha2", {}}, {"t2", {}}},
                   [](const Args& a, const Given&) {
                       return json(alpha_growth_constant(a.at("alpha1"), a.at("t1"), a.at("alpha2"), a.at("t2")));
                   }});
    return ops;
}

// ---------------------------------------------------------------------------

/// Runs the command line; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Web proxy cache laboratory: trace ingestion, Zipf analytics, steady-state models, simulation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    std::string manifest_path;
    app.add_option("--manifest", manifest_path, "write a JSON run manifest to this path");

    RunManifest manifest;
    std::function<void()> action;

    IngestOptions ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "convert a native Squid access log to canonical CSV");
    ingest_cmd->add_option("log", ingest.log_path, "Squid access log")->required();
    ingest_cmd->add_option("-o,--out", ingest.out_csv, "canonical CSV output")->required();
    ingest_cmd->add_option("--action-map", ingest.action_map, "key=value file: ACTION_CODE = 0|1");
    ingest_cmd->callback([&] { action = [&] { cmd_ingest(ingest, out, manifest); }; });

    SynthOptions synth;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic Zipf/renewal workload");
    synth_cmd->add_option("-c,--config", synth.config_path, "workload key=value file");
    synth_cmd->add_option("--set", synth.overrides, "override one key (key=value)");
    synth_cmd->add_option("--seed", synth.seed, "random seed");
    synth_cmd->add_option("-o,--out", synth.out_csv, "canonical CSV output")->required();
    synth_cmd->add_option("--changes", synth.changes_csv, "ground-truth change events CSV output");
    synth_cmd->callback([&] { action = [&] { cmd_synth(synth, out, manifest); }; });

    AnalyzeOptions analyze;
    auto* analyze_cmd = app.add_subcommand("analyze", "popularity profile and cache parameters of a trace");
    analyze_cmd->add_option("trace", analyze.trace_path, "canonical CSV trace")->required();
    analyze_cmd->add_option("--window-days", analyze.window_days, "observation window from the first record");
    analyze_cmd->add_option("--cache-config", analyze.cache_config, "replay config for lifetimes");
    analyze_cmd->add_option("--changes", analyze.changes_csv, "ground-truth change events for the replay");
    analyze_cmd->add_option("--hit-ratio", analyze.hit_ratio, "measured hit ratio for renewal observables");
    analyze_cmd->add_option("--profile", analyze.profile_csv, "write the ranked profile CSV");
    analyze_cmd->add_option("-o,--out", analyze.out_json, "JSON output (default stdout)");
    analyze_cmd->callback([&] { action = [&] { cmd_analyze(analyze, out, err, manifest); }; });

    SimulateOptions sim;
    auto* sim_cmd = app.add_subcommand("simulate", "trace-driven cache simulation");
    sim_cmd->add_option("trace", sim.trace_path, "canonical CSV trace")->required();
    sim_cmd->add_option("-c,--config", sim.config_paths, "cache key=value file (repeatable)")->required();
    sim_cmd->add_option("--changes", sim.changes_csv, "ground-truth change events CSV");
    sim_cmd->add_option("--window-days", sim.window_days, "T_st used for rates (default: trace span)");
    sim_cmd->add_option("-o,--out", sim.out_json, "JSON output (default stdout)");
    sim_cmd->add_option("--evictions", sim.evictions_csv, "eviction log CSV (first config)");
    sim_cmd->add_option("--occupancy", sim.occupancy_csv, "occupancy series CSV (first config)");
    sim_cmd->callback([&] { action = [&] { cmd_simulate(sim, out, manifest); }; });

    ReportOptions rep;
    auto* rep_cmd = app.add_subcommand("report", "figure data from simulation results");
    rep_cmd->add_option("results", rep.result_paths, "simulate JSON documents");
    rep_cmd->add_option("-d,--out-dir", rep.out_dir, "output directory");
    rep_cmd->add_option("--overlay-alpha", rep.overlay_alpha, "exponent of the power-law overlay");
    rep_cmd->add_option("--profile", rep.profile_csv, "ranked profile CSV for the measured series");
    rep_cmd->callback([&] { action = [&] { cmd_report(rep, out, manifest); }; });

    auto* model_cmd = app.add_subcommand("model", "evaluate an analytical model formula");
    model_cmd->require_subcommand(1);
    const auto ops = model_operations();
    std::map<std::string, double> model_values;
    std::map<std::string, CLI::Option*> model_flags;
    for (const auto& op : ops) {
        auto* sub = model_cmd->add_subcommand(op.name, op.description);
        for (const auto& [flag, fallback] : op.flags) {
            const std::string key = op.name + "/" + flag;
            model_values[key] = fallback.value_or(0.0);
            auto* opt = sub->add_option("--" + flag, model_values[key]);
            model_flags[key] = opt;
        }
        sub->callback([&, name = op.name] {
            action = [&, name] {
                const auto& chosen = *std::find_if(ops.begin(), ops.end(), [&](const auto& o) { return o.name == name; });
                std::map<std::string, double> args;
                std::map<std::string, bool> given;
                json inputs = json::object();
                for (const auto& [flag, fallback] : chosen.flags) {
                    const std::string key = name + "/" + flag;
                    given[flag] = model_flags[key]->count() > 0;
                    if (given[flag] || fallback) {
                        args[flag] = model_values[key];
                        inputs[flag] = args[flag];
                    }
                }
                manifest.parameters = inputs;
                const json doc = {{"operation", name}, {"inputs", inputs}, {"result", chosen.evaluate(args, given)}};
                out << doc.dump(2) << '\n';
            };
        });
    }

    int code = kExitOk;
    try {
        app.parse(argc, argv);
        manifest.command = app.get_subcommands().front()->get_name();
        if (manifest.command == "model") manifest.command += " " + model_cmd->get_subcommands().front()->get_name();
        action();
    } catch (const CLI::ParseError& e) {
        code = app.exit(e, out, err);
        if (code != 0) code = kExitInput;
        manifest.status = "error";
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        code = kExitInput;
        manifest.status = "error";
        manifest.error = e.what();
    } catch (const std::out_of_range& e) {
        // Missing required model flag.
        err << "error: missing required flag for this operation\n";
        code = kExitInput;
        manifest.status = "error";
        manifest.error = e.what();
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        code = kExitInternal;
        manifest.status = "error";
        manifest.error = e.what();
    }
    if (!manifest_path.empty()) {
        try {
            auto f = open_output(manifest_path);
            f << manifest.to_json().dump(2) << '\n';
        } catch (const std::exception& e) {
            err << "error: cannot write manifest: " << e.what() << '\n';
            if (code == kExitOk) code = kExitInput;
        }
    }
    return code;
}

}  // namespace zcl::cli
