#ifndef BCH_TOOLS_CLI_APP_HPP
#define BCH_TOOLS_CLI_APP_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bch/bundle_analysis.hpp"
#include "bch/discovery.hpp"
#include "bch/miwtr.hpp"
#include "bch/synthgen.hpp"
#include "bch/timeseries.hpp"
#include "bch/tsgraph.hpp"

namespace bch::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* tool_version = "0.1.0";
inline constexpr int config_version = 1;

inline int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::estimation: return 4;
    case ErrorKind::invariant: return 5;
    }
    return 5;
}

inline std::uint64_t fnv1a(const std::string& bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

inline std::string read_file(const fs::path& p, const char* op)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw ParseError("cli", op, "cannot open '" + p.string() + "'", "check the path");
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline std::ofstream open_output(const fs::path& p, const char* op)
{
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(p, std::ios::binary);
    if (!out) {
        throw ConfigError("cli", op, "cannot write '" + p.string() + "'", "check that the output location is writable");
    }
    return out;
}

inline json parse_json(const std::string& text, const char* op)
{
    try {
        return json::parse(text);
    }
    catch (const json::exception& ex) {
        throw ParseError("cli", op, std::string("invalid JSON: ") + ex.what());
    }
}

inline std::set<std::string> split_names(const std::string& list)
{
    std::set<std::string> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = detail::trim(item);
        if (!item.empty()) {
            out.insert(item);
        }
    }
    return out;
}

// ---------------------------------------------------------------- run config

struct RunConfig {
    fs::path data_path;
    std::string missing_token = "NA";
    bool standardize = true;
    std::optional<fs::path> graph_path;
    BundleSpec bundle;
    SweepConfig sweep;
    DiscoveryConfig discovery;
    fs::path output_dir;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
};

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object()) {
        throw ConfigError("cli", "load_config", "'" + where + "' must be an object");
    }
    for (const auto& [key, value] : j.items()) {
        if (!allowed.contains(key)) {
            throw ConfigError("cli", "load_config", "unknown key '" + key + "' in " + where,
                              "see the configuration section of the README");
        }
    }
}

inline std::set<std::string> name_set(const json& j, const char* key)
{
    if (j.at(key).is_string()) {
        return split_names(j.at(key).get<std::string>());
    }
    const auto v = j.at(key).get<std::vector<std::string>>();
    return {v.begin(), v.end()};
}

inline fs::path resolve(const fs::path& base, const std::string& p)
{
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

inline std::vector<int> tau_values(const json& s)
{
    if (s.contains("tau_values")) {
        return s.at("tau_values").get<std::vector<int>>();
    }
    if (s.contains("tau")) {
        const auto& r = s.at("tau");
        reject_unknown_keys(r, {"start", "stop", "step"}, "sweep.tau");
        const int start = r.at("start").get<int>();
        const int stop = r.at("stop").get<int>();
        const int step = r.value("step", 1);
        if (step < 1) {
            throw ConfigError("cli", "load_config", "sweep.tau.step must be >= 1");
        }
        std::vector<int> out;
        for (int t = start; t <= stop; t += step) {
            out.push_back(t);
        }
        return out;
    }
    throw ConfigError("cli", "load_config", "sweep needs 'tau_values' or a 'tau' range");
}

} // namespace detail

/// Parses a version-1 run configuration. Relative paths resolve against `base_dir`.
inline RunConfig parse_run_config(const json& j, const fs::path& base_dir)
{
    using detail::reject_unknown_keys;
    try {
        reject_unknown_keys(j,
                            {"config_version", "data_path", "missing_token", "standardize", "graph_path", "target",
                             "bundle_m", "bundle_n", "sweep", "estimator", "discovery", "output_dir", "seed"},
                            "the run configuration");
        const int version = j.value("config_version", config_version);
        if (version != config_version) {
            throw ConfigError("cli", "load_config", "unsupported config_version " + std::to_string(version),
                              "this build reads config_version 1");
        }
        RunConfig rc;
        rc.data_path = detail::resolve(base_dir, j.at("data_path").get<std::string>());
        rc.missing_token = j.value("missing_token", std::string("NA"));
        rc.standardize = j.value("standardize", true);
        if (j.contains("graph_path") && !j.at("graph_path").is_null()) {
            rc.graph_path = detail::resolve(base_dir, j.at("graph_path").get<std::string>());
        }
        rc.bundle.target = j.at("target").get<std::string>();
        rc.bundle.bundle_m = detail::name_set(j, "bundle_m");
        rc.bundle.bundle_n = detail::name_set(j, "bundle_n");
        rc.output_dir = detail::resolve(base_dir, j.value("output_dir", std::string("bch_output")));
        rc.seed = j.value("seed", std::uint64_t{0});

        EstimatorConfig est;
        est.seed = rc.seed;
        if (j.contains("estimator")) {
            const auto& e = j.at("estimator");
            reject_unknown_keys(e, {"noise_amplitude", "seed"}, "estimator");
            est.noise_amplitude = e.value("noise_amplitude", est.noise_amplitude);
            est.seed = e.value("seed", est.seed);
        }

        const auto& s = j.at("sweep");
        reject_unknown_keys(s, {"tau_values", "tau", "orders", "k_values", "use_miwtr", "direct_total_pid"}, "sweep");
        rc.sweep.tau_values = detail::tau_values(s);
        if (s.contains("orders")) {
            rc.sweep.orders.clear();
            for (const auto& o : s.at("orders")) {
                rc.sweep.orders.push_back(parse_order(o.get<std::string>()));
            }
        }
        rc.sweep.k_values = s.value("k_values", rc.sweep.k_values);
        rc.sweep.use_miwtr = s.value("use_miwtr", false);
        rc.sweep.direct_total_pid = s.value("direct_total_pid", false);
        rc.sweep.estimator = est;
        rc.sweep.validate();

        rc.discovery.estimator = est;
        if (j.contains("discovery")) {
            const auto& d = j.at("discovery");
            reject_unknown_keys(d, {"max_lag", "alpha", "n_perm", "max_condition_size", "max_sweeps", "k"},
                                "discovery");
            rc.discovery.max_lag = d.value("max_lag", rc.discovery.max_lag);
            rc.discovery.alpha = d.value("alpha", rc.discovery.alpha);
            rc.discovery.n_perm = d.value("n_perm", rc.discovery.n_perm);
            rc.discovery.max_condition_size = d.value("max_condition_size", rc.discovery.max_condition_size);
            rc.discovery.max_sweeps = d.value("max_sweeps", rc.discovery.max_sweeps);
            rc.discovery.estimator.k = d.value("k", rc.discovery.estimator.k);
        }
        bch::detail::check_discovery_config(rc.discovery);
        rc.config_hash = fnv1a(j.dump());
        return rc;
    }
    catch (const json::exception& ex) {
        throw ConfigError("cli", "load_config", std::string("malformed configuration: ") + ex.what(),
                          "see the configuration section of the README");
    }
}

inline RunConfig load_run_config(const fs::path& path)
{
    const json j = parse_json(read_file(path, "load_config"), "load_config");
    return parse_run_config(j, path.parent_path());
}

inline TimeSeriesSet load_data(const fs::path& path, const std::string& missing_token, bool standardize_data)
{
    CsvOptions opt;
    opt.missing_token = missing_token;
    TimeSeriesSet ts = load_csv(path.string(), opt);
    return standardize_data ? standardize(ts) : ts;
}

inline void check_graph_against_data(const StationaryGraph& g, const TimeSeriesSet& ts)
{
    for (const auto& v : g.variables()) {
        const auto& names = ts.variable_names();
        if (std::find(names.begin(), names.end(), v) == names.end()) {
            throw LookupError("cli", "load_graph", "graph variable '" + v + "' is not a data column",
                              "graph variable names must match the data header");
        }
    }
}

// ---------------------------------------------------------------- report

/// Long-format plot series: one file per (order, k), components R, S, Um, Un of J then D.
inline std::vector<fs::path> write_plot_files(const std::vector<SweepRow>& rows, const fs::path& out_dir)
{
    static const std::vector<std::string> components{"R_J", "S_J", "Um_J", "Un_J", "R_D", "S_D", "Um_D", "Un_D"};
    const std::string header = "tau,order,k,component,value\n";
    std::vector<fs::path> written;
    if (rows.empty()) {
        auto out = open_output(out_dir / "plot.csv", "report");
        out << header;
        written.push_back(out_dir / "plot.csv");
        return written;
    }
    std::map<std::pair<std::string, int>, std::vector<const SweepRow*>> groups;
    for (const auto& r : rows) {
        groups[{r.order, r.k}].push_back(&r);
    }
    for (const auto& [key, group] : groups) {
        const fs::path p = out_dir / ("plot_" + key.first + "_k" + std::to_string(key.second) + ".csv");
        auto out = open_output(p, "report");
        out << header;
        for (const auto* r : group) {
            for (const auto& c : components) {
                out << r->tau << ',' << r->order << ',' << r->k << ',' << c << ',';
                if (const auto v = r->get(c)) {
                    out << bch::detail::format_double(*v);
                }
                out << '\n';
            }
        }
        written.push_back(p);
    }
    return written;
}

// ---------------------------------------------------------------- sweep pipeline

struct PipelineResult {
    fs::path graph_file;
    fs::path sweep_file;
    fs::path reduction_file;
    fs::path manifest_file;
    bool discovered = false;
};

/// Full pipeline: load, discover or ingest the graph, reduce, sweep, manifest.
inline PipelineResult run_pipeline(const RunConfig& rc, std::ostream& log)
{
    const TimeSeriesSet ts = load_data(rc.data_path, rc.missing_token, rc.standardize);
    rc.bundle.validate(ts.variable_names());

    PipelineResult res;
    fs::create_directories(rc.output_dir);
    StationaryGraph g;
    std::string discovery_note;
    if (rc.graph_path) {
        g = load_graph(rc.graph_path->string());
        check_graph_against_data(g, ts);
        discovery_note = "skipped: graph supplied by graph_path";
    }
    else {
        const DiscoveryResult d = discover_graph(ts, rc.discovery);
        g = d.graph;
        res.discovered = true;
        discovery_note = d.converged ? "performed" : "performed; stage 2 did not converge";
        auto rep = open_output(rc.output_dir / "discovery_report.txt", "run");
        write_discovery_report(rep, d);
        log << "discovered " << g.edges().size() << " edges\n";
    }
    rc.bundle.validate(g.variables());
    res.graph_file = rc.output_dir / "graph.json";
    save_graph(g, res.graph_file.string());

    // Reduction report for every tau with a non-empty W.
    res.reduction_file = rc.output_dir / "reduction_report.txt";
    {
        auto rep = open_output(res.reduction_file, "run");
        rep << "# MIWTR " << (rc.sweep.use_miwtr ? "applied to the sweep" : "not applied to the sweep (report only)")
            << '\n';
        MitCache cache;
        EstimatorConfig est = rc.sweep.estimator;
        est.k = rc.sweep.k_values.front();
        for (int tau : rc.sweep.tau_values) {
            if (compute_W(g, rc.bundle, tau).empty()) {
                rep << "# tau " << tau << ": W is empty\n";
                continue;
            }
            try {
                write_reduction_report(rep, reduce_W(g, rc.bundle, tau, ts, est, &cache), tau);
            }
            catch (const Error& ex) {
                rep << "# tau " << tau << ": " << to_string(ex.kind()) << " error: " << ex.what() << '\n';
            }
        }
    }

    std::vector<std::string> messages;
    const auto cells = sweep(ts, g, rc.bundle, rc.sweep, &messages);
    res.sweep_file = rc.output_dir / "sweep.csv";
    {
        auto out = open_output(res.sweep_file, "run");
        write_sweep_csv(out, cells);
    }
    std::size_t failed = 0;
    for (const auto& c : cells) {
        failed += c.error.empty() ? 0 : 1;
    }
    for (const auto& m : messages) {
        log << "gap: " << m << '\n';
    }

    json manifest;
    manifest["tool"] = "bch";
    manifest["tool_version"] = tool_version;
    manifest["config_version"] = config_version;
    manifest["config_hash"] = "fnv1a64:" + hex64(rc.config_hash);
    manifest["data_hash"] = "fnv1a64:" + hex64(fnv1a(read_file(rc.data_path, "run")));
    manifest["seeds"] = {{"run", rc.seed},
                         {"estimator", rc.sweep.estimator.seed},
                         {"discovery", rc.discovery.estimator.seed}};
    manifest["discovery"] = discovery_note;
    manifest["graph_edges"] = g.edges().size();
    manifest["sweep_cells"] = cells.size();
    manifest["failed_cells"] = failed;
    manifest["artifacts"] = json::array({"graph.json", "reduction_report.txt", "sweep.csv", "manifest.json"});
    if (res.discovered) {
        manifest["artifacts"].push_back("discovery_report.txt");
    }
    res.manifest_file = rc.output_dir / "manifest.json";
    auto out = open_output(res.manifest_file, "run");
    out << manifest.dump(2) << '\n';
    return res;
}

// ---------------------------------------------------------------- entry point

inline void print_error(std::ostream& err, const Error& ex)
{
    json rec = {{"error",
                 {{"kind", to_string(ex.kind())},
                  {"module", ex.module()},
                  {"operation", ex.operation()},
                  {"message", ex.what()},
                  {"hint", ex.hint()}}},
                {"exit_code", exit_code(ex.kind())}};
    err << rec.dump() << '\n';
}

struct DataOptions {
    std::string data;
    std::string missing_token = "NA";
    bool raw = false;

    void add_to(CLI::App* cmd)
    {
        cmd->add_option("--data", data, "input CSV")->required();
        cmd->add_option("--missing-token", missing_token, "token marking missing cells");
        cmd->add_flag("--no-standardize", raw, "use the data as given instead of z-scoring each column");
    }

    TimeSeriesSet load() const { return load_data(data, missing_token, !raw); }
};

struct BundleOptions {
    std::string target;
    std::string bundle_m;
    std::string bundle_n;

    void add_to(CLI::App* cmd)
    {
        cmd->add_option("--target", target, "target variable")->required();
        cmd->add_option("--bundle-m", bundle_m, "comma-separated bundle M")->required();
        cmd->add_option("--bundle-n", bundle_n, "comma-separated bundle N")->required();
    }

    BundleSpec spec() const { return {target, split_names(bundle_m), split_names(bundle_n)}; }
};

/// Runs the command line; returns the process exit status.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Bundled causal-history analysis of multivariate time series"};
    app.require_subcommand(1);
    app.set_version_flag("--version", tool_version);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic system from a JSON spec");
    std::string spec_path, synth_out, synth_graph;
    std::optional<std::size_t> synth_length;
    std::optional<std::uint64_t> synth_seed;
    synth->add_option("--spec", spec_path, "model spec JSON")->required();
    synth->add_option("--out", synth_out, "output CSV")->required();
    synth->add_option("--graph-out", synth_graph, "write the true graph JSON here");
    synth->add_option("--length", synth_length, "override the series length");
    synth->add_option("--seed", synth_seed, "override the seed");

    // discover
    auto* discover = app.add_subcommand("discover", "discover a lagged causal graph");
    DataOptions disc_data;
    disc_data.add_to(discover);
    DiscoveryConfig dcfg;
    std::string disc_out, disc_report;
    discover->add_option("--out", disc_out, "output graph JSON")->required();
    discover->add_option("--report", disc_report, "write the test report here");
    discover->add_option("--max-lag", dcfg.max_lag, "largest lag tested")->capture_default_str();
    discover->add_option("--alpha", dcfg.alpha, "significance level")->capture_default_str();
    discover->add_option("--n-perm", dcfg.n_perm, "permutations per test")->capture_default_str();
    discover->add_option("--max-condition-size", dcfg.max_condition_size, "condition-set cap")->capture_default_str();
    discover->add_option("--k", dcfg.estimator.k, "nearest neighbours")->capture_default_str();
    discover->add_option("--seed", dcfg.estimator.seed, "seed")->capture_default_str();

    // reduce
    auto* reduce = app.add_subcommand("reduce", "weighted transitive reduction of the distant history");
    DataOptions red_data;
    red_data.add_to(reduce);
    BundleOptions red_bundle;
    red_bundle.add_to(reduce);
    std::string red_graph, red_out;
    int red_tau = 1;
    EstimatorConfig red_est;
    reduce->add_option("--graph", red_graph, "graph JSON")->required();
    reduce->add_option("--tau", red_tau, "partition lag")->required();
    reduce->add_option("--k", red_est.k, "nearest neighbours")->capture_default_str();
    reduce->add_option("--seed", red_est.seed, "seed")->capture_default_str();
    reduce->add_option("--out", red_out, "write the report here instead of stdout");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "T/J/D and decompositions at one partition lag");
    DataOptions an_data;
    an_data.add_to(analyze);
    BundleOptions an_bundle;
    an_bundle.add_to(analyze);
    std::string an_graph, an_order = "Order1", an_out;
    int an_tau = 1;
    AnalysisOptions an_opt;
    analyze->add_option("--graph", an_graph, "graph JSON")->required();
    analyze->add_option("--tau", an_tau, "partition lag")->required();
    analyze->add_option("--order", an_order, "Order0 or Order1")->capture_default_str();
    analyze->add_option("--k", an_opt.estimator.k, "nearest neighbours")->capture_default_str();
    analyze->add_option("--seed", an_opt.estimator.seed, "seed")->capture_default_str();
    analyze->add_flag("--miwtr", an_opt.use_miwtr, "reduce W before estimating");
    analyze->add_option("--out", an_out, "write the CSV here instead of stdout");

    // sweep / run
    auto* sweep_cmd = app.add_subcommand("sweep", "full pipeline from a run configuration");
    sweep_cmd->alias("run");
    std::string config_path;
    sweep_cmd->add_option("--config,config", config_path, "run configuration JSON")->required();

    // report
    auto* report = app.add_subcommand("report", "long-format plot series from a sweep CSV");
    std::string report_in, report_dir;
    report->add_option("--sweep", report_in, "sweep CSV")->required();
    report->add_option("--out-dir", report_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    }
    catch (const CLI::CallForVersion&) {
        out << tool_version << '\n';
        return 0;
    }
    catch (const CLI::ParseError& ex) {
        if (ex.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        print_error(err, ConfigError("cli", "parse_arguments", ex.what(), "run with --help for usage"));
        return 2;
    }

    try {
        if (*synth) {
            const json spec = parse_json(read_file(spec_path, "synth"), "synth");
            SyntheticSystem sys;
            if (spec.value("model", std::string("linear_var")) == "logistic") {
                const auto ls = logistic_from_json(spec);
                const std::size_t length = synth_length.value_or(spec.value("length", std::size_t{1000}));
                sys = gen_logistic_network(ls, length, synth_seed.value_or(spec.value("seed", std::uint64_t{0})));
            }
            else {
                LinearVARSpec ls = linear_var_from_json(spec);
                ls.length = synth_length.value_or(ls.length);
                ls.seed = synth_seed.value_or(ls.seed);
                sys = gen_linear_var(ls);
            }
            auto o = open_output(synth_out, "synth");
            write_csv(o, sys.data);
            if (!synth_graph.empty()) {
                save_graph(sys.graph, synth_graph);
            }
        }
        else if (*discover) {
            const auto ts = disc_data.load();
            const auto r = discover_graph(ts, dcfg);
            save_graph(r.graph, disc_out);
            if (!disc_report.empty()) {
                auto o = open_output(disc_report, "discover");
                write_discovery_report(o, r);
            }
            if (!r.converged) {
                err << "warning: stage 2 did not converge within " << dcfg.max_sweeps << " sweeps\n";
            }
        }
        else if (*reduce) {
            const auto ts = red_data.load();
            const auto g = load_graph(red_graph);
            check_graph_against_data(g, ts);
            const auto b = red_bundle.spec();
            b.validate(g.variables());
            const auto r = reduce_W(g, b, red_tau, ts, red_est);
            if (red_out.empty()) {
                write_reduction_report(out, r, red_tau);
            }
            else {
                auto o = open_output(red_out, "reduce");
                write_reduction_report(o, r, red_tau);
            }
        }
        else if (*analyze) {
            const auto ts = an_data.load();
            const auto g = load_graph(an_graph);
            check_graph_against_data(g, ts);
            const auto h = analyze_at_lag(ts, g, an_bundle.spec(), an_tau, parse_order(an_order), an_opt);
            if (an_out.empty()) {
                write_sweep_csv(out, {h});
            }
            else {
                auto o = open_output(an_out, "analyze");
                write_sweep_csv(o, {h});
            }
        }
        else if (*sweep_cmd) {
            const RunConfig rc = load_run_config(config_path);
            const auto res = run_pipeline(rc, err);
            out << "wrote " << res.sweep_file.string() << '\n';
        }
        else if (*report) {
            std::ifstream in(report_in);
            if (!in) {
                throw ParseError("cli", "report", "cannot open '" + report_in + "'", "check the path");
            }
            for (const auto& p : write_plot_files(read_sweep_csv(in), report_dir)) {
                out << "wrote " << p.string() << '\n';
            }
        }
        return 0;
    }
    catch (const Error& ex) {
        print_error(err, ex);
        return exit_code(ex.kind());
    }
    catch (const std::exception& ex) {
        print_error(err, ContractViolation("cli", "run", std::string("unexpected failure: ") + ex.what()));
        return 5;
    }
}

} // namespace bch::cli

#endif
