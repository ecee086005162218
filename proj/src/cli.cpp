#include "mminfer/cli.hpp"

#include "mminfer/bootstrap.hpp"
#include "mminfer/fit_cluster.hpp"
#include "mminfer/fit_single.hpp"
#include "mminfer/io.hpp"
#include "mminfer/parallel.hpp"
#include "mminfer/report.hpp"
#include "mminfer/simbench.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <sstream>

namespace mminfer {

namespace {

struct CommonOptions {
    std::string input;
    std::string out;
    std::string format = "json";
    std::string delimiter = ",";
    std::string substrate_col = "substrate";
    std::string velocity_col = "velocity";
};

struct LoadedInput {
    InputTable table;
    std::string digest;
};

CsvOptions csv_options(const CommonOptions& common) {
    if (common.delimiter.size() != 1) throw Error(ErrorCode::Usage, "--delimiter must be a single character");
    CsvOptions o;
    o.delimiter = common.delimiter[0];
    o.substrate_col = common.substrate_col;
    o.velocity_col = common.velocity_col;
    return o;
}

LoadedInput load_input(const CommonOptions& common, const CsvOptions& options) {
    std::ifstream file(common.input, std::ios::binary);
    if (!file) throw Error(ErrorCode::ParseError, fmt::format("cannot open input file '{}'", common.input));
    std::stringstream buffer;
    buffer << file.rdbuf();
    const std::string bytes = buffer.str();
    std::istringstream in(bytes);
    return {parse_csv(in, options), fnv1a_hex(bytes)};
}

void write_output(const std::string& path, const std::string& bytes, std::ostream& out) {
    if (path.empty()) {
        out << bytes;
        return;
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw Error(ErrorCode::InvalidInput, fmt::format("cannot write '{}'", path));
    file << bytes;
}

// Bad option values are usage errors, not data errors.
template <class F>
auto option_value(F&& parse) -> decltype(parse()) {
    try {
        return parse();
    } catch (const Error& e) {
        throw Error(ErrorCode::Usage, e.what());
    }
}

VarianceSpec parse_variance_option(const std::string& text) {
    return option_value([&] { return VarianceSpec::parse(text); });
}

std::vector<VarianceSpec> parse_candidates(const std::string& list) {
    std::vector<VarianceSpec> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(parse_variance_option(item));
    }
    if (out.empty()) throw Error(ErrorCode::Usage, "empty candidate list");
    return out;
}

ReportDocument base_document(const std::string& command, const LoadedInput& input) {
    ReportDocument doc;
    doc.command = command;
    doc.input_digest = input.digest;
    doc.rows_in = input.table.rows_in;
    doc.rows_dropped = input.table.dropped.total();
    return doc;
}

void add_common(CLI::App* app, CommonOptions& common, bool needs_input) {
    auto* in = app->add_option("--input", common.input, "Input CSV file");
    if (needs_input) in->required();
    app->add_option("--out", common.out, "Write the report here instead of standard output");
    app->add_option("--format", common.format, "Report format")->check(CLI::IsMember({"json", "csv", "text"}));
    app->add_option("--delimiter", common.delimiter, "Field delimiter");
    app->add_option("--substrate-col", common.substrate_col, "Substrate column name");
    app->add_option("--velocity-col", common.velocity_col, "Velocity column name");
}

void report_drops(const InputTable& table, std::ostream& err) {
    const auto& d = table.dropped;
    if (d.total() == 0) return;
    err << fmt::format("dropped {} of {} rows (sentinel {}, non-finite {}, negative substrate {})\n", d.total(),
                       table.rows_in, d.sentinel, d.non_finite, d.negative_substrate);
}

int run_fit(const CommonOptions& common, const std::string& variance, int bootstrap, double alpha,
            std::uint64_t seed, const std::string& multiplier, std::ostream& out, std::ostream& err) {
    const auto format = parse_report_format(common.format);
    const auto spec = parse_variance_option(variance);
    const auto mult = option_value([&] { return parse_multiplier(multiplier); });
    const LoadedInput input = load_input(common, csv_options(common));
    report_drops(input.table, err);
    const Dataset data = to_dataset(input.table);
    ReportDocument doc = base_document("fit", input);
    FitConfig config;
    config.alpha = alpha;
    try {
        const FitResult fit = fit_single(data, spec, config);
        FitBlock block = make_fit_block(fit, data);
        if (bootstrap > 0) {
            BootstrapConfig bc;
            bc.replicates = bootstrap;
            bc.multiplier = mult;
            bc.seed = seed;
            bc.level = 1.0 - alpha;
            const BootstrapResult br = wild_bootstrap_ci(data, fit, bc, config);
            block.bootstrap = BootstrapBlock{br.replicates, to_string(mult), seed, bc.level, br.ci_vmax,
                                             br.ci_km, br.failures, br.flagged};
            if (br.flagged) err << fmt::format("warning: {} of {} bootstrap refits failed\n", br.failures, bootstrap);
        }
        doc.fits.push_back(std::move(block));
    } catch (const NonconvergedFit& e) {
        FitBlock block = make_fit_block(e.partial(), data);
        block.error = e.what();
        doc.fits.push_back(std::move(block));
        write_output(common.out, emit_report(doc, format), out);
        err << "error: " << e.what() << '\n';
        return kExitNonconverged;
    }
    write_output(common.out, emit_report(doc, format), out);
    return kExitOk;
}

int run_screen(const CommonOptions& common, const std::string& candidates, double alpha, std::ostream& out,
               std::ostream& err) {
    const auto format = parse_report_format(common.format);
    const auto specs = candidates.empty() ? default_candidates() : parse_candidates(candidates);
    const LoadedInput input = load_input(common, csv_options(common));
    report_drops(input.table, err);
    const Dataset data = to_dataset(input.table);
    FitConfig config;
    config.alpha = alpha;
    ReportDocument doc = base_document("screen", input);
    doc.fits = make_screen_blocks(screen_models(data, specs, config), data);
    write_output(common.out, emit_report(doc, format), out);
    return kExitOk;
}

int run_group(const CommonOptions& common, const std::string& group_col, const std::string& candidates,
              double alpha, std::ostream& out, std::ostream& err) {
    const auto format = parse_report_format(common.format);
    const auto specs = candidates.empty() ? default_candidates() : parse_candidates(candidates);
    CsvOptions options = csv_options(common);
    options.group_col = group_col;
    options.require_group = true;
    const LoadedInput input = load_input(common, options);
    report_drops(input.table, err);
    const auto panel = to_panel(input.table);
    FitConfig config;
    config.alpha = alpha;
    const GroupFitResult result = group_fit(panel, specs, config);
    ReportDocument doc = base_document("group", input);
    for (const auto& [label, outcome] : result.groups) {
        if (outcome.error_code) {
            err << fmt::format("group '{}': {}\n", label, outcome.error);
            for (const auto& spec : specs) doc.fits.push_back(make_failed_block(spec, outcome.error, label));
            continue;
        }
        for (auto& block : make_screen_blocks(outcome.ranked, panel.at(label), label)) {
            doc.fits.push_back(std::move(block));
        }
    }
    for (const auto& s : result.summary) {
        doc.summary.push_back({s.spec.label(), s.mean_aic, s.mean_bic, s.mean_vmax, s.mean_km, s.groups, s.wins});
    }
    write_output(common.out, emit_report(doc, format), out);
    return kExitOk;
}

int run_cluster(const CommonOptions& common, const std::string& cluster_col, const std::string& variance,
                double alpha, std::ostream& out, std::ostream& err) {
    const auto format = parse_report_format(common.format);
    const auto spec = parse_variance_option(variance);
    CsvOptions options = csv_options(common);
    options.cluster_col = cluster_col;
    options.require_cluster = true;
    const LoadedInput input = load_input(common, options);
    report_drops(input.table, err);
    const ClusteredDataset data = to_clustered(input.table);
    ClusterFitConfig config;
    config.alpha = alpha;
    const ClusterFitResult fit = fit_clustered(data, spec, config);
    ReportDocument doc = base_document("cluster", input);
    doc.fits.push_back(make_fit_block(fit));
    write_output(common.out, emit_report(doc, format), out);
    if (!fit.converged) {
        err << fmt::format("error: clustered fit did not converge after {} iterations\n", fit.iterations);
        return kExitNonconverged;
    }
    return kExitOk;
}

std::string dataset_csv(const Dataset& data) {
    std::string text = "substrate,velocity\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        text += fmt::format("{:.17g},{:.17g}\n", data.s()[i], data.y()[i]);
    }
    return text;
}

int run_simulate(const std::string& scenario, int n, int m, std::uint64_t seed, std::size_t replicate,
                 const std::string& out_path, std::ostream& out) {
    if (scenario == "clustered") {
        ClusterScenario sc;
        sc.m = m;
        sc.master_seed = seed;
        const ClusteredDataset data = generate_clustered(sc, replicate);
        std::string text = "substrate,velocity,cluster\n";
        for (std::size_t c = 0; c < data.cluster_count(); ++c) {
            const Dataset& cl = data.clusters()[c];
            for (std::size_t i = 0; i < cl.size(); ++i) {
                text += fmt::format("{:.17g},{:.17g},{}\n", cl.s()[i], cl.y()[i], data.ids()[c]);
            }
        }
        write_output(out_path, text, out);
        return kExitOk;
    }
    SingleScenario sc;
    sc.shape = parse_variance_shape(scenario);
    sc.n = n;
    sc.master_seed = seed;
    write_output(out_path, dataset_csv(generate_single(sc, replicate)), out);
    return kExitOk;
}

int run_benchmark(const std::string& suite, int replications, std::uint64_t seed, int threads, bool timing,
                  const CommonOptions& common, std::ostream& out) {
    const int workers = resolve_threads(threads);
    BenchmarkReport report;
    if (suite == "single") {
        SingleBenchmarkConfig config;
        config.replications = replications;
        config.seed = seed;
        config.threads = workers;
        report = run_single_benchmark(config);
    } else {
        ClusterBenchmarkConfig config;
        config.replications = replications;
        config.seed = seed;
        config.threads = workers;
        report = run_clustered_benchmark(config);
    }
    ReportDocument doc;
    doc.command = "benchmark";
    doc.suite = report.suite;
    doc.seed = report.seed;
    doc.metrics = report.rows;
    doc.include_timing = timing;
    if (common.out.empty()) {
        out << emit_report(doc, parse_report_format(common.format));
    } else {
        write_output(common.out + ".csv", emit_report(doc, ReportFormat::Csv), out);
        write_output(common.out + ".json", emit_report(doc, ReportFormat::Json), out);
    }
    return kExitOk;
}

} // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Variance-aware Michaelis-Menten estimation and inference", kToolName};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    CommonOptions common;
    std::string variance = "pow:0.5";
    std::string candidates;
    std::string group_col = "group";
    std::string cluster_col = "cluster";
    std::string multiplier = "rademacher";
    std::string scenario = "mm";
    std::string suite = "single";
    int bootstrap = 0;
    int n = 50;
    int m = 6;
    int replications = 1000;
    int threads = 0;
    std::size_t replicate = 0;
    std::uint64_t seed = 1;
    double alpha = 0.05;
    bool timing = false;

    auto alpha_check = CLI::Range(1e-6, 0.5);

    auto* fit = app.add_subcommand("fit", "Fit one curve with a chosen working variance");
    add_common(fit, common, true);
    fit->add_option("--variance", variance, "constant | log | pow:<p>");
    fit->add_option("--bootstrap", bootstrap, "Wild-bootstrap replicates (0 disables)")->check(CLI::NonNegativeNumber);
    fit->add_option("--alpha", alpha, "Interval miscoverage level")->check(alpha_check);
    fit->add_option("--seed", seed, "Bootstrap seed");
    fit->add_option("--multiplier", multiplier, "rademacher | mammen");

    auto* screen = app.add_subcommand("screen", "Rank candidate variance models by AIC");
    add_common(screen, common, true);
    screen->add_option("--candidates", candidates, "Comma-separated variance specs");
    screen->add_option("--alpha", alpha, "Interval miscoverage level")->check(alpha_check);

    auto* group = app.add_subcommand("group", "Screen each group and summarise across groups");
    add_common(group, common, true);
    group->add_option("--group-col", group_col, "Group column name");
    group->add_option("--candidates", candidates, "Comma-separated variance specs");
    group->add_option("--alpha", alpha, "Interval miscoverage level")->check(alpha_check);

    auto* cluster = app.add_subcommand("cluster", "Fit the clustered working-covariance model");
    add_common(cluster, common, true);
    cluster->add_option("--cluster-col", cluster_col, "Cluster column name");
    cluster->add_option("--variance", variance, "constant | log | pow:<p>");
    cluster->add_option("--alpha", alpha, "Interval miscoverage level")->check(alpha_check);

    auto* simulate = app.add_subcommand("simulate", "Write one simulated dataset as CSV");
    simulate->add_option("--scenario", scenario, "mm | exp | hill | clustered")
        ->check(CLI::IsMember({"mm", "exp", "hill", "clustered"}));
    simulate->add_option("--n", n, "Number of observations")->check(CLI::Range(3, 1000000));
    simulate->add_option("--m", m, "Number of clusters (clustered scenario)")->check(CLI::Range(2, 100000));
    simulate->add_option("--seed", seed, "Master seed");
    simulate->add_option("--replicate", replicate, "Replicate index within the seed");
    simulate->add_option("--out", common.out, "Output CSV path");

    auto* bench = app.add_subcommand("benchmark", "Run a Monte Carlo benchmark suite");
    bench->add_option("--suite", suite, "single | clustered")->check(CLI::IsMember({"single", "clustered"}));
    bench->add_option("--replications", replications, "Monte Carlo replications")->check(CLI::Range(2, 10000000));
    bench->add_option("--seed", seed, "Master seed");
    bench->add_option("--out", common.out, "Output prefix; writes PREFIX.csv and PREFIX.json");
    bench->add_option("--threads", threads, "Worker threads (default: MM_INFER_THREADS or 1)")
        ->check(CLI::NonNegativeNumber);
    bench->add_option("--format", common.format, "Format for standard output")
        ->check(CLI::IsMember({"json", "csv", "text"}));
    bench->add_flag("--timing", timing, "Include wall-clock runtimes in the report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (fit->parsed()) return run_fit(common, variance, bootstrap, alpha, seed, multiplier, out, err);
        if (screen->parsed()) return run_screen(common, candidates, alpha, out, err);
        if (group->parsed()) return run_group(common, group_col, candidates, alpha, out, err);
        if (cluster->parsed()) return run_cluster(common, cluster_col, variance, alpha, out, err);
        if (simulate->parsed()) return run_simulate(scenario, n, m, seed, replicate, common.out, out);
        if (bench->parsed()) return run_benchmark(suite, replications, seed, threads, timing, common, out);
    } catch (const Error& e) {
        err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        switch (e.code()) {
        case ErrorCode::Usage: return kExitUsage;
        case ErrorCode::NonconvergedFit: return kExitNonconverged;
        default: return kExitData;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

int cli_dispatch(int argc, const char* const* argv) {
    return cli_dispatch(argc, argv, std::cout, std::cerr);
}

} // namespace mminfer
