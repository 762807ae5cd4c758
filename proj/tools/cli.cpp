#include "cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "fruitmap/errors.hpp"
#include "fruitmap/eval_report.hpp"
#include "fruitmap/fruitlet_map.hpp"
#include "fruitmap/json_io.hpp"
#include "fruitmap/provenance.hpp"
#include "fruitmap/scan_model.hpp"
#include "fruitmap/scan_sim.hpp"
#include "fruitmap/side_align.hpp"

namespace fruitmap::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Effective configuration: built-in defaults overlaid with the config file.
// Command-line flags are applied on top by each subcommand.
struct Settings {
    OrchardSpec simulation;
    FitConfig fit;
    MergeConfig merge = MergeConfig::within_side();
    MergeConfig align = MergeConfig::cross_side();
    ExtractionConfig extraction;
    double tolerance = kDefaultMatchTolerance;
    RmseMode rmse_mode = RmseMode::Relative;
};

template <typename T>
void overlay(const json& doc, const char* key, T& target) {
    if (auto it = doc.find(key); it != doc.end()) {
        try {
            it->get_to(target);
        } catch (const json::exception& e) {
            throw ValidationError(fmt::format("config section '{}': {}", key, e.what()));
        }
    }
}

Settings load_settings(const std::string& path) {
    Settings s;
    if (path.empty()) {
        return s;
    }
    const json doc = read_json_file(path);
    reject_unknown_keys(doc, {"simulation", "fit", "merge", "align", "extraction", "eval"},
                        fmt::format("config '{}'", path));
    overlay(doc, "simulation", s.simulation);
    overlay(doc, "fit", s.fit);
    overlay(doc, "merge", s.merge);
    overlay(doc, "align", s.align);
    overlay(doc, "extraction", s.extraction);
    if (auto it = doc.find("eval"); it != doc.end()) {
        reject_unknown_keys(*it, {"tolerance", "rmse_mode"}, "config section 'eval'");
        read_optional(*it, "tolerance", s.tolerance);
        std::string mode;
        read_optional(*it, "rmse_mode", mode);
        if (!mode.empty()) {
            s.rmse_mode = parse_rmse_mode(mode);
        }
    }
    return s;
}

// Diagnostics go to stderr only; data products go to files.
void install_logger() {
    auto logger = std::make_shared<spdlog::logger>("fruitmap", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    logger->set_pattern("[%l] %v");
    logger->set_level(spdlog::level::warn);
    spdlog::set_default_logger(std::move(logger));
}

void set_log_level(const std::string& level) {
    const auto parsed = spdlog::level::from_str(level);
    if (parsed == spdlog::level::off && level != "off") {
        throw ValidationError(fmt::format("unknown log level '{}'", level));
    }
    spdlog::set_level(parsed);
}

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string log_level = "warn";

    std::string out;
    std::string dataset;
    std::string side;
    int threads = 0;
    std::string map_a;
    std::string map_b;
    std::string map;
    std::string truth;
    std::string scan;
    double tolerance = kDefaultMatchTolerance;
    std::string rmse_mode;
    std::vector<std::string> evals;
    std::string format = "csv";
    std::string scatter;
};

void cmd_simulate(const Options& o, Settings s) {
    if (o.seed) {
        s.simulation.rng_seed = *o.seed;
    }
    const SimulatedScan scan(s.simulation);
    const fs::path root(o.out);
    const auto truth = export_dataset(scan, root);
    write_json_file(root / "simulation.json",
                    {{"provenance", make_provenance(scan.dataset_id(), json{{"simulation", s.simulation}},
                                                    s.simulation.rng_seed)},
                     {"simulation", s.simulation}});
    spdlog::info("wrote dataset '{}' with {} fruitlets to {}", scan.dataset_id(), truth.fruitlets.size(), o.out);
}

void cmd_map(const Options& o, Settings s) {
    if (o.seed) {
        s.fit.rng_seed = *o.seed;
    }
    const Side side = parse_side(o.side);
    const auto dataset = load_dataset(o.dataset);
    const auto map = build_side_map(dataset, side, s.fit, s.merge, s.extraction, o.threads);
    save_branch_map(o.out, map);
    spdlog::info("side {} map with {} tracks written to {}", to_string(side), map.tracks.size(), o.out);
}

void cmd_align(const Options& o, Settings s) {
    const auto map_a = load_branch_map(o.map_a);
    const auto map_b = load_branch_map(o.map_b);
    const auto dataset = load_dataset(o.dataset);
    const auto aligned = align_side_b(map_b, dataset.fiducial(Side::A), dataset.fiducial(Side::B));
    auto merged = merge_maps(map_a, aligned, s.align);
    const std::uint64_t seed = o.seed ? *o.seed : map_a.provenance.value("seed", std::uint64_t{0});
    auto provenance = make_provenance(dataset.dataset_id(), json{{"align", s.align}}, seed);
    provenance["inputs"] = merged.provenance;
    merged.provenance = std::move(provenance);
    save_branch_map(o.out, merged);
    spdlog::info("merged {} + {} tracks into {} ({})", map_a.tracks.size(), map_b.tracks.size(),
                 merged.tracks.size(), o.out);
}

void cmd_eval(const Options& o, const Settings& s, bool tolerance_flag) {
    const auto map = load_branch_map(o.map);
    const auto truth = load_ground_truth(o.truth);
    const double tolerance = tolerance_flag ? o.tolerance : s.tolerance;
    const RmseMode mode = o.rmse_mode.empty() ? s.rmse_mode : parse_rmse_mode(o.rmse_mode);
    const std::string scan = o.scan.empty() ? fs::path(o.map).stem().string() : o.scan;
    auto report = evaluate(map, truth, tolerance, mode, scan);
    const json eval_cfg{{"tolerance", tolerance}, {"rmse_mode", std::string(to_string(mode))}};
    const std::uint64_t seed = o.seed ? *o.seed : map.provenance.value("seed", std::uint64_t{0});
    auto provenance = make_provenance(map.provenance.value("dataset_id", ""), json{{"eval", eval_cfg}}, seed);
    provenance["map"] = map.provenance;
    report.provenance = std::move(provenance);
    save_eval_report(o.out, report);
    spdlog::info("{}: tp {} fp {} fn {}, accuracy {:.2f}%", scan, report.tp, report.fp, report.fn,
                 report.count_accuracy_pct);
}

void cmd_report(const Options& o) {
    std::vector<EvalReport> reports;
    for (const auto& path : o.evals) {
        reports.push_back(load_eval_report(path));
    }
    if (o.format == "csv") {
        write_text_file(o.out, table_csv(reports));
    } else {
        json doc{{"format_version", "1"}, {"reports", json::array()}};
        for (const auto& r : reports) {
            doc["reports"].push_back(r);
        }
        write_json_file(o.out, doc);
    }
    if (!o.scatter.empty()) {
        write_text_file(o.scatter, scatter_csv(reports));
    }
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Fruitlet mapping pipeline: simulate, map, align, eval, report", "fruitmap"};
    app.set_version_flag("--version", std::string(tool_version()));
    app.require_subcommand(1);
    Options o;
    app.add_option("--config", o.config, "JSON config file (sections: simulation, fit, merge, align, extraction, eval)");
    app.add_option("--seed", o.seed, "Seed for the simulator and the per-observation fit seeds");
    app.add_option("--log-level", o.log_level, "trace, debug, info, warn, error, critical or off")
        ->capture_default_str();

    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic scan dataset with ground truth");
    simulate->add_option("--out", o.out, "Dataset directory to create")->required();

    auto* map = app.add_subcommand("map", "Build a single-side fruitlet map from a dataset");
    map->add_option("--dataset", o.dataset, "Dataset directory")->required();
    map->add_option("--side", o.side, "Side to map")->required()->check(CLI::IsMember({"A", "B"}));
    map->add_option("--out", o.out, "Output map JSON")->required();
    map->add_option("--threads", o.threads, "Extraction/fit workers (0 = all cores)")->capture_default_str();

    auto* align = app.add_subcommand("align", "Align the side-B map to side A and merge both maps");
    align->add_option("--map-a", o.map_a, "Side-A map JSON")->required();
    align->add_option("--map-b", o.map_b, "Side-B map JSON")->required();
    align->add_option("--dataset", o.dataset, "Dataset directory holding the fiducial records")->required();
    align->add_option("--out", o.out, "Output merged map JSON")->required();

    auto* eval = app.add_subcommand("eval", "Match a map against ground truth and compute metrics");
    eval->add_option("--map", o.map, "Map JSON in the side-A frame")->required();
    eval->add_option("--truth", o.truth, "ground_truth.json")->required();
    auto* tolerance = eval->add_option("--tolerance", o.tolerance, "Match distance in meters");
    eval->add_option("--rmse-mode", o.rmse_mode, "relative or normalized")
        ->check(CLI::IsMember({"relative", "normalized"}));
    eval->add_option("--scan", o.scan, "Scan label (defaults to the map file name)");
    eval->add_option("--out", o.out, "Output report JSON")->required();

    auto* report = app.add_subcommand("report", "Render evaluation reports as a table");
    report->add_option("--eval", o.evals, "Evaluation report JSON (repeatable)")->required();
    report->add_option("--format", o.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    report->add_option("--out", o.out, "Output table")->required();
    report->add_option("--scatter", o.scatter, "Optional CSV of (truth, estimated) diameters");

    install_logger();
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return kOk;
    } catch (const CLI::CallForVersion&) {
        std::cout << tool_version() << '\n';
        return kOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kInvalid;
    }

    try {
        set_log_level(o.log_level);
        const Settings settings = load_settings(o.config);
        if (simulate->parsed()) {
            cmd_simulate(o, settings);
        } else if (map->parsed()) {
            cmd_map(o, settings);
        } else if (align->parsed()) {
            cmd_align(o, settings);
        } else if (eval->parsed()) {
            cmd_eval(o, settings, tolerance->count() > 0);
        } else if (report->parsed()) {
            cmd_report(o);
        }
    } catch (const IoError& e) {
        spdlog::error("{}", e.what());
        return kIoFailure;
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return kInvalid;
    } catch (const std::exception& e) {
        spdlog::error("unexpected failure: {}", e.what());
        return kInvalid;
    }
    return kOk;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) {
        args.emplace_back(argv[i]);
    }
    return run(args);
}

}  // namespace fruitmap::cli
