#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fare/coverage.hpp"
#include "fare/dataset.hpp"
#include "fare/errors.hpp"
#include "fare/harness.hpp"

namespace fare {

namespace detail {

// Pre-scan for --config and load its JSON as flag defaults; explicit
// command-line flags still win.
inline void apply_config_file(int argc, const char* const* argv, ExperimentConfig& cfg,
                              std::vector<std::string>& strategy_names, std::string& metric,
                              std::string& correction) {
    std::string path;
    for (int i = 0; i < argc - 1; ++i)
        if (std::string(argv[i]) == "--config") path = argv[i + 1];
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse config file " + path + ": " + e.what());
    }
    auto get = [&](const char* key, auto& slot) {
        if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
    };
    get("dataset", cfg.dataset);
    get("schema", cfg.schema_path);
    get("alpha", cfg.fare.spec.alpha);
    get("batch_size", cfg.fare.batch_size);
    get("rounds", cfg.fare.rounds);
    get("k", cfg.fare.ensemble.k);
    get("sigma", cfg.fare.ensemble.sigma);
    get("trials", cfg.trials);
    get("seed", cfg.base_seed);
    get("out", cfg.out_dir);
    get("test_fraction", cfg.test_fraction);
    get("fixed_split", cfg.fixed_split);
    get("threads", cfg.threads);
    get("metric", metric);
    get("correction", correction);
    if (j.contains("strategies")) strategy_names = j.at("strategies").get<std::vector<std::string>>();
    if (j.contains("strategy")) strategy_names = j.at("strategy").get<std::vector<std::string>>();
}

inline void write_synth_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "x1,x2,a,y\n";
    char buf[64];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d,%d\n", ds.X[i * 2], ds.X[i * 2 + 1],
                      ds.a[i], ds.y[i]);
        out << buf;
    }
    if (!out) throw DataError("failed while writing " + path);
}

}  // namespace detail

// Entry point behind the `fare` binary; also called directly by tests.
// Exit codes: 0 success, 1 configuration error, 2 runtime error.
inline int cli_main(int argc, const char* const* argv) {
    CLI::App app{"FARE: fairness-constrained active learning experiments"};
    app.require_subcommand(1);

    // --- run ---------------------------------------------------------------
    ExperimentConfig cfg;
    std::vector<std::string> strategy_names;
    std::string metric = "tprp";
    std::string correction = "sqrt";
    std::string config_path;
    bool efo_last_iterate = false;

    auto* run = app.add_subcommand("run", "Run a multi-trial experiment");
    run->add_option("--config", config_path, "JSON config file mirroring these flags");
    run->add_option("--dataset", cfg.dataset, "CSV path or 'synthetic'");
    run->add_option("--schema", cfg.schema_path, "schema config JSON (CSV datasets)");
    run->add_option("--metric", metric, "fairness metric")->check(CLI::IsMember({"tprp", "eo"}));
    run->add_option("--alpha", cfg.fare.spec.alpha, "fairness violation tolerance in [0, 1]");
    run->add_option("--batch-size", cfg.fare.batch_size, "labels requested per round");
    run->add_option("--rounds", cfg.fare.rounds, "number of rounds");
    run->add_option("--k", cfg.fare.ensemble.k, "classifiers per round");
    run->add_option("--sigma", cfg.fare.ensemble.sigma, "label perturbation rate");
    run->add_option("--trials", cfg.trials, "independent trials to average");
    run->add_option("--seed", cfg.base_seed, "base seed for the derivation tree");
    run->add_option("--strategy", strategy_names, "strategy arm, repeatable")
        ->check(CLI::IsMember({"fare", "fare_no_fair", "passive"}));
    run->add_option("--correction", correction, "fairness tolerance correction")
        ->check(CLI::IsMember({"sqrt", "none"}));
    run->add_option("--out", cfg.out_dir, "output directory");
    run->add_flag("--fixed-split", cfg.fixed_split, "reuse one train/test split across trials");
    run->add_option("--threads", cfg.threads, "worker threads (0 = hardware)");
    run->add_flag("--efo-last-iterate", efo_last_iterate,
                  "deterministic mode returning the oracle's final best response");
    run->add_flag("--dump-allocations", cfg.fare.dump_allocations,
                  "attach per-round acquisition allocations to raw.jsonl");

    // --- dataset synth -----------------------------------------------------
    auto* dataset_cmd = app.add_subcommand("dataset", "Dataset utilities");
    dataset_cmd->require_subcommand(1);
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    auto* synth = dataset_cmd->add_subcommand("synth", "Generate the synthetic dataset as CSV");
    synth->add_option("--seed", synth_seed, "generator seed")->required();
    synth->add_option("--out", synth_out, "output CSV path")->required();

    // --- bounds coverage ---------------------------------------------------
    auto* bounds_cmd = app.add_subcommand("bounds", "Concentration bound diagnostics");
    bounds_cmd->require_subcommand(1);
    std::size_t cov_n = 500, cov_trials = 1000;
    double cov_delta = 0.1;
    std::uint64_t cov_seed = 0;
    std::string cov_out;
    auto* coverage_cmd = bounds_cmd->add_subcommand("coverage", "Monte-Carlo coverage report");
    coverage_cmd->add_option("--n", cov_n, "resample size");
    coverage_cmd->add_option("--trials", cov_trials, "number of resamples");
    coverage_cmd->add_option("--delta", cov_delta, "confidence level");
    coverage_cmd->add_option("--seed", cov_seed, "seed");
    coverage_cmd->add_option("--out", cov_out, "write the JSON report here (default stdout)");

    // --- report ------------------------------------------------------------
    std::string report_raw, report_out;
    auto* report_cmd = app.add_subcommand("report", "Recompute aggregate.csv from raw.jsonl");
    report_cmd->add_option("--raw", report_raw, "raw.jsonl path")->required();
    report_cmd->add_option("--out", report_out, "aggregate CSV output path")->required();

    try {
        try {
            detail::apply_config_file(argc, argv, cfg, strategy_names, metric, correction);
        } catch (const std::exception& e) {  // malformed config file
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;  // parse failures are config errors
    }

    try {
        if (*run) {
            cfg.fare.spec.metric = metric_from_name(metric);
            cfg.fare.correction = correction == "none" ? Correction::none : Correction::sqrt_rule;
            cfg.fare.eg.last_iterate = efo_last_iterate;
            if (strategy_names.empty()) strategy_names = {"fare"};
            cfg.strategies.clear();
            for (const auto& name : strategy_names)
                cfg.strategies.push_back(strategy_from_name(name));

            ExperimentResult result = run_experiment(cfg);
            if (result.curve.se_degenerate)
                std::cerr << "note: standard errors are 0 (single trial)\n";
            for (const auto& [name, cells] : result.curve.by_strategy) {
                const AggregateCell& last = cells.back();
                std::printf("%s: labels=%zu accuracy=%.4f tprp=%s eo=%s\n", name.c_str(),
                            last.labels, last.accuracy.mean,
                            detail::format_value(last.tprp.mean).c_str(),
                            detail::format_value(last.eo.mean).c_str());
            }
            return 0;
        }
        if (*synth) {
            Dataset ds = generate_synthetic(RandomSource(synth_seed));
            detail::write_synth_csv(ds, synth_out);
            std::printf("wrote %zu rows to %s\n", ds.size(), synth_out.c_str());
            return 0;
        }
        if (*coverage_cmd) {
            CoverageReport report = bounds_coverage(cov_n, cov_trials, cov_delta, cov_seed);
            std::string text = report.to_json().dump(2);
            if (cov_out.empty()) {
                std::printf("%s\n", text.c_str());
            } else {
                std::ofstream out(cov_out, std::ios::binary);
                if (!out) throw DataError("cannot write " + cov_out);
                out << text << '\n';
            }
            return 0;
        }
        if (*report_cmd) {
            emit_plot_data(aggregate_from_jsonl(report_raw), report_out);
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace fare
