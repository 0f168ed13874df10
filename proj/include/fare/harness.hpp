#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fare/dataset.hpp"
#include "fare/driver.hpp"
#include "fare/errors.hpp"
#include "fare/random.hpp"

namespace fare {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
    std::string dataset;      // "synthetic" or a CSV path
    std::string schema_path;  // schema config JSON, required for CSV datasets
    std::vector<Strategy> strategies;
    FareConfig fare;
    std::size_t trials = 1;
    std::uint64_t base_seed = 0;
    std::string out_dir;
    double test_fraction = 0.25;
    bool fixed_split = false;
    int threads = 0;  // 0 picks hardware concurrency

    void validate() const {
        if (trials < 1) throw ConfigError("trials must be at least 1");
        if (strategies.empty()) throw ConfigError("at least one strategy is required");
        if (dataset.empty()) throw ConfigError("dataset is required");
        if (dataset != "synthetic" && schema_path.empty())
            throw ConfigError("CSV datasets need --schema");
        if (!(test_fraction > 0.0 && test_fraction < 1.0))
            throw ConfigError("test_fraction must be in (0, 1)");
        FareConfig probe = fare;
        probe.spec.validate();
        probe.ensemble.validate();
        probe.eg.validate();
    }

    nlohmann::json to_json() const {
        std::vector<std::string> names;
        for (Strategy s : strategies) names.push_back(strategy_name(s));
        return {{"dataset", dataset},
                {"schema", schema_path},
                {"strategies", names},
                {"metric", metric_name(fare.spec.metric)},
                {"alpha", fare.spec.alpha},
                {"batch_size", fare.batch_size},
                {"rounds", fare.rounds},
                {"k", fare.ensemble.k},
                {"sigma", fare.ensemble.sigma},
                {"correction", fare.correction == Correction::sqrt_rule ? "sqrt" : "none"},
                {"trials", trials},
                {"seed", base_seed},
                {"test_fraction", test_fraction},
                {"fixed_split", fixed_split},
                {"out", out_dir}};
    }
};

// One strategy arm of one trial.
struct TrialRecords {
    std::size_t trial = 0;
    std::string strategy;
    std::vector<RoundRecord> records;
};

struct CurvePoint {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double se = std::numeric_limits<double>::quiet_NaN();
    std::size_t count = 0;
};

struct AggregateCell {
    std::size_t labels = 0;
    CurvePoint accuracy, tprp, eo;
};

struct AggregateCurve {
    std::vector<std::size_t> checkpoints;
    std::map<std::string, std::vector<AggregateCell>> by_strategy;
    bool se_degenerate = false;  // standard errors over a single trial
};

namespace detail {

inline CurvePoint summarize(const std::vector<double>& values) {
    CurvePoint point;
    point.count = values.size();
    if (values.empty()) return point;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    point.mean = mean;
    if (values.size() == 1) {
        point.se = 0.0;
        return point;
    }
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    double stdev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    point.se = stdev / std::sqrt(static_cast<double>(values.size()));
    return point;
}

inline std::string format_value(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace detail

// Deterministic fold from per-trial records to the mean / standard
// error curve. Undefined violations are excluded cell-wise; the count
// of contributing trials rides along in the CurvePoint.
inline AggregateCurve aggregate_records(const std::vector<TrialRecords>& arms) {
    AggregateCurve curve;
    std::size_t max_rounds = 0;
    std::size_t trials_seen = 0;
    std::map<std::string, std::vector<const TrialRecords*>> grouped;
    for (const auto& arm : arms) {
        grouped[arm.strategy].push_back(&arm);
        max_rounds = std::max(max_rounds, arm.records.size());
        trials_seen = std::max(trials_seen, arm.trial + 1);
    }
    curve.se_degenerate = trials_seen <= 1;
    for (auto& [name, list] : grouped) {
        std::sort(list.begin(), list.end(),
                  [](const TrialRecords* a, const TrialRecords* b) { return a->trial < b->trial; });
        std::vector<AggregateCell> cells;
        for (std::size_t r = 0; r < max_rounds; ++r) {
            AggregateCell cell;
            std::vector<double> acc, tprp, eo;
            for (const TrialRecords* arm : list) {
                if (r >= arm->records.size()) continue;
                const RoundRecord& record = arm->records[r];
                cell.labels = record.labels;
                acc.push_back(record.test_accuracy);
                if (record.test_tprp.defined()) tprp.push_back(*record.test_tprp.value);
                if (record.test_eo.defined()) eo.push_back(*record.test_eo.value);
            }
            cell.accuracy = detail::summarize(acc);
            cell.tprp = detail::summarize(tprp);
            cell.eo = detail::summarize(eo);
            cells.push_back(cell);
        }
        curve.by_strategy[name] = std::move(cells);
    }
    if (!curve.by_strategy.empty())
        for (const auto& cell : curve.by_strategy.begin()->second)
            curve.checkpoints.push_back(cell.labels);
    return curve;
}

// Plot-ready CSV: one row per (strategy, labels checkpoint), sorted.
inline void emit_plot_data(const AggregateCurve& curve, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "strategy,labels,acc_mean,acc_se,tprp_mean,tprp_se,eo_mean,eo_se\n";
    for (const auto& [name, cells] : curve.by_strategy) {
        for (const auto& cell : cells) {
            out << name << ',' << cell.labels << ',' << detail::format_value(cell.accuracy.mean)
                << ',' << detail::format_value(cell.accuracy.se) << ','
                << detail::format_value(cell.tprp.mean) << ','
                << detail::format_value(cell.tprp.se) << ','
                << detail::format_value(cell.eo.mean) << ','
                << detail::format_value(cell.eo.se) << '\n';
        }
    }
    if (!out) throw DataError("failed while writing " + path);
}

struct ExperimentResult {
    AggregateCurve curve;
    std::vector<TrialRecords> raw;
};

namespace detail {

struct PreparedData {
    Dataset full;
};

inline Dataset load_experiment_dataset(const ExperimentConfig& cfg, std::size_t trial) {
    if (cfg.dataset == "synthetic") {
        RandomSource data_rng = RandomSource(cfg.base_seed)
                                    .child(stream::kTrial)
                                    .child(cfg.fixed_split ? 0 : trial)
                                    .child(stream::kData);
        Dataset ds = generate_synthetic(data_rng);
        standardize_columns(ds, {0, 1}, [&] {
            std::vector<std::size_t> rows(ds.size());
            for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
            return rows;
        }());
        return ds;
    }
    throw ConfigError("load_experiment_dataset: CSV datasets are prepared once up front");
}

}  // namespace detail

// Runs every (trial, strategy) arm. Trials are independent and execute
// on a small worker pool; all randomness derives from the base seed via
// the documented stream tree, so the aggregate does not depend on the
// thread count. CSV datasets are loaded and standardized once and
// resplit per trial; the synthetic dataset is regenerated per trial.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();

    const bool synthetic = cfg.dataset == "synthetic";
    Dataset csv_data;
    if (!synthetic) {
        SchemaConfig schema = SchemaConfig::from_file(cfg.schema_path);
        RawDataset raw = load_csv(cfg.dataset, schema);
        csv_data = preprocess(raw).data;
        validate_margins(csv_data, cfg.dataset);
    }

    // Validate the label budget against the pool size before any work.
    {
        std::size_t n = synthetic ? 10100 : csv_data.size();
        std::size_t n_test =
            static_cast<std::size_t>(std::llround(static_cast<double>(n) * cfg.test_fraction));
        cfg.fare.validate(n - n_test);
    }

    std::vector<TrialRecords> raw_records(cfg.trials * cfg.strategies.size());
    std::atomic<std::size_t> next_trial{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::size_t first_error_trial = std::numeric_limits<std::size_t>::max();

    auto worker = [&]() {
        while (true) {
            std::size_t trial = next_trial.fetch_add(1);
            if (trial >= cfg.trials) return;
            try {
                RandomSource trial_rng = RandomSource(cfg.base_seed).child(stream::kTrial)
                                             .child(trial);
                Dataset trial_data;
                if (synthetic) trial_data = detail::load_experiment_dataset(cfg, trial);
                const Dataset& data = synthetic ? trial_data : csv_data;
                RandomSource split_rng = cfg.fixed_split
                                             ? RandomSource(cfg.base_seed).child(stream::kSplit)
                                             : trial_rng.child(stream::kSplit);
                Split split = train_test_split(data, cfg.test_fraction, split_rng);

                for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
                    FareConfig arm_cfg = cfg.fare;
                    arm_cfg.strategy = cfg.strategies[s];
                    RunResult run = run_trial(split.train, split.test, arm_cfg,
                                              trial_rng.child(stream::kRun));
                    TrialRecords& slot = raw_records[trial * cfg.strategies.size() + s];
                    slot.trial = trial;
                    slot.strategy = strategy_name(cfg.strategies[s]);
                    slot.records = std::move(run.records);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (trial < first_error_trial) {
                    first_error_trial = trial;
                    first_error = std::current_exception();
                }
            }
        }
    };

    unsigned n_threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                         : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(cfg.trials));
    std::vector<std::thread> workers;
    for (unsigned t = 0; t < n_threads; ++t) workers.emplace_back(worker);
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);

    ExperimentResult result;
    result.raw = std::move(raw_records);
    result.curve = aggregate_records(result.raw);

    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        std::filesystem::path base(cfg.out_dir);

        std::ofstream raw_out(base / "raw.jsonl", std::ios::binary);
        if (!raw_out) throw DataError("cannot write " + (base / "raw.jsonl").string());
        for (const auto& arm : result.raw) {
            for (const auto& record : arm.records) {
                nlohmann::json line = record.to_json();
                line["trial"] = arm.trial;
                line["strategy"] = arm.strategy;
                raw_out << line.dump() << '\n';
            }
        }

        emit_plot_data(result.curve, (base / "aggregate.csv").string());

        nlohmann::json meta{{"version", kVersion},
                            {"config", cfg.to_json()},
                            {"se_degenerate", result.curve.se_degenerate}};
        std::ofstream meta_out(base / "run_meta.json", std::ios::binary);
        meta_out << meta.dump(2) << '\n';
    }
    return result;
}

// Rebuilds the aggregate curve from a raw.jsonl file; the `report`
// subcommand and the aggregation self-check both go through here.
inline AggregateCurve aggregate_from_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::map<std::pair<std::size_t, std::string>, TrialRecords> arms;
    std::string line;
    auto metric_from_json = [](const nlohmann::json& j) {
        MetricValue m;
        if (!j.is_null()) m.value = j.get<double>();
        return m;
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        RoundRecord record;
        record.round = j.at("round").get<int>();
        record.labels = j.at("labels").get<std::size_t>();
        record.alpha_eff = j.at("alpha_eff").get<double>();
        record.train_risk = j.at("train_risk").get<double>();
        record.train_violation = metric_from_json(j.at("train_violation"));
        record.test_accuracy = j.at("test_accuracy").get<double>();
        record.test_tprp = metric_from_json(j.at("test_tprp"));
        record.test_eo = metric_from_json(j.at("test_eo"));
        auto key = std::make_pair(j.at("trial").get<std::size_t>(),
                                  j.at("strategy").get<std::string>());
        auto& arm = arms[key];
        arm.trial = key.first;
        arm.strategy = key.second;
        arm.records.push_back(std::move(record));
    }
    std::vector<TrialRecords> list;
    list.reserve(arms.size());
    for (auto& [key, arm] : arms) {
        std::sort(arm.records.begin(), arm.records.end(),
                  [](const RoundRecord& a, const RoundRecord& b) { return a.round < b.round; });
        list.push_back(std::move(arm));
    }
    return aggregate_records(list);
}

}  // namespace fare
