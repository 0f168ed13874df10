#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fare/concentration.hpp"
#include "fare/dataset.hpp"
#include "fare/efo.hpp"
#include "fare/errors.hpp"
#include "fare/fairness.hpp"
#include "fare/random.hpp"
#include "fare/sampling.hpp"

namespace fare {

enum class Strategy { fare, fare_no_fair, passive };

inline std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::fare: return "fare";
        case Strategy::fare_no_fair: return "fare_no_fair";
        case Strategy::passive: return "passive";
    }
    return "?";
}

inline Strategy strategy_from_name(const std::string& name) {
    if (name == "fare") return Strategy::fare;
    if (name == "fare_no_fair") return Strategy::fare_no_fair;
    if (name == "passive") return Strategy::passive;
    throw ConfigError("unknown strategy '" + name + "' (fare, fare_no_fair, passive)");
}

enum class Correction { sqrt_rule, none };

struct FareConfig {
    std::size_t batch_size = 50;  // n, labels requested per round
    std::size_t rounds = 4;       // L
    EnsembleConfig ensemble;
    FairnessSpec spec;
    Correction correction = Correction::sqrt_rule;
    Strategy strategy = Strategy::fare;
    EGConfig eg;
    AllocSolverConfig alloc_solver;
    bool snapshot_classifiers = false;  // serialize each round's classifier into its record
    bool dump_allocations = false;      // attach per-round allocation vectors to the records

    void validate(std::size_t pool_size) const {
        if (batch_size < 1) throw ConfigError("batch size must be at least 1");
        if (rounds < 1) throw ConfigError("rounds must be at least 1");
        if (batch_size * rounds > pool_size)
            throw ConfigError("label budget " + std::to_string(batch_size * rounds) +
                              " exceeds pool size " + std::to_string(pool_size));
        ensemble.validate();
        spec.validate();
        eg.validate();
    }

    double effective_alpha(std::size_t labels_so_far) const {
        return correction == Correction::sqrt_rule
                   ? alpha_correction(spec.alpha, labels_so_far)
                   : spec.alpha;
    }
};

struct RoundRecord {
    int round = 0;
    std::size_t labels = 0;
    double alpha_eff = 0.0;
    double train_risk = 0.0;
    MetricValue train_violation;
    double test_accuracy = 0.0;
    MetricValue test_tprp;
    MetricValue test_eo;
    double wall_time_ms = 0.0;
    std::vector<std::string> warnings;
    nlohmann::json classifier;   // null unless snapshots requested
    nlohmann::json allocations;  // null unless allocation dumps requested

    nlohmann::json to_json() const {
        auto metric_json = [](const MetricValue& m) {
            return m.defined() ? nlohmann::json(*m.value) : nlohmann::json(nullptr);
        };
        return {{"round", round},
                {"labels", labels},
                {"alpha_eff", alpha_eff},
                {"train_risk", train_risk},
                {"train_violation", metric_json(train_violation)},
                {"test_accuracy", test_accuracy},
                {"test_tprp", metric_json(test_tprp)},
                {"test_eo", metric_json(test_eo)},
                {"wall_time_ms", wall_time_ms},
                {"warnings", warnings},
                {"classifier", classifier},
                {"allocations", allocations}};
    }
};

struct RunResult {
    std::vector<RoundRecord> records;
    RandomizedClassifier final_classifier;
    LabeledSet labeled;  // final labeled set with its acquisition metadata
};

namespace detail {

inline std::vector<double> uniform_probs(std::size_t n) {
    return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

}  // namespace detail

// One trial of the active loop over (train pool, test set). Round 0
// draws a uniform batch; later rounds of the active strategies train a
// perturbed ensemble, build the acquisition allocation(s), and sample
// the batch; passive keeps sampling uniformly. After every round a
// snapshot classifier is fitted at the round's corrected tolerance for
// curve reporting; the last snapshot is the returned classifier. A
// degenerate constraint in an intermediate snapshot falls back to an
// unconstrained fit with a warning; in the final round it is an error,
// because the returned classifier's fairness claim would be vacuous.
inline RunResult run_trial(const Dataset& train, const Dataset& test, const FareConfig& cfg,
                           RandomSource run_rng) {
    cfg.validate(train.size());

    Pool pool(train.size());
    const double nu = 1.0 / static_cast<double>(pool.size());
    LabeledSet labeled;
    RunResult result;
    bool group_exhausted_warned[2] = {false, false};

    for (std::size_t round = 0; round < cfg.rounds; ++round) {
        auto start = std::chrono::steady_clock::now();
        RandomSource round_rng = run_rng.child(stream::kRound).child(round);
        RandomSource sample_rng = round_rng.child(stream::kSample);
        RoundRecord record;
        record.round = static_cast<int>(round);

        BatchSample batch;
        if (round == 0 || cfg.strategy == Strategy::passive) {
            batch = sample_batch(pool, detail::uniform_probs(pool.size()), cfg.batch_size,
                                 sample_rng);
        } else {
            double alpha_ens = cfg.effective_alpha(cfg.batch_size * round);
            Ensemble ensemble = fit_perturbed_ensemble(labeled, cfg.ensemble, cfg.spec, alpha_ens,
                                                       cfg.eg, round_rng);
            if (ensemble.degenerate_fallbacks > 0)
                record.warnings.push_back(std::to_string(ensemble.degenerate_fallbacks) +
                                          " ensemble member(s) fell back to unconstrained fits");
            Allocation diff = lambda_diff(train, pool, ensemble.members, cfg.alloc_solver);
            if (cfg.dump_allocations)
                record.allocations = {{"lambda_diff",
                                       {{"ids", diff.support}, {"probs", diff.probs}}}};
            if (cfg.strategy == Strategy::fare) {
                std::size_t group_count[2] = {0, 0};
                for (std::size_t id : pool.ids()) ++group_count[train.a[id]];
                for (int g = 0; g < 2; ++g)
                    if (group_count[g] == 0 && !group_exhausted_warned[g])
                        group_exhausted_warned[g] = true;
                Allocation fair = lambda_fair(train, pool);
                if (cfg.dump_allocations)
                    record.allocations["lambda_fair"] = {{"ids", fair.support},
                                                         {"probs", fair.probs}};
                batch = mix_and_sample(pool, diff, fair, cfg.batch_size, sample_rng);
            } else {
                batch = sample_batch(pool, diff.dense(pool), cfg.batch_size, sample_rng);
            }
        }
        if (batch.topped_up)
            record.warnings.push_back("allocation support exhausted; batch topped up uniformly");
        for (int g = 0; g < 2; ++g)
            if (group_exhausted_warned[g])
                record.warnings.push_back("group " + std::to_string(g) + " exhausted in pool");

        std::vector<std::size_t> taken;
        taken.reserve(batch.points.size());
        for (const auto& point : batch.points) {
            labeled.append(train, point.id, nu, point.nu_tr);  // label reveal
            taken.push_back(point.id);
        }
        pool.remove(taken);

        record.labels = labeled.size();
        record.alpha_eff = cfg.effective_alpha(labeled.size());

        RandomizedClassifier snapshot;
        try {
            EfoResult solved = efo_solve(labeled, cfg.spec, record.alpha_eff, cfg.eg);
            snapshot = std::move(solved.classifier);
            record.train_risk = solved.report.risk;
            record.train_violation = solved.report.violation;
        } catch (const DegenerateConstraint& e) {
            // Group-balanced sampling makes a degenerate final cell mean
            // the pool itself lacked a group; that classifier's fairness
            // claim would be vacuous, so fare fails loudly. The ablation
            // arms sample with no group guarantee and degrade instead:
            // an unconstrained final fit is the behavior under study.
            if (round + 1 == cfg.rounds && cfg.strategy == Strategy::fare) throw;
            record.warnings.push_back(std::string("snapshot fell back to unconstrained fit: ") +
                                      e.what());
            std::vector<double> weights(labeled.size());
            for (std::size_t i = 0; i < labeled.size(); ++i) weights[i] = labeled.weight(i);
            snapshot.components = {fit_weighted(labeled.X, labeled.d, labeled.y, weights,
                                                cfg.eg.train)};
            snapshot.mix = {1.0};
            std::vector<int> preds = predict(snapshot, labeled.X, labeled.d);
            record.train_risk = ips_risk(labeled, preds);
            record.train_violation = violation(rate_table(labeled, preds, Weighting::ips),
                                               cfg.spec.metric);
        }

        TestMetrics metrics = test_metrics(test, snapshot);
        record.test_accuracy = metrics.accuracy;
        record.test_tprp = metrics.tprp;
        record.test_eo = metrics.eo;
        if (cfg.snapshot_classifiers) record.classifier = snapshot.to_json();
        record.wall_time_ms = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - start)
                                  .count();

        result.records.push_back(std::move(record));
        if (round + 1 == cfg.rounds) result.final_classifier = std::move(snapshot);
    }
    result.labeled = std::move(labeled);
    return result;
}

inline RunResult run_fare(const Dataset& train, const Dataset& test, FareConfig cfg,
                          RandomSource rng) {
    cfg.strategy = Strategy::fare;
    return run_trial(train, test, cfg, rng);
}

inline RunResult run_fare_no_fair(const Dataset& train, const Dataset& test, FareConfig cfg,
                                  RandomSource rng) {
    cfg.strategy = Strategy::fare_no_fair;
    return run_trial(train, test, cfg, rng);
}

inline RunResult run_passive(const Dataset& train, const Dataset& test, FareConfig cfg,
                             RandomSource rng) {
    cfg.strategy = Strategy::passive;
    return run_trial(train, test, cfg, rng);
}

}  // namespace fare
