#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fare/concentration.hpp"
#include "fare/dataset.hpp"
#include "fare/fairness.hpp"
#include "fare/linear_model.hpp"
#include "fare/random.hpp"

namespace fare {

struct CoverageReport {
    std::size_t n = 0;
    std::size_t trials = 0;
    double delta = 0.0;
    double population_violation = 0.0;
    double coverage = 0.0;          // fraction of resamples where the bound holds
    std::size_t vacuous = 0;        // resamples with an undefined estimate or infinite bound
    bool simple_dominates = true;   // simple_bound >= violation_bound on every resample
    double mean_bound = 0.0;        // over resamples with a finite bound

    nlohmann::json to_json() const {
        return {{"n", n},
                {"trials", trials},
                {"delta", delta},
                {"population_violation", population_violation},
                {"coverage", coverage},
                {"vacuous_resamples", vacuous},
                {"simple_dominates", simple_dominates},
                {"mean_bound", mean_bound}};
    }
};

// Monte-Carlo check of the deviation bound on the synthetic population:
// a fixed classifier is evaluated against a large reference set standing
// in for the population, then `trials` resamples of size n are drawn and
// the event |L_pop - L_sample| <= violation_bound(sample) is counted.
// Resamples where the estimate is undefined or the bound infinite hold
// vacuously.
inline CoverageReport bounds_coverage(std::size_t n, std::size_t trials, double delta,
                                      std::uint64_t seed,
                                      std::size_t reference_size = 1000000) {
    if (n < 2 || trials < 1) throw ConfigError("bounds_coverage: need n >= 2 and trials >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("bounds_coverage: delta in (0, 1)");

    LinearClassifier h;
    h.w = {1.0, 0.25};
    h.b = -0.1;

    RandomSource root(seed);
    RandomSource pop_rng = root.child(1);

    // Population violation via a large plug-in evaluation.
    double num[2] = {0.0, 0.0}, den[2] = {0.0, 0.0};
    double x[2];
    int a, y;
    for (std::size_t i = 0; i < reference_size; ++i) {
        sample_synthetic_point(pop_rng, x, a, y);
        if (y != 1) continue;
        den[a] += 1.0;
        if (h.predict(x) == 1) num[a] += 1.0;
    }
    CoverageReport report;
    report.n = n;
    report.trials = trials;
    report.delta = delta;
    report.population_violation = std::abs(num[0] / den[0] - num[1] / den[1]);

    std::size_t covered = 0;
    double bound_sum = 0.0;
    std::size_t bound_count = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        RandomSource rng = root.child(2).child(t);
        LabeledSet D;
        D.d = 2;
        for (std::size_t i = 0; i < n; ++i) {
            sample_synthetic_point(rng, x, a, y);
            D.X.push_back(x[0]);
            D.X.push_back(x[1]);
            D.a.push_back(a);
            D.y.push_back(y);
            D.nu.push_back(1.0);
            D.nu_tr.push_back(1.0);
            D.ids.push_back(i);
        }
        std::vector<int> preds = predict(h, D.X, D.d);
        double bound = violation_bound(D, preds, Metric::TPRP, delta);
        double simple = simple_bound(D, Metric::TPRP, delta);
        if (!(simple >= bound - 1e-12)) report.simple_dominates = false;

        MetricValue estimate = violation(rate_table(D, preds, Weighting::plugin), Metric::TPRP);
        if (!estimate.defined() || std::isinf(bound)) {
            ++covered;
            ++report.vacuous;
            continue;
        }
        bound_sum += bound;
        ++bound_count;
        if (std::abs(report.population_violation - *estimate.value) <= bound) ++covered;
    }
    report.coverage = static_cast<double>(covered) / static_cast<double>(trials);
    report.mean_bound = bound_count > 0 ? bound_sum / static_cast<double>(bound_count)
                                        : std::numeric_limits<double>::infinity();
    return report;
}

}  // namespace fare
