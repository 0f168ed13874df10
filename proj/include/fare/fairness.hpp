#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fare/dataset.hpp"
#include "fare/errors.hpp"
#include "fare/linear_model.hpp"

namespace fare {

enum class Metric { TPRP, FPRP, EO };

inline std::string metric_name(Metric m) {
    switch (m) {
        case Metric::TPRP: return "tprp";
        case Metric::FPRP: return "fprp";
        case Metric::EO: return "eo";
    }
    return "?";
}

inline Metric metric_from_name(const std::string& name) {
    if (name == "tprp") return Metric::TPRP;
    if (name == "fprp") return Metric::FPRP;
    if (name == "eo") return Metric::EO;
    throw ConfigError("unknown metric '" + name + "' (expected tprp or eo)");
}

struct FairnessSpec {
    Metric metric = Metric::TPRP;
    double alpha = 0.1;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw ConfigError("alpha must lie in [0, 1], got " + std::to_string(alpha));
        if (metric == Metric::FPRP)
            throw ConfigError("constraint metric must be tprp or eo");
    }
};

enum class Weighting { plugin, ips };

// Weighted group-conditional rate masses. Cell (j, k) accumulates mass
// for protected attribute a = j and label y = k:
//   num = weighted count of {h = 1, y = k, a = j},
//   den = weighted count of {y = k, a = j},
// so rate(j, 1) is group j's TPR and rate(j, 0) its FPR. A cell with
// zero denominator mass is degenerate, not an error.
struct GroupRateTable {
    double num[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
    double den[2][2] = {{0.0, 0.0}, {0.0, 0.0}};

    bool degenerate(int j, int k) const { return den[j][k] <= 0.0; }
    double rate(int j, int k) const { return num[j][k] / den[j][k]; }
};

inline GroupRateTable rate_table(const LabeledSet& D, const std::vector<int>& predictions,
                                 Weighting weighting) {
    if (D.size() == 0) throw DataError("rate_table: empty labeled set");
    if (predictions.size() != D.size()) throw DataError("rate_table: prediction size mismatch");
    GroupRateTable table;
    for (std::size_t i = 0; i < D.size(); ++i) {
        double mass = 1.0;
        if (weighting == Weighting::ips) {
            if (!(D.nu_tr[i] > 0.0)) throw DataError("rate_table: nu_tr must be positive");
            mass = D.nu[i] / D.nu_tr[i];
        }
        table.den[D.a[i]][D.y[i]] += mass;
        if (predictions[i] == 1) table.num[D.a[i]][D.y[i]] += mass;
    }
    return table;
}

// A fairness violation value, or the reason it is undefined.
struct MetricValue {
    std::optional<double> value;
    std::string note;

    bool defined() const { return value.has_value(); }
};

namespace detail {

inline MetricValue rate_gap(const GroupRateTable& table, int k, const char* what) {
    for (int j = 0; j < 2; ++j)
        if (table.degenerate(j, k))
            return {std::nullopt, std::string(what) + " undefined: empty cell (a=" +
                                      std::to_string(j) + ", y=" + std::to_string(k) + ")"};
    return {std::abs(table.rate(0, k) - table.rate(1, k)), ""};
}

}  // namespace detail

// TPRP = |TPR_0 - TPR_1|, FPRP = |FPR_0 - FPR_1|, EO = max of the two.
inline MetricValue violation(const GroupRateTable& table, Metric metric) {
    switch (metric) {
        case Metric::TPRP: return detail::rate_gap(table, 1, "tprp");
        case Metric::FPRP: return detail::rate_gap(table, 0, "fprp");
        case Metric::EO: {
            MetricValue tp = detail::rate_gap(table, 1, "eo");
            MetricValue fp = detail::rate_gap(table, 0, "eo");
            if (!tp.defined()) return tp;
            if (!fp.defined()) return fp;
            return {std::max(*tp.value, *fp.value), ""};
        }
    }
    return {std::nullopt, "unknown metric"};
}

// Importance-weighted empirical risk: (1/n) sum (nu_i / nu_tr_i) 1{h != y}.
// Coincides with the plug-in risk when nu_tr is uniform and equals nu.
inline double ips_risk(const LabeledSet& D, const std::vector<int>& predictions) {
    if (predictions.size() != D.size()) throw DataError("ips_risk: prediction size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < D.size(); ++i) {
        if (!(D.nu_tr[i] > 0.0)) throw DataError("ips_risk: nu_tr must be positive");
        if (predictions[i] != D.y[i]) total += D.nu[i] / D.nu_tr[i];
    }
    return total / static_cast<double>(D.size());
}

struct TestMetrics {
    double accuracy = 0.0;
    MetricValue tprp;
    MetricValue eo;
};

// Plug-in evaluation on a held-out set.
inline TestMetrics test_metrics(const Dataset& test, const std::vector<int>& predictions) {
    if (predictions.size() != test.size()) throw DataError("test_metrics: prediction size mismatch");
    GroupRateTable table;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (predictions[i] == test.y[i]) ++correct;
        table.den[test.a[i]][test.y[i]] += 1.0;
        if (predictions[i] == 1) table.num[test.a[i]][test.y[i]] += 1.0;
    }
    TestMetrics out;
    out.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
    out.tprp = violation(table, Metric::TPRP);
    out.eo = violation(table, Metric::EO);
    return out;
}

inline TestMetrics test_metrics(const Dataset& test, const LinearClassifier& h) {
    return test_metrics(test, predict(h, test.X, test.d));
}

}  // namespace fare
