#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "fare/dataset.hpp"
#include "fare/errors.hpp"
#include "fare/fairness.hpp"

namespace fare {

// Unbiased sample variance of a {0,1} indicator sequence, defined by
// the pairwise form 1/(n(n-1)) sum_{l<l'} (b_l - b_l')^2, which equals
// p(1-p) * n/(n-1) for indicator mean p.
inline double empirical_variance_indicators(const std::vector<int>& bits) {
    const std::size_t n = bits.size();
    if (n < 2) throw DataError("empirical_variance_indicators: needs at least two samples");
    double ones = 0.0;
    for (int b : bits) ones += static_cast<double>(b);
    double zeros = static_cast<double>(n) - ones;
    return ones * zeros / (static_cast<double>(n) * static_cast<double>(n - 1));
}

// Per-cell statistics feeding one confidence term C_{j,k}.
struct CellBoundInputs {
    std::size_t n = 0;        // total sample count
    double delta = 0.05;      // confidence level
    double p_hat = 0.0;       // empirical frequency of {h=1, y=k, a=j}
    double var_num = 0.0;     // sample variance of that indicator
    double var_den = 0.0;     // sample variance of the {y=k, a=j} indicator
    double den_hat = 0.0;     // empirical frequency of {y=k, a=j}
};

// Bernstein-style confidence term for one (group, label) cell:
//   C = (p_hat + dev_num) * dev_den / den_hat^2 + dev_num / den_hat
// with dev = sqrt(2 V log(2/delta) / n) + log(2/delta) / n. Returns
// +infinity for an empty cell.
inline double cell_bound(const CellBoundInputs& in) {
    if (in.n == 0 || !(in.delta > 0.0 && in.delta < 1.0))
        throw ConfigError("cell_bound: need n >= 1 and delta in (0, 1)");
    if (in.den_hat <= 0.0) return std::numeric_limits<double>::infinity();
    const double log_term = std::log(2.0 / in.delta) / static_cast<double>(in.n);
    const double dev_num = std::sqrt(2.0 * in.var_num * log_term) + log_term;
    const double dev_den = std::sqrt(2.0 * in.var_den * log_term) + log_term;
    return (in.p_hat + dev_num) * dev_den / (in.den_hat * in.den_hat) + dev_num / in.den_hat;
}

namespace detail {

struct CellStats {
    double p_hat[2][2] = {{0, 0}, {0, 0}};
    double den_hat[2][2] = {{0, 0}, {0, 0}};
    double var_num[2][2] = {{0, 0}, {0, 0}};
    double var_den[2][2] = {{0, 0}, {0, 0}};
    std::size_t n = 0;
};

// Unweighted cell frequencies and indicator variances of a labeled set;
// the deviation bound treats the sample as an i.i.d. draw from the
// population.
inline CellStats cell_stats(const LabeledSet& D, const std::vector<int>& predictions) {
    CellStats s;
    s.n = D.size();
    if (s.n < 2) throw DataError("cell bounds need at least two samples");
    double count_num[2][2] = {{0, 0}, {0, 0}};
    double count_den[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < s.n; ++i) {
        count_den[D.a[i]][D.y[i]] += 1.0;
        if (predictions[i] == 1) count_num[D.a[i]][D.y[i]] += 1.0;
    }
    const double n = static_cast<double>(s.n);
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
            s.p_hat[j][k] = count_num[j][k] / n;
            s.den_hat[j][k] = count_den[j][k] / n;
            s.var_num[j][k] = count_num[j][k] * (n - count_num[j][k]) / (n * (n - 1.0));
            s.var_den[j][k] = count_den[j][k] * (n - count_den[j][k]) / (n * (n - 1.0));
        }
    return s;
}

}  // namespace detail

// Deviation bound |L_population - L_empirical| for the plug-in
// violation estimate: the sum of the metric's cells, C_{0,1} + C_{1,1}
// for TPRP, C_{0,0} + C_{1,0} for FPRP, all four for EO. Infinite if a
// required cell is empty.
inline double violation_bound(const LabeledSet& D, const std::vector<int>& predictions,
                              Metric metric, double delta) {
    const auto stats = detail::cell_stats(D, predictions);
    auto cell = [&](int j, int k) {
        CellBoundInputs in;
        in.n = stats.n;
        in.delta = delta;
        in.p_hat = stats.p_hat[j][k];
        in.var_num = stats.var_num[j][k];
        in.var_den = stats.var_den[j][k];
        in.den_hat = stats.den_hat[j][k];
        return cell_bound(in);
    };
    switch (metric) {
        case Metric::TPRP: return cell(0, 1) + cell(1, 1);
        case Metric::FPRP: return cell(0, 0) + cell(1, 0);
        case Metric::EO: return cell(0, 0) + cell(0, 1) + cell(1, 0) + cell(1, 1);
    }
    throw ConfigError("violation_bound: unknown metric");
}

// Classifier-free simplification of the bound above: bounds every cell
// term by its worst case over classifiers, leaving only the cell
// frequencies. TPRP and FPRP take 2 max over groups at their label;
// EO takes 4 max over all four cells.
inline double simple_bound(const LabeledSet& D, Metric metric, double delta) {
    if (D.size() < 2) throw DataError("simple_bound: needs at least two samples");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("simple_bound: delta in (0, 1)");
    const double n = static_cast<double>(D.size());
    double den_hat[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < D.size(); ++i) den_hat[D.a[i]][D.y[i]] += 1.0 / n;

    const double log_term = std::log(2.0 / delta) / n;
    const double dev = std::sqrt(2.0 * log_term) + log_term;
    const double dev_sq = std::sqrt(2.0 * log_term) + 2.0 * log_term;
    auto cell_term = [&](int j, int k) {
        if (den_hat[j][k] <= 0.0) return std::numeric_limits<double>::infinity();
        double lead = dev / den_hat[j][k];
        double quad = dev_sq / den_hat[j][k];
        return 2.0 * lead + quad * quad;
    };
    switch (metric) {
        case Metric::TPRP:
            return 2.0 * std::max(cell_term(0, 1), cell_term(1, 1));
        case Metric::FPRP:
            return 2.0 * std::max(cell_term(0, 0), cell_term(1, 0));
        case Metric::EO:
            return 4.0 * std::max(std::max(cell_term(0, 0), cell_term(0, 1)),
                                  std::max(cell_term(1, 0), cell_term(1, 1)));
    }
    throw ConfigError("simple_bound: unknown metric");
}

// Conservative tolerance for the empirical constraint: alpha minus
// 1/sqrt(labels), clamped at zero.
inline double alpha_correction(double alpha, std::size_t labels_so_far) {
    if (labels_so_far == 0) throw ConfigError("alpha_correction: needs at least one label");
    return std::max(0.0, alpha - 1.0 / std::sqrt(static_cast<double>(labels_so_far)));
}

}  // namespace fare
