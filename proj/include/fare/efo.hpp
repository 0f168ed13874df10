#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fare/dataset.hpp"
#include "fare/errors.hpp"
#include "fare/fairness.hpp"
#include "fare/linear_model.hpp"

namespace fare {

// Finite mixture over linear classifiers, the natural output of the
// saddle-point reduction. Prediction is deterministic: predict 1 iff
// the mixture mass on components voting 1 is at least the mass voting
// 0 (ties go to 1), so evaluation never needs Monte-Carlo draws.
struct RandomizedClassifier {
    std::vector<LinearClassifier> components;
    std::vector<double> mix;

    int predict(const double* x) const {
        double mass_pos = 0.0, mass_neg = 0.0;
        for (std::size_t t = 0; t < components.size(); ++t)
            (components[t].predict(x) == 1 ? mass_pos : mass_neg) += mix[t];
        return mass_pos >= mass_neg ? 1 : 0;
    }

    nlohmann::json to_json() const {
        nlohmann::json comps = nlohmann::json::array();
        for (const auto& h : components) comps.push_back(h.to_json());
        return {{"components", comps}, {"mix", mix}};
    }
};

inline std::vector<int> predict(const RandomizedClassifier& rc, const std::vector<double>& X,
                                std::size_t d) {
    const std::size_t n = X.size() / d;
    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = rc.predict(X.data() + i * d);
    return out;
}

inline TestMetrics test_metrics(const Dataset& test, const RandomizedClassifier& rc) {
    return test_metrics(test, predict(rc, test.X, test.d));
}

// One signed linearization of an absolute-value fairness constraint:
// sign * (rate_0 - rate_1) <= alpha_eff on the label cell y = label_cell.
struct SignedConstraint {
    int label_cell;
    int sign;
};

// The linearized constraint system for one EFO call. Denominator
// masses are frozen at their dataset values (they do not depend on the
// classifier), which makes each constraint linear in the prediction
// indicators.
struct ConstraintSet {
    Metric metric = Metric::TPRP;
    double alpha_eff = 0.0;
    std::vector<SignedConstraint> constraints;
    double den[2][2] = {{0.0, 0.0}, {0.0, 0.0}};

    static ConstraintSet build(const LabeledSet& D, const FairnessSpec& spec, double alpha_eff,
                               Weighting weighting) {
        ConstraintSet cs;
        cs.metric = spec.metric;
        cs.alpha_eff = alpha_eff;
        std::vector<int> cells = spec.metric == Metric::EO ? std::vector<int>{1, 0}
                                                           : std::vector<int>{1};
        for (std::size_t i = 0; i < D.size(); ++i) {
            double mass = weighting == Weighting::ips ? D.weight(i) : 1.0;
            cs.den[D.a[i]][D.y[i]] += mass;
        }
        for (int k : cells) {
            for (int j = 0; j < 2; ++j)
                if (cs.den[j][k] <= 0.0) throw DegenerateConstraint(j, k);
            cs.constraints.push_back({k, +1});
            cs.constraints.push_back({k, -1});
        }
        return cs;
    }

    // Signed slacks g_c(h) = sign * (rate_0 - rate_1) - alpha_eff for the
    // given prediction vector; feasible iff all <= 0.
    std::vector<double> slacks(const LabeledSet& D, const std::vector<int>& predictions,
                               Weighting weighting) const {
        double num[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
        for (std::size_t i = 0; i < D.size(); ++i)
            if (predictions[i] == 1)
                num[D.a[i]][D.y[i]] += weighting == Weighting::ips ? D.weight(i) : 1.0;
        std::vector<double> out;
        out.reserve(constraints.size());
        for (const auto& c : constraints) {
            double gap = num[0][c.label_cell] / den[0][c.label_cell] -
                         num[1][c.label_cell] / den[1][c.label_cell];
            out.push_back(static_cast<double>(c.sign) * gap - alpha_eff);
        }
        return out;
    }
};

struct EGConfig {
    double B = 10.0;         // l1 cap on the Lagrange multipliers
    int T_eg = 50;           // multiplier ascent iterations
    double eta = 0.0;        // multiplier step; 0 selects 2 log(C+1) / (B sqrt(T))
    double nu_gap = 0.01;    // target duality gap (early stop)
    bool last_iterate = false;         // return the final best response, not the average
    Weighting weighting = Weighting::ips;
    TrainConfig train;

    void validate() const {
        if (!(B > 0.0) || T_eg < 1 || !(nu_gap > 0.0) || eta < 0.0)
            throw ConfigError("EGConfig: need B > 0, T_eg >= 1, nu_gap > 0, eta >= 0");
    }
};

struct SolveReport {
    double risk = 0.0;
    MetricValue violation;
    std::vector<double> violation_by_constraint;  // signed slacks of the returned classifier
    std::vector<double> multipliers;
    int iterations = 0;
    double gap = 0.0;
    bool constrained = true;

    nlohmann::json to_json() const {
        nlohmann::json j{{"risk", risk},
                         {"violation_by_constraint", violation_by_constraint},
                         {"multipliers", multipliers},
                         {"iterations", iterations},
                         {"gap", gap}};
        j["violation"] = violation.defined() ? nlohmann::json(*violation.value)
                                             : nlohmann::json(nullptr);
        return j;
    }
};

struct EfoResult {
    RandomizedClassifier classifier;
    SolveReport report;
};

// Per-example costs of the Lagrangian at the given multipliers:
//   c0_i = (w_i / n) 1{y_i = 1}
//   c1_i = (w_i / n) 1{y_i = 0}
//         + sum_c lambda_c * sign_c * gamma(a_i) * w_i / den[a_i][k_c] * 1{y_i = k_c}
// with w_i = nu_i / nu_tr_i (or 1 for the unweighted variant) and
// gamma(0) = +1, gamma(1) = -1. Only the cost of predicting 1 carries
// the constraint perturbation, since the rates count positive
// predictions.
inline std::pair<std::vector<double>, std::vector<double>> lagrangian_costs(
    const LabeledSet& D, const std::vector<double>& multipliers, const ConstraintSet& cs,
    Weighting weighting) {
    if (multipliers.size() != cs.constraints.size())
        throw ConfigError("lagrangian_costs: multiplier count mismatch");
    const std::size_t n = D.size();
    std::vector<double> c0(n, 0.0), c1(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double w = weighting == Weighting::ips ? D.weight(i) : 1.0;
        double base = w / static_cast<double>(n);
        c0[i] = D.y[i] == 1 ? base : 0.0;
        c1[i] = D.y[i] == 0 ? base : 0.0;
        double group_sign = D.a[i] == 0 ? 1.0 : -1.0;
        for (std::size_t c = 0; c < cs.constraints.size(); ++c) {
            if (D.y[i] != cs.constraints[c].label_cell) continue;
            c1[i] += multipliers[c] * static_cast<double>(cs.constraints[c].sign) * group_sign *
                     w / cs.den[D.a[i]][cs.constraints[c].label_cell];
        }
    }
    return {std::move(c0), std::move(c1)};
}

// Empirical fair oracle: minimize the importance-weighted empirical
// risk subject to the empirical fairness violation being at most
// alpha_eff, via exponentiated-gradient ascent on the Lagrange
// multipliers with cost-sensitive best responses. Returns the averaged
// play as a mixture (duplicate best responses merged), together with a
// report of the achieved risk, constraint slacks and duality gap.
// Throws DegenerateConstraint if a required (a, y) cell has no mass.
inline EfoResult efo_solve(const LabeledSet& D, const FairnessSpec& spec, double alpha_eff,
                           const EGConfig& cfg = {}) {
    if (D.size() == 0) throw DataError("efo_solve: empty labeled set");
    if (!(alpha_eff >= 0.0 && alpha_eff <= 1.0))
        throw ConfigError("efo_solve: alpha_eff must lie in [0, 1]");
    cfg.validate();

    const ConstraintSet cs = ConstraintSet::build(D, spec, alpha_eff, cfg.weighting);
    const std::size_t n_constraints = cs.constraints.size();
    const double eta =
        cfg.eta > 0.0
            ? cfg.eta
            : 2.0 * std::log(static_cast<double>(n_constraints) + 1.0) /
                  (cfg.B * std::sqrt(static_cast<double>(cfg.T_eg)));

    // Plain risk (no constraint term) of a prediction vector.
    auto risk_of = [&](const std::vector<int>& preds) {
        double total = 0.0;
        for (std::size_t i = 0; i < D.size(); ++i) {
            double w = cfg.weighting == Weighting::ips ? D.weight(i) : 1.0;
            if (preds[i] != D.y[i]) total += w;
        }
        return total / static_cast<double>(D.size());
    };

    std::vector<double> theta(n_constraints, 0.0);
    std::vector<double> lambda(n_constraints, 0.0);
    std::vector<double> lambda_sum(n_constraints, 0.0);

    std::vector<LinearClassifier> plays;
    double avg_risk = 0.0;                            // mean risk of plays
    std::vector<double> avg_slack(n_constraints, 0.0);  // mean slacks of plays
    double gap = std::numeric_limits<double>::infinity();
    int iterations = 0;

    // Any multiplier yields a lower bound min_h L(h, lambda) on the
    // saddle value; the gap check keeps the best bound seen. lambda = 0
    // gives the unconstrained risk, computed once.
    const std::vector<double> zeros(n_constraints, 0.0);
    auto [z0, z1] = lagrangian_costs(D, zeros, cs, cfg.weighting);
    double dual_best = risk_of(predict(fit_cost_sensitive(D.X, D.d, z0, z1, cfg.train), D.X, D.d));

    for (int t = 1; t <= cfg.T_eg; ++t) {
        double exp_sum = 1.0;  // slack coordinate at theta = 0
        for (double th : theta) exp_sum += std::exp(th);
        for (std::size_t c = 0; c < n_constraints; ++c)
            lambda[c] = cfg.B * std::exp(theta[c]) / exp_sum;

        auto [c0, c1] = lagrangian_costs(D, lambda, cs, cfg.weighting);
        LinearClassifier h = fit_cost_sensitive(D.X, D.d, c0, c1, cfg.train);
        std::vector<int> preds = predict(h, D.X, D.d);
        std::vector<double> slack = cs.slacks(D, preds, cfg.weighting);

        plays.push_back(h);
        double tf = static_cast<double>(t);
        double h_risk = risk_of(preds);
        avg_risk += (h_risk - avg_risk) / tf;
        for (std::size_t c = 0; c < n_constraints; ++c) {
            avg_slack[c] += (slack[c] - avg_slack[c]) / tf;
            lambda_sum[c] += lambda[c];
        }
        iterations = t;

        // h is the best response to lambda, so L(h, lambda) is a free
        // dual bound.
        double dual_here = h_risk;
        for (std::size_t c = 0; c < n_constraints; ++c) dual_here += lambda[c] * slack[c];
        dual_best = std::max(dual_best, dual_here);

        // One more bound at the averaged multiplier.
        std::vector<double> lambda_bar(n_constraints);
        for (std::size_t c = 0; c < n_constraints; ++c) lambda_bar[c] = lambda_sum[c] / tf;
        auto [d0, d1] = lagrangian_costs(D, lambda_bar, cs, cfg.weighting);
        LinearClassifier br = fit_cost_sensitive(D.X, D.d, d0, d1, cfg.train);
        std::vector<int> br_preds = predict(br, D.X, D.d);
        std::vector<double> br_slack = cs.slacks(D, br_preds, cfg.weighting);
        double dual_bar = risk_of(br_preds);
        for (std::size_t c = 0; c < n_constraints; ++c) dual_bar += lambda_bar[c] * br_slack[c];
        dual_best = std::max(dual_best, dual_bar);

        // Primal value of the averaged play against its best adversary.
        double worst = 0.0;
        for (double s : avg_slack) worst = std::max(worst, s);
        double primal = avg_risk + cfg.B * worst;

        gap = primal - dual_best;
        if (gap <= cfg.nu_gap) break;

        for (std::size_t c = 0; c < n_constraints; ++c) theta[c] += eta * slack[c];
    }

    EfoResult result;
    if (cfg.last_iterate) {
        result.classifier.components = {plays.back()};
        result.classifier.mix = {1.0};
    } else {
        // Uniform average over plays, duplicates merged.
        const double unit = 1.0 / static_cast<double>(plays.size());
        for (const auto& h : plays) {
            auto& comps = result.classifier.components;
            auto it = std::find(comps.begin(), comps.end(), h);
            if (it == comps.end()) {
                comps.push_back(h);
                result.classifier.mix.push_back(unit);
            } else {
                result.classifier.mix[static_cast<std::size_t>(it - comps.begin())] += unit;
            }
        }
    }

    std::vector<int> final_preds = predict(result.classifier, D.X, D.d);
    result.report.risk = risk_of(final_preds);
    result.report.violation = violation(rate_table(D, final_preds, cfg.weighting), spec.metric);
    result.report.violation_by_constraint = cs.slacks(D, final_preds, cfg.weighting);
    result.report.multipliers = lambda;
    result.report.iterations = iterations;
    result.report.gap = gap;
    return result;
}

}  // namespace fare
