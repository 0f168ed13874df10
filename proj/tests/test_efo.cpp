#include <doctest.h>

#include <cmath>
#include <vector>

#include "fare/efo.hpp"
#include "fare/random.hpp"

using namespace fare;

namespace {

// Two overlapping Gaussian blobs per group with label noise; all four
// (a, y) cells populated.
LabeledSet blob_problem(RandomSource& rng, std::size_t n, double group_shift = 0.0) {
    LabeledSet D;
    D.d = 2;
    for (std::size_t i = 0; i < n; ++i) {
        int a = rng.bernoulli(0.5) ? 1 : 0;
        int y = rng.bernoulli(0.5) ? 1 : 0;
        double cx = (y == 1 ? 1.0 : -1.0) + group_shift * a;
        double cy = group_shift * a * (y == 1 ? 1.0 : -0.5);
        D.X.push_back(cx + rng.normal());
        D.X.push_back(cy + rng.normal());
        D.a.push_back(a);
        D.y.push_back(y);
        D.nu.push_back(1.0 / static_cast<double>(n));
        D.nu_tr.push_back(1.0 / static_cast<double>(n));
        D.ids.push_back(i);
    }
    return D;
}

double unconstrained_risk(const LabeledSet& D) {
    std::vector<double> weights(D.size());
    for (std::size_t i = 0; i < D.size(); ++i) weights[i] = D.weight(i);
    LinearClassifier h = fit_weighted(D.X, D.d, D.y, weights);
    return ips_risk(D, predict(h, D.X, D.d));
}

}  // namespace

TEST_SUITE_BEGIN("efo");

TEST_CASE("vacuous constraint recovers unconstrained accuracy") {
    RandomSource rng(61);
    FairnessSpec spec{Metric::TPRP, 1.0};
    for (int trial = 0; trial < 5; ++trial) {
        LabeledSet D = blob_problem(rng, 150 + rng.uniform_below(150));
        EfoResult result = efo_solve(D, spec, 1.0);
        double baseline = unconstrained_risk(D);
        CHECK(result.report.risk <= baseline + 0.01);
        CHECK(result.report.gap <= 0.0101);
    }
}

TEST_CASE("identical group distributions need no multiplier mass") {
    // Group is assigned independently of (x, y): the unconstrained
    // optimum already has near-zero violation.
    RandomSource rng(62);
    LabeledSet D = blob_problem(rng, 600);
    FairnessSpec spec{Metric::TPRP, 0.2};
    EfoResult result = efo_solve(D, spec, 0.2);
    REQUIRE(result.report.violation.defined());
    CHECK(*result.report.violation.value <= 0.2 + 0.02);
    CHECK(result.report.risk <= unconstrained_risk(D) + 0.02);
}

TEST_CASE("constraint is enforced on the training data") {
    RandomSource rng(63);
    // Group-dependent label geometry: the unconstrained fit is unfair.
    LabeledSet D;
    D.d = 2;
    const std::size_t n = 500;
    for (std::size_t i = 0; i < n; ++i) {
        int a = rng.bernoulli(0.4) ? 1 : 0;
        int y = rng.bernoulli(0.5) ? 1 : 0;
        double flip = a == 1 ? -1.0 : 1.0;  // groups want opposite boundaries
        D.X.push_back(flip * (y == 1 ? 1.2 : -1.2) + rng.normal());
        D.X.push_back(rng.normal());
        D.a.push_back(a);
        D.y.push_back(y);
        D.nu.push_back(1.0 / n);
        D.nu_tr.push_back(1.0 / n);
        D.ids.push_back(i);
    }
    FairnessSpec spec{Metric::TPRP, 0.1};

    // Confirm the tension: unconstrained is unfair here.
    std::vector<double> weights(n, 1.0);
    LinearClassifier plain = fit_weighted(D.X, D.d, D.y, weights);
    MetricValue plain_violation =
        violation(rate_table(D, predict(plain, D.X, D.d), Weighting::plugin), Metric::TPRP);
    REQUIRE(plain_violation.defined());
    CHECK(*plain_violation.value > 0.3);

    EfoResult result = efo_solve(D, spec, 0.1);
    REQUIRE(result.report.violation.defined());
    CHECK(*result.report.violation.value <= 0.1 + 0.05);
}

TEST_CASE("zero multipliers give pure importance-weighted risk costs") {
    RandomSource rng(64);
    LabeledSet D = blob_problem(rng, 40);
    for (std::size_t i = 0; i < D.size(); ++i) D.nu_tr[i] = 0.01 + 0.05 * rng.uniform01();
    FairnessSpec spec{Metric::TPRP, 0.1};
    ConstraintSet cs = ConstraintSet::build(D, spec, 0.1, Weighting::ips);

    std::vector<double> zeros(cs.constraints.size(), 0.0);
    auto [c0, c1] = lagrangian_costs(D, zeros, cs, Weighting::ips);
    for (std::size_t i = 0; i < D.size(); ++i) {
        double base = D.weight(i) / static_cast<double>(D.size());
        CHECK(c0[i] == (D.y[i] == 1 ? base : 0.0));
        CHECK(c1[i] == (D.y[i] == 0 ? base : 0.0));
    }
}

TEST_CASE("a TPRP multiplier perturbs only y=1 rows") {
    RandomSource rng(65);
    LabeledSet D = blob_problem(rng, 60);
    FairnessSpec spec{Metric::TPRP, 0.1};
    ConstraintSet cs = ConstraintSet::build(D, spec, 0.1, Weighting::ips);
    REQUIRE(cs.constraints.size() == 2);

    std::vector<double> zeros(cs.constraints.size(), 0.0);
    std::vector<double> lifted = zeros;
    lifted[0] = 10.0;  // +-direction TPR constraint at full mass B
    auto [base0, base1] = lagrangian_costs(D, zeros, cs, Weighting::ips);
    auto [pert0, pert1] = lagrangian_costs(D, lifted, cs, Weighting::ips);
    for (std::size_t i = 0; i < D.size(); ++i) {
        CHECK(pert0[i] == base0[i]);  // cost of predicting 0 never moves
        if (D.y[i] == 1) {
            CHECK(pert1[i] != base1[i]);
        } else {
            CHECK(pert1[i] == base1[i]);
        }
    }
}

TEST_CASE("Lagrangian slope in a multiplier is the signed slack") {
    RandomSource rng(66);
    LabeledSet D = blob_problem(rng, 80);
    FairnessSpec spec{Metric::EO, 0.15};
    ConstraintSet cs = ConstraintSet::build(D, spec, 0.15, Weighting::ips);

    LinearClassifier h;
    h.w = {0.8, -0.3};
    h.b = 0.1;
    std::vector<int> preds = predict(h, D.X, D.d);

    // Lagrangian value via the cost vectors, with the constant
    // -alpha * sum(lambda) term added back.
    auto lagrangian = [&](const std::vector<double>& lambda) {
        auto [c0, c1] = lagrangian_costs(D, lambda, cs, Weighting::ips);
        double value = 0.0;
        for (std::size_t i = 0; i < D.size(); ++i) value += preds[i] == 1 ? c1[i] : c0[i];
        for (double l : lambda) value -= l * cs.alpha_eff;
        return value;
    };

    std::vector<double> expected = cs.slacks(D, preds, Weighting::ips);
    std::vector<double> lambda(cs.constraints.size());
    for (auto& l : lambda) l = rng.uniform01();
    const double eps = 1e-5;
    for (std::size_t c = 0; c < lambda.size(); ++c) {
        std::vector<double> plus = lambda, minus = lambda;
        plus[c] += eps;
        minus[c] -= eps;
        double slope = (lagrangian(plus) - lagrangian(minus)) / (2.0 * eps);
        CHECK(slope == doctest::Approx(expected[c]).epsilon(1e-6));
    }
}

TEST_CASE("degenerate constraint cells are reported, not masked") {
    LabeledSet D;
    D.d = 1;
    for (int i = 0; i < 10; ++i) {  // group 1 never has y = 1
        D.X.push_back(static_cast<double>(i));
        D.a.push_back(i % 2);
        D.y.push_back(i % 2 == 0 ? (i % 4 == 0 ? 1 : 0) : 0);
        D.nu.push_back(0.1);
        D.nu_tr.push_back(0.1);
        D.ids.push_back(i);
    }
    FairnessSpec spec{Metric::TPRP, 0.1};
    CHECK_THROWS_AS(efo_solve(D, spec, 0.1), DegenerateConstraint);
    try {
        efo_solve(D, spec, 0.1);
    } catch (const DegenerateConstraint& e) {
        CHECK(e.group_value == 1);
        CHECK(e.label_value == 1);
    }
}

TEST_CASE("mixture prediction rules") {
    LinearClassifier pos;
    pos.w = {1.0};
    pos.b = 0.0;
    LinearClassifier neg;
    neg.w = {-1.0};
    neg.b = -1.0;

    RandomizedClassifier single;
    single.components = {pos};
    single.mix = {1.0};
    double x = 0.7;
    CHECK(single.predict(&x) == pos.predict(&x));

    RandomizedClassifier tie;
    tie.components = {pos, neg};
    tie.mix = {0.5, 0.5};
    CHECK(pos.predict(&x) != neg.predict(&x));
    CHECK(tie.predict(&x) == 1);  // ties go to 1

    RandomizedClassifier swapped;
    swapped.components = {neg, pos};
    swapped.mix = {0.5, 0.5};
    std::vector<double> grid = {-2.0, -0.5, 0.0, 0.3, 1.7};
    for (double q : grid) CHECK(tie.predict(&q) == swapped.predict(&q));
}

TEST_CASE("efo_solve is deterministic") {
    RandomSource rng(67);
    LabeledSet D = blob_problem(rng, 200);
    FairnessSpec spec{Metric::TPRP, 0.05};
    EfoResult r1 = efo_solve(D, spec, 0.05);
    EfoResult r2 = efo_solve(D, spec, 0.05);
    CHECK(r1.classifier.to_json() == r2.classifier.to_json());
    CHECK(r1.report.to_json() == r2.report.to_json());
}

TEST_CASE("report violation is self-consistent with the estimators") {
    RandomSource rng(68);
    LabeledSet D = blob_problem(rng, 150);
    FairnessSpec spec{Metric::TPRP, 0.1};
    EfoResult result = efo_solve(D, spec, 0.1);
    std::vector<int> preds = predict(result.classifier, D.X, D.d);
    MetricValue recomputed = violation(rate_table(D, preds, Weighting::ips), spec.metric);
    REQUIRE(result.report.violation.defined());
    REQUIRE(recomputed.defined());
    CHECK(*result.report.violation.value == *recomputed.value);
}

TEST_CASE("tightening the tolerance cannot reduce the risk materially") {
    RandomSource rng(69);
    LabeledSet D = blob_problem(rng, 400, 1.5);
    FairnessSpec spec{Metric::TPRP, 1.0};
    double previous = -1.0;
    for (double alpha : {0.5, 0.3, 0.2, 0.1, 0.05}) {
        spec.alpha = alpha;
        EfoResult result = efo_solve(D, spec, alpha);
        if (previous >= 0.0) CHECK(result.report.risk >= previous - 0.0101);
        previous = result.report.risk;
    }
}

TEST_CASE("last-iterate mode returns a single component") {
    RandomSource rng(70);
    LabeledSet D = blob_problem(rng, 120);
    FairnessSpec spec{Metric::TPRP, 0.1};
    EGConfig cfg;
    cfg.last_iterate = true;
    EfoResult result = efo_solve(D, spec, 0.1, cfg);
    CHECK(result.classifier.components.size() == 1);
    CHECK(result.classifier.mix == std::vector<double>{1.0});
}

TEST_CASE("unweighted constraint variant matches ips under uniform weights") {
    RandomSource rng(71);
    LabeledSet D = blob_problem(rng, 100);
    FairnessSpec spec{Metric::TPRP, 0.1};
    EGConfig ips_cfg;
    EGConfig plain_cfg;
    plain_cfg.weighting = Weighting::plugin;
    EfoResult a = efo_solve(D, spec, 0.1, ips_cfg);
    EfoResult b = efo_solve(D, spec, 0.1, plain_cfg);
    CHECK(a.classifier.to_json() == b.classifier.to_json());
}

TEST_SUITE_END();
