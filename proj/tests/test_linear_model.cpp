#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fare/linear_model.hpp"
#include "fare/random.hpp"

using namespace fare;

namespace {

struct Problem {
    std::vector<double> X;
    std::size_t d;
    std::vector<int> y;
    std::vector<double> w;
};

Problem random_problem(RandomSource& rng, std::size_t n, std::size_t d) {
    Problem p;
    p.d = d;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) p.X.push_back(rng.normal());
        p.y.push_back(rng.bernoulli(0.5) ? 1 : 0);
        p.w.push_back(0.1 + rng.uniform01());
    }
    return p;
}

}  // namespace

TEST_SUITE_BEGIN("linear_model");

TEST_CASE("separable one-dimensional data is fit correctly") {
    std::vector<double> X = {-1.0, 1.0};
    std::vector<int> y = {0, 1};
    std::vector<double> w = {1.0, 1.0};
    LinearClassifier h = fit_weighted(X, 1, y, w);
    CHECK(h.w[0] > 0.0);
    CHECK(h.predict(&X[0]) == 0);
    CHECK(h.predict(&X[1]) == 1);
}

TEST_CASE("positively rescaling all weights changes nothing") {
    RandomSource rng(1);
    Problem p = random_problem(rng, 40, 3);
    std::vector<double> doubled(p.w.size());
    for (std::size_t i = 0; i < p.w.size(); ++i) doubled[i] = 2.0 * p.w[i];
    LinearClassifier h1 = fit_weighted(p.X, p.d, p.y, p.w);
    LinearClassifier h2 = fit_weighted(p.X, p.d, p.y, doubled);
    CHECK(h1.w == h2.w);
    CHECK(h1.b == h2.b);
}

TEST_CASE("zero weight on a point equals refitting without it") {
    RandomSource rng(2);
    Problem p = random_problem(rng, 30, 2);
    p.y[7] = 1 - p.y[7];  // mislabel one point, then silence it
    std::vector<double> weights = p.w;
    weights[7] = 0.0;
    LinearClassifier with_zero = fit_weighted(p.X, p.d, p.y, weights);

    Problem reduced;
    reduced.d = p.d;
    for (std::size_t i = 0; i < p.y.size(); ++i) {
        if (i == 7) continue;
        reduced.X.insert(reduced.X.end(), p.X.begin() + i * p.d, p.X.begin() + (i + 1) * p.d);
        reduced.y.push_back(p.y[i]);
        reduced.w.push_back(p.w[i]);
    }
    LinearClassifier without = fit_weighted(reduced.X, reduced.d, reduced.y, reduced.w);

    // Oracle comparison on a fixed grid of query points.
    RandomSource grid_rng(3);
    for (int g = 0; g < 200; ++g) {
        double q[2] = {4.0 * grid_rng.uniform01() - 2.0, 4.0 * grid_rng.uniform01() - 2.0};
        CHECK(with_zero.predict(q) == without.predict(q));
    }
}

TEST_CASE("all-zero weights is an error for fit_weighted") {
    std::vector<double> X = {-1.0, 1.0};
    std::vector<int> y = {0, 1};
    std::vector<double> w = {0.0, 0.0};
    CHECK_THROWS_AS(fit_weighted(X, 1, y, w), DataError);
}

TEST_CASE("non-finite features are rejected") {
    std::vector<double> X = {-1.0, std::numeric_limits<double>::infinity()};
    std::vector<int> y = {0, 1};
    std::vector<double> w = {1.0, 1.0};
    CHECK_THROWS_AS(fit_weighted(X, 1, y, w), DataError);
}

TEST_CASE("cost-sensitive fit with 0-1 costs reduces to plain fitting") {
    RandomSource rng(4);
    Problem p = random_problem(rng, 50, 3);
    std::vector<double> c0(p.y.size()), c1(p.y.size());
    for (std::size_t i = 0; i < p.y.size(); ++i) {
        c0[i] = p.y[i] == 1 ? 1.0 : 0.0;
        c1[i] = p.y[i] == 0 ? 1.0 : 0.0;
    }
    std::vector<double> unit(p.y.size(), 1.0);
    LinearClassifier cs = fit_cost_sensitive(p.X, p.d, c0, c1);
    LinearClassifier plain = fit_weighted(p.X, p.d, p.y, unit);
    CHECK(cs.w == plain.w);
    CHECK(cs.b == plain.b);
}

TEST_CASE("equal costs return the zero classifier") {
    std::vector<double> X = {-1.0, 0.5, 1.0};
    std::vector<double> c = {0.3, 0.7, 0.1};
    LinearClassifier h = fit_cost_sensitive(X, 1, c, c);
    CHECK(h.w == std::vector<double>{0.0});
    CHECK(h.b == 0.0);
}

TEST_CASE("a dominant cost forces the cheap prediction") {
    std::vector<double> X = {0.7};
    std::vector<double> c0 = {0.0}, c1 = {5.0};
    LinearClassifier h = fit_cost_sensitive(X, 1, c0, c1);
    CHECK(h.predict(&X[0]) == 0);
}

TEST_CASE("analytic gradient matches central finite differences") {
    RandomSource rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 2 + rng.uniform_below(19);
        std::size_t d = 1 + rng.uniform_below(5);
        Problem p = random_problem(rng, n, d);
        double total = std::accumulate(p.w.begin(), p.w.end(), 0.0);
        for (auto& v : p.w) v /= total;

        LinearClassifier h;
        h.w.resize(d);
        for (auto& v : h.w) v = rng.normal();
        h.b = rng.normal();

        std::vector<double> grad;
        weighted_logistic_gradient(p.X, d, p.y, p.w, h, grad);

        const double eps = 1e-6;
        for (std::size_t j = 0; j <= d; ++j) {
            LinearClassifier plus = h, minus = h;
            if (j < d) {
                plus.w[j] += eps;
                minus.w[j] -= eps;
            } else {
                plus.b += eps;
                minus.b -= eps;
            }
            double numeric = (weighted_logistic_loss(p.X, d, p.y, p.w, plus) -
                              weighted_logistic_loss(p.X, d, p.y, p.w, minus)) /
                             (2.0 * eps);
            double denom = std::max({std::abs(grad[j]), std::abs(numeric), 1e-8});
            CHECK(std::abs(grad[j] - numeric) / denom <= 1e-5);
        }
    }
}

TEST_CASE("training loss is non-increasing across iterations") {
    RandomSource rng(6);
    for (int trial = 0; trial < 5; ++trial) {
        Problem p = random_problem(rng, 60, 3);
        TrainConfig cfg;
        std::vector<double> trace;
        cfg.loss_trace = &trace;
        fit_weighted(p.X, p.d, p.y, p.w, cfg);
        REQUIRE(trace.size() >= 2);
        for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-15);
    }
}

TEST_CASE("row order does not matter after canonical sorting") {
    RandomSource rng(7);
    Problem p = random_problem(rng, 40, 2);
    std::vector<std::size_t> ids(p.y.size());
    std::iota(ids.begin(), ids.end(), 0);

    // Shuffle rows, then restore id order; the fit must be bit-identical.
    std::vector<std::size_t> perm = ids;
    for (std::size_t i = perm.size() - 1; i > 0; --i)
        std::swap(perm[i], perm[rng.uniform_below(i + 1)]);

    Problem shuffled;
    shuffled.d = p.d;
    std::vector<std::size_t> shuffled_ids;
    for (std::size_t i : perm) {
        shuffled.X.insert(shuffled.X.end(), p.X.begin() + i * p.d, p.X.begin() + (i + 1) * p.d);
        shuffled.y.push_back(p.y[i]);
        shuffled.w.push_back(p.w[i]);
        shuffled_ids.push_back(i);
    }
    std::vector<std::size_t> order(perm.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        return shuffled_ids[l] < shuffled_ids[r];
    });
    Problem canon;
    canon.d = p.d;
    for (std::size_t i : order) {
        canon.X.insert(canon.X.end(), shuffled.X.begin() + i * p.d,
                       shuffled.X.begin() + (i + 1) * p.d);
        canon.y.push_back(shuffled.y[i]);
        canon.w.push_back(shuffled.w[i]);
    }

    LinearClassifier h1 = fit_weighted(p.X, p.d, p.y, p.w);
    LinearClassifier h2 = fit_weighted(canon.X, canon.d, canon.y, canon.w);
    CHECK(h1.w == h2.w);
    CHECK(h1.b == h2.b);
}

TEST_CASE("predict_proba follows the closed form") {
    LinearClassifier zero;
    zero.w = {0.0, 0.0};
    zero.b = 0.0;
    std::vector<double> X = {1.0, -2.0, 0.3, 4.0};
    for (double p : predict_proba(zero, X, 2)) CHECK(p == 0.5);

    LinearClassifier h;
    h.w = {0.7, -1.2};
    h.b = 0.4;
    auto probs = predict_proba(h, X, 2);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        double z = h.score(X.data() + i * 2);
        CHECK(std::abs(probs[i] - 1.0 / (1.0 + std::exp(-z))) < 1e-12);
    }

    LinearClassifier big;
    big.w = {0.0};
    big.b = 50.0;
    std::vector<double> one = {0.0};
    CHECK(predict_proba(big, one, 1)[0] > 1.0 - 1e-12);
}

TEST_CASE("classifier serializes through JSON") {
    LinearClassifier h;
    h.w = {0.25, -1.5};
    h.b = 0.125;
    LinearClassifier back = LinearClassifier::from_json(h.to_json());
    CHECK(back.w == h.w);
    CHECK(back.b == h.b);
}

TEST_SUITE_END();
