#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "fare/errors.hpp"

namespace fare {

// Linear classifier over feature vectors: hard prediction thresholds
// the logit at zero.
struct LinearClassifier {
    std::vector<double> w;
    double b = 0.0;

    double score(const double* x) const {
        double z = b;
        for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * x[j];
        return z;
    }

    int predict(const double* x) const { return score(x) >= 0.0 ? 1 : 0; }

    bool operator==(const LinearClassifier& other) const {
        return w == other.w && b == other.b;
    }

    nlohmann::json to_json() const { return {{"w", w}, {"b", b}}; }

    static LinearClassifier from_json(const nlohmann::json& j) {
        LinearClassifier h;
        h.w = j.at("w").get<std::vector<double>>();
        h.b = j.at("b").get<double>();
        return h;
    }
};

struct TrainConfig {
    int max_iters = 500;
    double step_size = 1.0;       // initial step for the backtracking search
    double grad_tolerance = 1e-6;
    std::uint64_t seed = 0;       // reserved; zero initialization uses no randomness
    std::vector<double>* loss_trace = nullptr;  // when set, receives the per-iteration loss
};

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double log1p_exp(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

// Mean weighted logistic loss at the given coefficients; weights are
// expected to sum to 1.
inline double weighted_logistic_loss(const std::vector<double>& X, std::size_t d,
                                     const std::vector<int>& y01,
                                     const std::vector<double>& weights,
                                     const LinearClassifier& h) {
    const std::size_t n = y01.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (weights[i] == 0.0) continue;
        double z = h.score(X.data() + i * d);
        loss += weights[i] * (log1p_exp(z) - static_cast<double>(y01[i]) * z);
    }
    return loss;
}

// Gradient of the loss above with respect to (w, b); the bias slot is
// appended as the last entry.
inline void weighted_logistic_gradient(const std::vector<double>& X, std::size_t d,
                                       const std::vector<int>& y01,
                                       const std::vector<double>& weights,
                                       const LinearClassifier& h, std::vector<double>& grad) {
    const std::size_t n = y01.size();
    grad.assign(d + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (weights[i] == 0.0) continue;
        const double* x = X.data() + i * d;
        double residual = weights[i] * (sigmoid(h.score(x)) - static_cast<double>(y01[i]));
        for (std::size_t j = 0; j < d; ++j) grad[j] += residual * x[j];
        grad[d] += residual;
    }
}

// Weighted binary logistic regression, no regularization. Full-batch
// gradient descent from zero initialization with Armijo backtracking
// (factor 0.5, c = 1e-4). Weights are normalized to sum 1 up front, so
// positively rescaling all weights cannot change the result. On
// separable data the unregularized loss has no finite minimizer; the
// iterate norm is capped at 1e4 and training stops there.
inline LinearClassifier fit_weighted(const std::vector<double>& X, std::size_t d,
                                     const std::vector<int>& y01,
                                     const std::vector<double>& weights,
                                     const TrainConfig& cfg = {}) {
    const std::size_t n = y01.size();
    if (n == 0) throw DataError("fit_weighted: empty dataset");
    if (X.size() != n * d) throw DataError("fit_weighted: X shape mismatch");
    if (cfg.max_iters < 1 || cfg.step_size <= 0.0 || cfg.grad_tolerance <= 0.0)
        throw ConfigError("fit_weighted: invalid training config");

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(weights[i] >= 0.0)) throw DataError("fit_weighted: negative or NaN weight");
        total += weights[i];
    }
    if (total <= 0.0) throw DataError("fit_weighted: all weights are zero");
    for (double v : X)
        if (!std::isfinite(v)) throw DataError("fit_weighted: non-finite feature value");

    std::vector<double> wn(n);
    for (std::size_t i = 0; i < n; ++i) wn[i] = weights[i] / total;

    constexpr double kNormCap = 1e4;
    constexpr double kArmijoC = 1e-4;

    LinearClassifier h;
    h.w.assign(d, 0.0);
    double loss = weighted_logistic_loss(X, d, y01, wn, h);
    if (cfg.loss_trace) cfg.loss_trace->push_back(loss);
    std::vector<double> grad;
    double step = cfg.step_size;

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        weighted_logistic_gradient(X, d, y01, wn, h, grad);
        double grad_sq = 0.0;
        for (double g : grad) grad_sq += g * g;
        if (std::sqrt(grad_sq) <= cfg.grad_tolerance) break;

        step = std::min(step * 2.0, 1e8);
        LinearClassifier trial = h;
        double trial_loss;
        while (true) {
            for (std::size_t j = 0; j < d; ++j) trial.w[j] = h.w[j] - step * grad[j];
            trial.b = h.b - step * grad[d];
            trial_loss = weighted_logistic_loss(X, d, y01, wn, trial);
            if (trial_loss <= loss - kArmijoC * step * grad_sq) break;
            step *= 0.5;
            if (step < 1e-16) {  // no descent progress possible at double precision
                return h;
            }
        }
        h = trial;
        loss = trial_loss;
        if (cfg.loss_trace) cfg.loss_trace->push_back(loss);

        double norm_sq = h.b * h.b;
        for (double v : h.w) norm_sq += v * v;
        if (norm_sq > kNormCap * kNormCap) break;  // separable data, stop at the cap
    }
    return h;
}

// Cost-sensitive classification: c0[i] and c1[i] are the costs of
// predicting 0 and 1 on example i. Reduces exactly to weighted logistic
// regression with pseudo-label 1{c0 > c1} and weight |c0 - c1|. When
// every c0[i] == c1[i] the objective is constant and the zero
// classifier is returned.
inline LinearClassifier fit_cost_sensitive(const std::vector<double>& X, std::size_t d,
                                           const std::vector<double>& c0,
                                           const std::vector<double>& c1,
                                           const TrainConfig& cfg = {}) {
    const std::size_t n = c0.size();
    if (c1.size() != n) throw DataError("fit_cost_sensitive: cost vectors differ in length");
    std::vector<int> pseudo(n);
    std::vector<double> weights(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(c0[i]) || !std::isfinite(c1[i]))
            throw DataError("fit_cost_sensitive: non-finite cost");
        pseudo[i] = c0[i] > c1[i] ? 1 : 0;
        weights[i] = std::abs(c0[i] - c1[i]);
        total += weights[i];
    }
    if (total <= 0.0) {
        LinearClassifier h;
        h.w.assign(d, 0.0);
        return h;
    }
    return fit_weighted(X, d, pseudo, weights, cfg);
}

inline std::vector<double> predict_proba(const LinearClassifier& h, const std::vector<double>& X,
                                         std::size_t d) {
    const std::size_t n = X.size() / d;
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = sigmoid(h.score(X.data() + i * d));
    return p;
}

inline std::vector<int> predict(const LinearClassifier& h, const std::vector<double>& X,
                                std::size_t d) {
    const std::size_t n = X.size() / d;
    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = h.predict(X.data() + i * d);
    return out;
}

}  // namespace fare
