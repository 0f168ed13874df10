#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "fare/dataset.hpp"
#include "fare/efo.hpp"
#include "fare/errors.hpp"
#include "fare/random.hpp"

namespace fare {

// Probability vector over current pool entries. Entries with zero mass
// are omitted from the support.
struct Allocation {
    std::vector<std::size_t> support;  // pool ids
    std::vector<double> probs;         // matching positive probabilities, sum 1

    // Expands to a vector aligned with pool.ids().
    std::vector<double> dense(const Pool& pool) const {
        std::vector<double> out(pool.ids().size(), 0.0);
        for (std::size_t s = 0; s < support.size(); ++s) {
            auto it = std::lower_bound(pool.ids().begin(), pool.ids().end(), support[s]);
            if (it == pool.ids().end() || *it != support[s])
                throw DataError("allocation supported outside the pool");
            out[static_cast<std::size_t>(it - pool.ids().begin())] = probs[s];
        }
        return out;
    }
};

struct EnsembleConfig {
    int k = 10;          // classifiers per round
    double sigma = 0.1;  // label flip probability

    void validate() const {
        if (k < 2) throw ConfigError("ensemble needs k >= 2 classifiers per round");
        if (!(sigma >= 0.0 && sigma < 0.5))
            throw ConfigError("sigma must lie in [0, 0.5), got " + std::to_string(sigma));
    }
};

// Independently flips each label with probability sigma; features,
// attributes and weights are untouched.
inline LabeledSet perturb_labels(const LabeledSet& D, double sigma, RandomSource& rng) {
    if (!(sigma >= 0.0 && sigma <= 1.0)) throw ConfigError("perturb_labels: sigma in [0, 1]");
    LabeledSet out = D;
    for (auto& label : out.y)
        if (rng.bernoulli(sigma)) label = 1 - label;
    return out;
}

struct Ensemble {
    std::vector<RandomizedClassifier> members;
    int degenerate_fallbacks = 0;  // members trained unconstrained after a degenerate cell
};

// Trains k classifiers on independent label-flipped copies of D via the
// fair oracle. A member whose constraint cell is empty in its perturbed
// copy falls back to an unconstrained importance-weighted fit; early
// rounds routinely have empty cells and the loop must proceed.
inline Ensemble fit_perturbed_ensemble(const LabeledSet& D, const EnsembleConfig& ens,
                                       const FairnessSpec& spec, double alpha_eff,
                                       const EGConfig& eg, RandomSource rng) {
    ens.validate();
    Ensemble out;
    out.members.reserve(static_cast<std::size_t>(ens.k));
    for (int i = 0; i < ens.k; ++i) {
        RandomSource member_rng = rng.child(stream::kMember).child(static_cast<std::uint64_t>(i));
        LabeledSet perturbed = perturb_labels(D, ens.sigma, member_rng);
        try {
            out.members.push_back(efo_solve(perturbed, spec, alpha_eff, eg).classifier);
        } catch (const DegenerateConstraint&) {
            std::vector<double> weights(perturbed.size());
            for (std::size_t idx = 0; idx < perturbed.size(); ++idx)
                weights[idx] = eg.weighting == Weighting::ips ? perturbed.weight(idx) : 1.0;
            RandomizedClassifier fallback;
            fallback.components = {fit_weighted(perturbed.X, perturbed.d, perturbed.y, weights,
                                                eg.train)};
            fallback.mix = {1.0};
            out.members.push_back(std::move(fallback));
            ++out.degenerate_fallbacks;
        }
    }
    return out;
}

struct AllocSolverConfig {
    int iterations = 1000;
    double step = 0.5;  // step / sqrt(t), on the sup-normalized subgradient
};

// Disagreement-optimal allocation: minimizes over the simplex the worst
// pairwise sum of inverse masses,
//   f(lambda) = max_{i<j} sum_{x in D_ij} 1 / lambda_x,
// where D_ij is the set of pool points classifiers i and j disagree on.
// The optimum is supported on the union U of the D_ij; entries outside
// U get exactly zero. Solved by entropic mirror descent restricted to
// U, uniform initialization, returning the best iterate. When no pair
// disagrees anywhere the allocation falls back to uniform over the
// pool.
inline Allocation lambda_diff(const Dataset& data, const Pool& pool,
                              const std::vector<RandomizedClassifier>& ensemble,
                              const AllocSolverConfig& solver = {}) {
    if (pool.empty()) throw DataError("lambda_diff: empty pool");
    if (ensemble.size() < 2) throw ConfigError("lambda_diff: need at least two classifiers");
    const auto& ids = pool.ids();
    const std::size_t m = ids.size();
    const std::size_t k = ensemble.size();

    std::vector<std::vector<int>> preds(k);
    for (std::size_t c = 0; c < k; ++c) {
        preds[c].resize(m);
        for (std::size_t p = 0; p < m; ++p) preds[c][p] = ensemble[c].predict(data.row(ids[p]));
    }

    // Pairwise disagreement masks over pool positions.
    std::vector<std::vector<std::size_t>> pairs;
    std::vector<bool> in_union(m, false);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
            std::vector<std::size_t> disagree;
            for (std::size_t p = 0; p < m; ++p)
                if (preds[i][p] != preds[j][p]) disagree.push_back(p);
            if (!disagree.empty()) {
                for (std::size_t p : disagree) in_union[p] = true;
                pairs.push_back(std::move(disagree));
            }
        }

    Allocation alloc;
    if (pairs.empty()) {
        alloc.support = ids;
        alloc.probs.assign(m, 1.0 / static_cast<double>(m));
        return alloc;
    }

    std::vector<std::size_t> union_pos;
    for (std::size_t p = 0; p < m; ++p)
        if (in_union[p]) union_pos.push_back(p);
    const std::size_t u = union_pos.size();
    std::vector<std::size_t> pos_to_u(m, 0);
    for (std::size_t s = 0; s < u; ++s) pos_to_u[union_pos[s]] = s;

    std::vector<double> q(u, 1.0 / static_cast<double>(u));
    auto objective = [&](const std::vector<double>& lam) {
        double worst = 0.0;
        for (const auto& pair : pairs) {
            double total = 0.0;
            for (std::size_t p : pair) total += 1.0 / lam[pos_to_u[p]];
            worst = std::max(worst, total);
        }
        return worst;
    };

    std::vector<double> best = q;
    double best_value = objective(q);
    std::vector<double> grad(u);
    for (int t = 1; t <= solver.iterations; ++t) {
        // Subgradient of the active pair.
        double worst = -1.0;
        const std::vector<std::size_t>* active = nullptr;
        for (const auto& pair : pairs) {
            double total = 0.0;
            for (std::size_t p : pair) total += 1.0 / q[pos_to_u[p]];
            if (total > worst) {
                worst = total;
                active = &pair;
            }
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        double sup = 0.0;
        for (std::size_t p : *active) {
            std::size_t s = pos_to_u[p];
            grad[s] = -1.0 / (q[s] * q[s]);
            sup = std::max(sup, -grad[s]);
        }
        double eta = solver.step / std::sqrt(static_cast<double>(t)) / sup;
        double total = 0.0;
        for (std::size_t s = 0; s < u; ++s) {
            q[s] *= std::exp(-eta * grad[s]);
            total += q[s];
        }
        for (auto& v : q) v = std::max(v / total, 1e-15);
        double value = objective(q);
        if (value < best_value) {
            best_value = value;
            best = q;
        }
    }

    alloc.support.reserve(u);
    alloc.probs.reserve(u);
    double total = 0.0;
    for (double v : best) total += v;
    for (std::size_t s = 0; s < u; ++s) {
        alloc.support.push_back(ids[union_pos[s]]);
        alloc.probs.push_back(best[s] / total);
    }
    return alloc;
}

// Group-balanced allocation: half the mass spread uniformly within each
// protected group present in the pool. If one group is exhausted all
// mass goes to the other.
inline Allocation lambda_fair(const Dataset& data, const Pool& pool) {
    if (pool.empty()) throw DataError("lambda_fair: empty pool");
    const auto& ids = pool.ids();
    std::size_t count[2] = {0, 0};
    for (std::size_t id : ids) ++count[data.a[id]];

    Allocation alloc;
    alloc.support = ids;
    alloc.probs.resize(ids.size());
    for (std::size_t p = 0; p < ids.size(); ++p) {
        int group = data.a[ids[p]];
        double group_mass = count[1 - group] == 0 ? 1.0 : 0.5;
        alloc.probs[p] = group_mass / static_cast<double>(count[group]);
    }
    return alloc;
}

struct SampledPoint {
    std::size_t id;
    double nu_tr;  // acquisition probability recorded for the importance weights
};

struct BatchSample {
    std::vector<SampledPoint> points;
    bool topped_up = false;  // mixture support was smaller than the batch
};

// Draws n distinct pool points by sequential sampling without
// replacement from the given distribution over pool.ids(); recorded
// acquisition probabilities are the start-of-batch mixture values. If
// the distribution's support is exhausted before n draws, the remaining
// draws fall back to uniform over the untouched pool with nu_tr
// recorded as 1/|pool| (the mixture value there is zero and recorded
// probabilities must stay positive).
inline BatchSample sample_batch(const Pool& pool, const std::vector<double>& probs, std::size_t n,
                                RandomSource& rng) {
    const auto& ids = pool.ids();
    if (n > ids.size()) throw DataError("batch size exceeds pool size");
    if (probs.size() != ids.size()) throw DataError("sample_batch: probability size mismatch");

    BatchSample batch;
    std::vector<double> mass = probs;
    double remaining = 0.0;
    std::size_t active = 0;
    for (double v : mass) {
        remaining += v;
        if (v > 0.0) ++active;
    }
    std::vector<bool> taken(ids.size(), false);

    for (std::size_t draw = 0; draw < n; ++draw) {
        if (active == 0) {
            // Support exhausted before the batch is full: top up uniformly
            // over untouched entries.
            batch.topped_up = true;
            std::vector<std::size_t> rest;
            for (std::size_t p = 0; p < ids.size(); ++p)
                if (!taken[p]) rest.push_back(p);
            for (std::size_t left = n - draw; left > 0; --left) {
                std::size_t pick = rng.uniform_below(rest.size());
                std::size_t p = rest[pick];
                rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(pick));
                taken[p] = true;
                batch.points.push_back({ids[p], 1.0 / static_cast<double>(ids.size())});
            }
            return batch;
        }
        double u = rng.uniform01() * std::max(remaining, 0.0);
        double cumulative = 0.0;
        std::size_t chosen = ids.size();
        for (std::size_t p = 0; p < ids.size(); ++p) {
            if (taken[p] || mass[p] <= 0.0) continue;
            cumulative += mass[p];
            chosen = p;
            if (u < cumulative) break;
        }
        // chosen is valid: active > 0 guarantees at least one candidate,
        // and the walk keeps the last one when u carries rounding dust.
        taken[chosen] = true;
        remaining -= mass[chosen];
        --active;
        batch.points.push_back({ids[chosen], probs[chosen]});
        mass[chosen] = 0.0;
    }
    return batch;
}

// Samples a batch from the half/half mixture of the two allocations.
inline BatchSample mix_and_sample(const Pool& pool, const Allocation& diff,
                                  const Allocation& fair, std::size_t n, RandomSource& rng) {
    std::vector<double> mixture = diff.dense(pool);
    std::vector<double> fair_dense = fair.dense(pool);
    for (std::size_t p = 0; p < mixture.size(); ++p)
        mixture[p] = 0.5 * mixture[p] + 0.5 * fair_dense[p];
    return sample_batch(pool, mixture, n, rng);
}

}  // namespace fare
