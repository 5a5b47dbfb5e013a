#pragma once
// Exact reference computations used by unit and acceptance tests.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "shelfrec/candidates.hpp"

namespace oracle {

using shelfrec::ProductId;

// P(neighbour drawn) for k weighted draws without replacement, by walking every draw sequence.
inline void enumerate_draws(const std::vector<std::pair<ProductId, double>>& pool, std::vector<bool>& used, int left,
                            double prob, std::map<ProductId, double>& incl) {
    if (left == 0) return;
    double remaining = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (!used[i]) remaining += pool[i].second;
    }
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (used[i]) continue;
        const double p = prob * pool[i].second / remaining;
        incl[pool[i].first] += p;
        used[i] = true;
        enumerate_draws(pool, used, left - 1, p, incl);
        used[i] = false;
    }
}

// Per seed inclusion probabilities of each neighbour.
inline std::map<ProductId, std::map<ProductId, double>> seed_inclusion(const shelfrec::candidates::CoOccurrenceGraph& g,
                                                                       const std::set<ProductId>& seed, int tau) {
    std::map<ProductId, std::map<ProductId, double>> out;
    for (const auto& s : seed) {
        auto it = g.adjacency.find(s);
        if (it == g.adjacency.end() || it->second.empty()) continue;
        std::vector<std::pair<ProductId, double>> pool;
        for (const auto& [p, w] : it->second) pool.emplace_back(p, static_cast<double>(w));
        std::vector<bool> used(pool.size(), false);
        const int k = std::min<int>(tau, static_cast<int>(pool.size()));
        enumerate_draws(pool, used, k, 1.0, out[s]);
    }
    return out;
}

// P(product receives at least one vote); seeds draw independently.
inline std::map<ProductId, double> marginal_inclusion(const shelfrec::candidates::CoOccurrenceGraph& g,
                                                      const std::set<ProductId>& seed, int tau) {
    std::map<ProductId, double> miss;
    for (const auto& [s, incl] : seed_inclusion(g, seed, tau)) {
        for (const auto& [p, q] : incl) {
            auto [it, fresh] = miss.emplace(p, 1.0);
            it->second *= 1.0 - q;
        }
    }
    std::map<ProductId, double> out;
    for (const auto& [p, m] : miss) out[p] = 1.0 - m;
    return out;
}

// E[vote share]; the total vote count is fixed by the seeds' degrees.
inline std::map<ProductId, double> expected_share(const shelfrec::candidates::CoOccurrenceGraph& g,
                                                  const std::set<ProductId>& seed, int tau) {
    std::map<ProductId, double> out;
    double total = 0.0;
    for (const auto& [s, incl] : seed_inclusion(g, seed, tau)) {
        for (const auto& [p, q] : incl) {
            out[p] += q;
            total += q;
        }
    }
    for (auto& [p, v] : out) v /= total;
    return out;
}

}  // namespace oracle
