#include "shelfrec/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace shelfrec::baselines {

namespace {

std::vector<double> prefix_sums(const std::vector<double>& marginal) {
    std::vector<double> out(marginal.size() + 1, 0.0);
    for (std::size_t j = 0; j < marginal.size(); ++j) out[j + 1] = out[j] + marginal[j];
    return out;
}

void check_items(const std::vector<KnapsackItem>& items, int M) {
    if (M < 0) throw ArgumentError("knapsack: budget must be non-negative");
    for (const auto& it : items) {
        for (double v : it.marginal) {
            if (!std::isfinite(v)) throw ArgumentError("knapsack: non-finite marginal value for '" + it.product_id + "'");
        }
    }
}

}  // namespace

void enforce_concavity(std::vector<KnapsackItem>& items) {
    for (auto& it : items) {
        for (std::size_t j = 1; j < it.marginal.size(); ++j) it.marginal[j] = std::min(it.marginal[j], it.marginal[j - 1]);
    }
}

double allocation_value(const std::vector<KnapsackItem>& items, const Assignment& a) {
    double v = 0.0;
    for (const auto& it : items) {
        auto f = a.find(it.product_id);
        if (f == a.end()) continue;
        const auto q = static_cast<std::size_t>(f->second);
        if (q > it.marginal.size()) throw ArgumentError("allocation exceeds the table for '" + it.product_id + "'");
        for (std::size_t j = 0; j < q; ++j) v += it.marginal[j];
    }
    return v;
}

Assignment dp_knapsack(const std::vector<KnapsackItem>& items, int M) {
    check_items(items, M);
    const std::size_t n = items.size();
    const auto budget = static_cast<std::size_t>(M);
    std::vector<std::vector<double>> best(n + 1, std::vector<double>(budget + 1, 0.0));
    std::vector<std::vector<int>> choice(n, std::vector<int>(budget + 1, 0));
    for (std::size_t i = 0; i < n; ++i) {
        const auto pre = prefix_sums(items[i].marginal);
        for (std::size_t m = 0; m <= budget; ++m) {
            double b = best[i][m];
            int c = 0;
            const std::size_t qmax = std::min(m, items[i].marginal.size());
            for (std::size_t q = 1; q <= qmax; ++q) {
                const double v = best[i][m - q] + pre[q];
                if (v > b) {
                    b = v;
                    c = static_cast<int>(q);
                }
            }
            best[i + 1][m] = b;
            choice[i][m] = c;
        }
    }
    Assignment out;
    std::size_t m = budget;
    for (std::size_t i = n; i-- > 0;) {
        const int q = choice[i][m];
        if (q > 0) out[items[i].product_id] += q;
        m -= static_cast<std::size_t>(q);
    }
    return out;
}

Assignment brute_force_allocation(const std::vector<KnapsackItem>& items, int M) {
    check_items(items, M);
    Assignment best_a;
    double best_v = 0.0;
    std::vector<int> q(items.size(), 0);
    auto rec = [&](auto&& self, std::size_t i, int left) -> void {
        if (i == items.size()) {
            Assignment a;
            for (std::size_t k = 0; k < items.size(); ++k) {
                if (q[k] > 0) a[items[k].product_id] += q[k];
            }
            const double v = allocation_value(items, a);
            if (v > best_v) {
                best_v = v;
                best_a = a;
            }
            return;
        }
        const int cap = std::min<int>(left, static_cast<int>(items[i].marginal.size()));
        for (int k = 0; k <= cap; ++k) {
            q[i] = k;
            self(self, i + 1, left - k);
        }
        q[i] = 0;
    };
    rec(rec, 0, M);
    return best_a;
}

Assignment lp_relax_greedy(const std::vector<KnapsackItem>& items, int M) {
    check_items(items, M);
    struct Entry {
        std::size_t index;
        double density;
    };
    std::vector<Entry> order;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& mg = items[i].marginal;
        if (mg.empty()) continue;
        const double d = std::accumulate(mg.begin(), mg.end(), 0.0) / static_cast<double>(mg.size());
        if (d > 0.0) order.push_back({i, d});
    }
    std::stable_sort(order.begin(), order.end(), [&](const Entry& a, const Entry& b) {
        if (a.density != b.density) return a.density > b.density;
        return items[a.index].product_id < items[b.index].product_id;
    });
    Assignment out;
    double left = M;
    for (const auto& e : order) {
        if (left <= 0.0) break;
        const double x = std::min(left, static_cast<double>(items[e.index].marginal.size()));
        left -= x;
        const int q = static_cast<int>(std::floor(x));
        if (q > 0) out[items[e.index].product_id] += q;
    }
    return out;
}

Assignment random_subset(const std::vector<ProductId>& choices, int M, Rng& rng) {
    std::vector<ProductId> pool = choices;
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(std::max(M, 0)), pool.size());
    Assignment out;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + uniform_index(rng, pool.size() - i);
        std::swap(pool[i], pool[j]);
        out[pool[i]] = 1;
    }
    return out;
}

// ---------------- genetic ----------------

void GeneticConfig::validate() const {
    if (population < 1) throw ArgumentError("genetic: population must be >= 1");
    if (generations < 0) throw ArgumentError("genetic: generations must be non-negative");
    if (!(crossover >= 0.0 && crossover <= 1.0)) throw ArgumentError("genetic: crossover must lie in [0, 1]");
    if (!(random_action >= 0.0 && random_action <= 1.0)) throw ArgumentError("genetic: random_action must lie in [0, 1]");
}

namespace {

using Genome = std::vector<std::size_t>;  // M slots holding indices into choices

void repair(Genome& g, std::size_t n_choices, int max_facings, Rng& rng) {
    std::vector<int> count(n_choices, 0);
    for (auto& s : g) {
        if (count[s] < max_facings) {
            ++count[s];
            continue;
        }
        std::vector<std::size_t> open;
        for (std::size_t c = 0; c < n_choices; ++c) {
            if (count[c] < max_facings) open.push_back(c);
        }
        s = open[uniform_index(rng, open.size())];
        ++count[s];
    }
    std::sort(g.begin(), g.end());
}

Assignment decode(const Genome& g, const std::vector<ProductId>& choices) {
    Assignment a;
    for (auto s : g) ++a[choices[s]];
    return a;
}

Genome random_genome(std::size_t slots, std::size_t n_choices, int max_facings, Rng& rng) {
    Genome g(slots);
    for (auto& s : g) s = uniform_index(rng, n_choices);
    repair(g, n_choices, max_facings, rng);
    return g;
}

}  // namespace

GeneticResult genetic_search(const std::vector<ProductId>& choices_in, int M, int max_facings, const Fitness& fitness,
                             const GeneticConfig& cfg, Rng& rng) {
    cfg.validate();
    if (M < 0) throw ArgumentError("genetic: budget must be non-negative");
    if (max_facings < 1) throw ArgumentError("genetic: max_facings must be >= 1");
    std::vector<ProductId> choices = choices_in;
    std::sort(choices.begin(), choices.end());
    choices.erase(std::unique(choices.begin(), choices.end()), choices.end());
    GeneticResult res;
    if (choices.empty() || M == 0) {
        res.best_fitness = fitness(res.best);
        res.history.assign(static_cast<std::size_t>(cfg.generations), res.best_fitness);
        return res;
    }
    // slots beyond what the choices can hold are dropped
    const std::size_t slots =
        std::min<std::size_t>(static_cast<std::size_t>(M), choices.size() * static_cast<std::size_t>(max_facings));

    const auto pop_size = static_cast<std::size_t>(cfg.population);
    std::vector<Genome> pop;
    std::vector<double> fit;
    for (std::size_t i = 0; i < pop_size; ++i) {
        pop.push_back(random_genome(slots, choices.size(), max_facings, rng));
        fit.push_back(fitness(decode(pop.back(), choices)));
    }
    auto best_index = [&] {
        return static_cast<std::size_t>(std::max_element(fit.begin(), fit.end()) - fit.begin());
    };

    for (int gen = 0; gen < cfg.generations; ++gen) {
        for (std::size_t i = 0; i < pop_size; ++i) {
            Genome child;
            if (pop_size > 1 && uniform01(rng) < cfg.crossover) {
                std::size_t j = uniform_index(rng, pop_size - 1);
                if (j >= i) ++j;
                Genome merged = pop[i];
                merged.insert(merged.end(), pop[j].begin(), pop[j].end());
                for (std::size_t k = 0; k < slots; ++k) {
                    const std::size_t r = k + uniform_index(rng, merged.size() - k);
                    std::swap(merged[k], merged[r]);
                }
                child.assign(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(slots));
            } else {
                child = pop[i];
                child[uniform_index(rng, slots)] = uniform_index(rng, choices.size());
            }
            repair(child, choices.size(), max_facings, rng);
            const double f = fitness(decode(child, choices));
            if (f >= fit[i]) {
                pop[i] = std::move(child);
                fit[i] = f;
            }
        }
        res.history.push_back(fit[best_index()]);
    }
    const std::size_t b = best_index();
    res.best = decode(pop[b], choices);
    res.best_fitness = fit[b];
    return res;
}

Assignment genetic_act(const std::vector<ProductId>& choices, int M, int max_facings, const Fitness& fitness,
                       const GeneticConfig& cfg, Rng& rng) {
    cfg.validate();
    if (uniform01(rng) < cfg.random_action) return random_subset(choices, M, rng);
    return genetic_search(choices, M, max_facings, fitness, cfg, rng).best;
}

// ---------------- epsilon-greedy ----------------

EpsilonGreedy::EpsilonGreedy(double epsilon) : epsilon_(epsilon) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ArgumentError("epsilon-greedy: epsilon must lie in [0, 1]");
}

void EpsilonGreedy::observe(const DisplayId& display, const Assignment& arm, double reward) {
    auto& s = stats_[display][arm];
    s.total += reward;
    ++s.n;
}

Assignment EpsilonGreedy::act(const DisplayId& display, const std::vector<ProductId>& choices, int M, Rng& rng) const {
    auto it = stats_.find(display);
    if (uniform01(rng) < epsilon_ || it == stats_.end() || it->second.empty()) return random_subset(choices, M, rng);
    const Assignment* best = nullptr;
    double best_mean = -std::numeric_limits<double>::infinity();
    for (const auto& [arm, s] : it->second) {
        const double m = s.total / static_cast<double>(s.n);
        if (m > best_mean) {
            best_mean = m;
            best = &arm;
        }
    }
    return *best;
}

std::size_t EpsilonGreedy::arms(const DisplayId& display) const {
    auto it = stats_.find(display);
    return it == stats_.end() ? 0 : it->second.size();
}

}  // namespace shelfrec::baselines
