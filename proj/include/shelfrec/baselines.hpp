#pragma once
// Comparison policies: exact knapsack DP over per-facing marginal tables, a fractional
// relaxation with flooring, a genetic search, arm-level epsilon-greedy and uniform subsets.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "shelfrec/common.hpp"

namespace shelfrec::baselines {

// marginal[j] is the value added by the (j+1)-th facing; its size caps the quantity.
struct KnapsackItem {
    ProductId product_id;
    std::vector<double> marginal;
};

// Running minimum so every table is non-increasing.
void enforce_concavity(std::vector<KnapsackItem>& items);

double allocation_value(const std::vector<KnapsackItem>& items, const Assignment& a);

// Exact integer allocation maximizing the summed marginal values with sum q <= M.
// Facings with non-positive marginal value are never bought.
Assignment dp_knapsack(const std::vector<KnapsackItem>& items, int M);
// Exhaustive enumeration; test oracle for small instances.
Assignment brute_force_allocation(const std::vector<KnapsackItem>& items, int M);

// Continuous relaxation with linear value at each item's average per-facing value over its
// cap, filled greedily by density and floored.
Assignment lp_relax_greedy(const std::vector<KnapsackItem>& items, int M);

// Up to M distinct products drawn uniformly, one facing each.
Assignment random_subset(const std::vector<ProductId>& choices, int M, Rng& rng);

// ---- genetic search ----

struct GeneticConfig {
    int population = 50;
    int generations = 30;
    double crossover = 0.7;      // share of individuals that mate with a random partner
    double random_action = 0.3;  // probability of returning a random assignment instead
    void validate() const;
};

using Fitness = std::function<double(const Assignment&)>;

struct GeneticResult {
    Assignment best;
    double best_fitness = 0.0;
    std::vector<double> history;  // best fitness after each generation
};

// Genomes are M slots over `choices`, repaired so no product exceeds `max_facings`.
// Children replace their parent only when at least as fit.
GeneticResult genetic_search(const std::vector<ProductId>& choices, int M, int max_facings, const Fitness& fitness,
                             const GeneticConfig& cfg, Rng& rng);
// With probability random_action a random subset, otherwise the search optimum.
Assignment genetic_act(const std::vector<ProductId>& choices, int M, int max_facings, const Fitness& fitness,
                       const GeneticConfig& cfg, Rng& rng);

// ---- arm-level epsilon-greedy ----

// Arms are whole assortments observed at a display; value is the mean reward seen with them.
class EpsilonGreedy {
public:
    explicit EpsilonGreedy(double epsilon = 0.1);
    void observe(const DisplayId& display, const Assignment& arm, double reward);
    // Best arm (ties by arm order) or, with probability epsilon or when nothing was observed,
    // a uniform subset of the choices.
    Assignment act(const DisplayId& display, const std::vector<ProductId>& choices, int M, Rng& rng) const;
    std::size_t arms(const DisplayId& display) const;
    double epsilon() const { return epsilon_; }

private:
    struct Stats {
        double total = 0.0;
        long long n = 0;
    };
    double epsilon_;
    std::map<DisplayId, std::map<Assignment, Stats>> stats_;
};

}  // namespace shelfrec::baselines
