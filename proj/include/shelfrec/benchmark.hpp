#pragma once
// Benchmark campaigns on synthetic worlds: fit the pipeline on a logging period, then score
// the full policy, baselines and ablation cells by replay on freshly logged uniform data.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shelfrec/baselines.hpp"
#include "shelfrec/candidates.hpp"
#include "shelfrec/evaluation.hpp"
#include "shelfrec/geocluster.hpp"
#include "shelfrec/reward.hpp"
#include "shelfrec/simulator.hpp"

namespace shelfrec::benchmark {

struct Ablation {
    bool clustering = true;  // off: one global cluster
    bool rbp = true;         // off: least-squares point estimates with zero spread
    bool search = true;      // off: top-M by mean payoff over planogram and candidates
    std::string name() const;
    bool operator==(const Ablation&) const = default;
};
std::vector<Ablation> all_ablations();  // the 8 cells, full configuration first

struct BenchConfig {
    simulator::WorldConfig world;
    int n_seeds = 30;
    std::uint64_t seed = 0;
    std::vector<std::string> policies{"full", "eps", "genetic", "dp", "lp"};
    bool ablations = false;
    int horizon_cycles = 1;  // search iterations per recommendation

    int k = 3;  // k-means clusters for the reward model
    int tau = 10;
    int V = 2;
    double search_epsilon = 0.05;
    double lambda = 1.0;
    int chains = 2;
    int draws = 400;
    int warmup = 400;
    std::size_t predictive_draws = 0;  // 0: use all posterior draws

    double baseline_epsilon = 0.1;
    baselines::GeneticConfig genetic;

    double subsample = 0.5;
    std::string match = "exact";  // or "jaccard"
    double jaccard_theta = 0.75;

    void validate() const;
};

std::vector<std::string> known_policies();

// Everything fitted from one seed's logging period.
struct SeedModel {
    simulator::SyntheticWorld world;
    simulator::TrainingLog training;
    std::vector<evaluation::LoggedInteraction> eval_logs;
    candidates::Catalog catalog;
    candidates::CoOccurrenceGraph graph;
    geocluster::ClusterAssignment clusters;  // k-means on SpAGMM profiles
    geocluster::ClusterAssignment global;    // every store in cluster 0
    std::map<DisplayId, candidates::CandidateSet> candidates;  // pruned and restricted to the store's pool
    std::optional<reward::RbpPosterior> rbp_clustered;
    std::optional<reward::RbpPosterior> rbp_global;
};

SeedModel prepare_seed(const BenchConfig& cfg, std::uint64_t seed, bool need_global_rbp);

// A replay policy for a named baseline or ablation cell.
evaluation::Policy make_policy(const std::string& name, const SeedModel& m, const BenchConfig& cfg,
                               std::uint64_t seed);
evaluation::Policy make_ablation_policy(const Ablation& a, const SeedModel& m, const BenchConfig& cfg,
                                        std::uint64_t seed);

// Generative expected reward of the assignment the policy picks for a display's offered state.
double expected_policy_reward(const evaluation::Policy& policy, const SeedModel& m, const DisplayId& display,
                              std::uint64_t seed);

struct PolicyResult {
    std::string name;
    std::vector<double> per_seed;  // NaN where nothing matched or the run failed
    std::vector<std::size_t> matched;
    double mean = 0.0, median = 0.0, std = 0.0;
    int failed = 0;
    int undefined = 0;
    std::vector<std::string> errors;
};

struct BenchmarkReport {
    BenchConfig config;
    std::vector<std::uint64_t> seeds;
    std::vector<PolicyResult> policies;
    std::vector<PolicyResult> ablations;  // named by Ablation::name
    std::vector<double> runtime_seconds;  // per seed; kept out of the report files
};

BenchmarkReport run_benchmark(const BenchConfig& cfg);

std::string report_to_json(const BenchmarkReport& r);
std::string policies_to_csv(const BenchmarkReport& r);
std::string ablations_to_csv(const BenchmarkReport& r);
std::string timing_to_json(const BenchmarkReport& r);

}  // namespace shelfrec::benchmark
