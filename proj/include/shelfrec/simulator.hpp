#pragma once
// Synthetic retail world: planted demographic clusters around stores, a catalog with
// steady and lumpy products, hierarchical per-store payoffs, noisy scan simulation and
// logging of training and evaluation data.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "shelfrec/candidates.hpp"
#include "shelfrec/common.hpp"
#include "shelfrec/evaluation.hpp"
#include "shelfrec/geocluster.hpp"
#include "shelfrec/ingest.hpp"

namespace shelfrec::simulator {

struct WorldConfig {
    int n_clusters = 3;
    int n_stores = 48;
    int tracts_per_store = 5;
    int n_demographics = 30;
    double separation = 5.0;  // distance between cluster centers in units of tract noise sd

    int n_steady = 12;
    int n_lumpy = 8;
    int n_sub_categories = 1;
    double steady_beta_lo = 2.0;
    double steady_beta_hi = 5.0;
    double lumpy_beta_lo = 1.0;
    double lumpy_beta_hi = 2.5;
    double cluster_preference_sd = 0.35;  // log-scale spread of cluster coefficients
    double store_jitter = 0.08;           // Laplace scale relative to the cluster coefficient
    double steady_cv = 0.35;
    double lumpy_cv = 3.0;  // intermittent demand: most intervals sell nothing

    int capacity = 4;
    int max_facings_per_product = 1;
    int pool_size = 3;  // products a store may stock but never carried during training
    int depth = 12;     // units per facing when fully stocked
    double restock_fill = 0.75;  // merchandisers stock this fraction of full depth

    double noise_sd = 0.11;  // log-scale sd of multiplicative count noise; realized count MAPE is about 0.078
    double interval_hours = 48.0;
    int train_visits = 40;
    double substitution_prob = 0.0;  // chance a training visit swaps one planogram product for a pool product
    int eval_events_per_display = 300;

    void validate() const;
};

struct SimStore {
    StoreId store_id;
    DisplayId display_id;
    double lat = 0.0;
    double lon = 0.0;
    int latent_cluster = 0;
    Assignment planogram;
    std::vector<ProductId> pool;  // extra products the merchandiser can stock
};

struct SyntheticWorld {
    WorldConfig config;
    std::uint64_t seed = 0;
    std::vector<ingest::Tract> tracts;
    std::vector<int> tract_cluster;
    std::vector<SimStore> stores;
    std::vector<ingest::Product> catalog;
    std::vector<ProductId> lumpy;
    std::map<ProductId, std::map<int, double>> cluster_beta;
    std::map<ProductId, std::map<StoreId, double>> beta;
    std::map<ProductId, double> sigma;

    double true_beta(const ProductId& p, const StoreId& s) const;
    const SimStore& store(const StoreId& s) const;
    const SimStore& store_for_display(const DisplayId& d) const;
    std::vector<geocluster::StoreLocation> store_locations() const;
    // planogram products followed by the pool
    std::vector<ProductId> choice_set(const SimStore& s) const;
};

SyntheticWorld gen_world(const WorldConfig& config, std::uint64_t seed);

// Generative mean of the summed payoff of an assignment at a store: sum q * beta*.
double expected_reward(const SyntheticWorld& w, const StoreId& store, const Assignment& a);

long long restock_level(const WorldConfig& c, int q);
// One Gamma draw with mean q*beta and sd sigma, rounded and truncated to the stock.
long long draw_sales(const SyntheticWorld& w, const ProductId& p, const StoreId& s, int q, long long stock, Rng& rng);
// round(c * exp(sd * Z)); zero stays zero.
long long noisy_count(long long true_count, double noise_sd, Rng& rng);

// Per display: current assignment, on-shelf stock, visit counter and clock.
struct SimState {
    std::map<DisplayId, Assignment> assignment;
    std::map<DisplayId, std::map<ProductId, long long>> stock;
    std::map<DisplayId, int> visit;
    TimePoint clock{};
};

struct StepResult {
    std::vector<ingest::ScanEvent> events;
    std::vector<std::map<ProductId, long long>> true_counts;  // aligned with events
    std::map<DisplayId, std::map<ProductId, long long>> true_sales;
};

// First visit: an empty pre-scan then a post-scan of the freshly stocked assignment.
StepResult start(const SyntheticWorld& w, SimState& state, const std::map<DisplayId, Assignment>& assignments,
                 Rng& rng);
// Sales over one interval, then a visit that scans, restocks to `assignments` and scans again.
StepResult step(const SyntheticWorld& w, SimState& state, const std::map<DisplayId, Assignment>& assignments,
                double interval_hours, Rng& rng);

struct TrainingLog {
    std::vector<ingest::ScanEvent> scans;
    std::vector<candidates::DisplayStateLog> states;
    std::vector<ingest::SalesRecord> sales;
};

// Planograms with occasional merchandiser substitutions from the pool.
TrainingLog simulate_training(const SyntheticWorld& w, std::uint64_t seed);

// Uniform logging over capacity-sized subsets of each store's choice set; the reward is the
// summed measured sales over the interval.
std::vector<evaluation::LoggedInteraction> simulate_eval_log(const SyntheticWorld& w, std::uint64_t seed);

// Mean and median absolute percentage error of noisy counts over the given true counts.
struct NoiseStats {
    double mape = 0.0;
    double median_ape = 0.0;
    double mae = 0.0;
    std::size_t n = 0;
};
NoiseStats measure_noise(const std::vector<long long>& true_counts, double noise_sd, std::uint64_t seed);
// Realized error of emitted scans against the stock they observed (true counts > 0 only).
NoiseStats scan_noise(const StepResult& r);

}  // namespace shelfrec::simulator
