#include <doctest.h>

#include <cmath>

#include "shelfrec/benchmark.hpp"
#include "shelfrec/geocluster.hpp"
#include "shelfrec/simulator.hpp"

using namespace shelfrec;
using namespace shelfrec::simulator;

TEST_SUITE_BEGIN("simulator");

namespace {

WorldConfig small_world() {
    WorldConfig c;
    c.n_stores = 12;
    c.n_steady = 6;
    c.n_lumpy = 2;
    c.train_visits = 8;
    c.eval_events_per_display = 20;
    return c;
}

double rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    long long agree = 0, pairs = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            agree += (a[i] == a[j]) == (b[i] == b[j]);
            ++pairs;
        }
    }
    return static_cast<double>(agree) / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("same seed gives the same world") {
    const auto a = gen_world(small_world(), 42);
    const auto b = gen_world(small_world(), 42);
    CHECK(a.tracts == b.tracts);
    CHECK(a.catalog == b.catalog);
    CHECK(a.beta == b.beta);
    CHECK(a.cluster_beta == b.cluster_beta);
    REQUIRE(a.stores.size() == b.stores.size());
    for (std::size_t i = 0; i < a.stores.size(); ++i) {
        CHECK(a.stores[i].planogram == b.stores[i].planogram);
        CHECK(a.stores[i].pool == b.stores[i].pool);
        CHECK(a.stores[i].latent_cluster == b.stores[i].latent_cluster);
    }
    const auto ta = simulate_training(a, 7);
    const auto tb = simulate_training(b, 7);
    CHECK(ta.scans == tb.scans);
    CHECK(ta.sales == tb.sales);
    CHECK(simulate_eval_log(a, 3) == simulate_eval_log(b, 3));
    CHECK_FALSE(gen_world(small_world(), 43).beta == a.beta);
}

TEST_CASE("zero scan noise recovers true sales") {
    auto c = small_world();
    c.noise_sd = 0.0;
    const auto w = gen_world(c, 5);
    Rng rng(9);
    SimState state;
    std::map<DisplayId, Assignment> plan;
    for (const auto& st : w.stores) plan[st.display_id] = st.planogram;
    std::vector<ingest::ScanEvent> events;
    std::map<std::pair<DisplayId, ProductId>, std::vector<long long>> truth;
    auto keep = [&](const StepResult& r) { events.insert(events.end(), r.events.begin(), r.events.end()); };
    keep(start(w, state, plan, rng));
    for (int v = 0; v < 5; ++v) {
        const auto r = step(w, state, plan, c.interval_hours, rng);
        keep(r);
        for (const auto& [d, m] : r.true_sales) {
            for (const auto& [p, s] : m) truth[{d, p}].push_back(s);
        }
    }
    const auto derived = ingest::derive_sales(events);
    std::map<std::pair<DisplayId, ProductId>, std::vector<long long>> got;
    for (const auto& r : derived.records) got[{r.display_id, r.product_id}].push_back(std::llround(r.units_sold));
    CHECK(got == truth);
}

TEST_CASE("sales scale with facings") {
    const auto w = gen_world(small_world(), 8);
    const auto& st = w.stores.front();
    const ProductId p = st.planogram.begin()->first;
    Rng rng(1);
    const int n = 20000;
    double s1 = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        s1 += static_cast<double>(draw_sales(w, p, st.store_id, 1, 1000000, rng));
        s2 += static_cast<double>(draw_sales(w, p, st.store_id, 2, 1000000, rng));
    }
    const double beta = w.true_beta(p, st.store_id);
    const double se = std::sqrt(w.sigma.at(p) * w.sigma.at(p) + 1.0 / 12.0) / std::sqrt(double(n));
    CHECK(std::abs(s1 / n - beta) < 4 * se + 0.05);
    CHECK(std::abs(s2 / n - 2 * beta) < 4 * se + 0.05);
    CHECK(expected_reward(w, st.store_id, {{p, 2}}) == doctest::Approx(2 * beta));
}

TEST_CASE("planted clusters are recoverable from store profiles") {
    auto c = small_world();
    c.n_stores = 30;
    c.separation = 10.0;
    const auto w = gen_world(c, 11);
    // profile of a store = mean demographics of the tracts planted around it
    std::vector<geocluster::StoreProfile> profiles;
    const auto per = static_cast<std::size_t>(c.tracts_per_store);
    for (std::size_t s = 0; s < w.stores.size(); ++s) {
        geocluster::StoreProfile sp{w.stores[s].store_id, std::vector<double>(c.n_demographics, 0.0)};
        for (std::size_t t = s * per; t < (s + 1) * per; ++t) {
            for (int j = 0; j < c.n_demographics; ++j) sp.profile[j] += w.tracts[t].demographics[j] / per;
        }
        profiles.push_back(std::move(sp));
    }
    geocluster::KMeansConfig km;
    km.k = 3;
    km.seed = 2;
    const auto ca = geocluster::kmeans(profiles, km);
    std::vector<int> planted;
    for (const auto& s : ca.store_ids) planted.push_back(w.store(s).latent_cluster);
    CHECK(rand_index(ca.cluster_of, planted) > 0.95);
}

TEST_CASE("scan noise matches the calibrated error") {
    const auto w = gen_world(WorldConfig{}, 3);
    Rng rng(4);
    SimState state;
    std::map<DisplayId, Assignment> plan;
    for (const auto& st : w.stores) plan[st.display_id] = st.planogram;
    start(w, state, plan, rng);
    double ape = 0;
    std::size_t n = 0;
    while (n < 10000) {
        const auto s = scan_noise(step(w, state, plan, 48.0, rng));
        ape += s.mape * static_cast<double>(s.n);
        n += s.n;
    }
    const double mape = ape / static_cast<double>(n);
    CHECK(mape >= 0.06);
    CHECK(mape <= 0.09);

    std::vector<long long> counts(10000, 9);
    const auto z = measure_noise(counts, 0.0, 1);
    CHECK(z.mape == 0.0);
    CHECK(noisy_count(0, 1.0, rng) == 0);
}

TEST_CASE("oracle knapsack dominates in a noiseless single-cluster world") {
    benchmark::BenchConfig cfg;
    cfg.world = small_world();
    cfg.world.n_clusters = 1;
    cfg.world.noise_sd = 0.0;
    cfg.k = 1;
    cfg.draws = 100;
    cfg.warmup = 100;
    const auto m = benchmark::prepare_seed(cfg, 1, false);
    const auto oracle = benchmark::make_policy("oracle", m, cfg, 1);
    for (const auto& name : {"full", "eps", "genetic", "dp", "lp", "random"}) {
        const auto pol = benchmark::make_policy(name, m, cfg, 1);
        for (const auto& st : m.world.stores) {
            for (std::uint64_t s = 0; s < 3; ++s) {
                CHECK(benchmark::expected_policy_reward(oracle, m, st.display_id, s) + 1e-9 >=
                      benchmark::expected_policy_reward(pol, m, st.display_id, s));
            }
        }
    }
}

TEST_CASE("world validation") {
    WorldConfig c;
    c.n_clusters = 100;
    CHECK_THROWS_AS(c.validate(), ArgumentError);
    c = WorldConfig{};
    c.restock_fill = 0.0;
    CHECK_THROWS_AS(gen_world(c, 1), ArgumentError);
}

TEST_SUITE_END();
