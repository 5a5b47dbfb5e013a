#pragma once
// Toy data drawn from the reward model's own generative story: cluster coefficients,
// Laplace-jittered store coefficients and Gamma rewards with a shared sd.

#include <map>
#include <string>
#include <vector>

#include "shelfrec/common.hpp"
#include "shelfrec/geocluster.hpp"
#include "shelfrec/ingest.hpp"

namespace toy {

struct Config {
    int clusters = 2;
    int stores_per_cluster = 4;
    int n_per_store = 30;
    std::map<int, int> n_override;  // store index -> record count
    double beta_lo = 1.5, beta_hi = 3.5;
    double store_spread = 0.15;  // Laplace scale relative to the cluster coefficient
    std::map<int, double> store_factor;  // store index -> fixed multiple of its cluster coefficient
    double sigma = 1.0;
    std::vector<int> quantities{1, 2, 3};
    double outlier_frac = 0.0;
    double outlier_mult = 10.0;
};

struct Data {
    std::vector<shelfrec::ingest::SalesRecord> sales;
    shelfrec::geocluster::ClusterAssignment clusters;
    std::map<shelfrec::StoreId, double> beta;
    std::map<int, double> cluster_beta;
};

inline std::string store_name(int i) { return "S" + std::to_string(100 + i); }

inline Data generate(const Config& c, std::uint64_t seed) {
    using namespace shelfrec;
    Rng rng(mix_seed(seed, 0x70f));
    Data d;
    d.clusters.k = c.clusters;
    for (int k = 0; k < c.clusters; ++k) d.cluster_beta[k] = c.beta_lo + (c.beta_hi - c.beta_lo) * uniform01(rng);
    const TimePoint t0 = parse_iso8601("2024-01-01T00:00:00Z");
    const int n_stores = c.clusters * c.stores_per_cluster;
    for (int s = 0; s < n_stores; ++s) {
        const int k = s % c.clusters;
        const StoreId id = store_name(s);
        d.clusters.store_ids.push_back(id);
        d.clusters.cluster_of.push_back(k);
        const double cb = d.cluster_beta[k];
        double b;
        if (auto f = c.store_factor.find(s); f != c.store_factor.end()) b = f->second * cb;
        else b = std::max(0.2, laplace_draw(rng, cb, c.store_spread * cb));
        d.beta[id] = b;
        const int n = c.n_override.count(s) ? c.n_override.at(s) : c.n_per_store;
        for (int j = 0; j < n; ++j) {
            const int q = c.quantities[uniform_index(rng, c.quantities.size())];
            const double mean = q * b;
            const double shape = mean * mean / (c.sigma * c.sigma);
            const double rate = mean / (c.sigma * c.sigma);
            double y = gamma_draw(rng, shape, rate);
            if (c.outlier_frac > 0.0 && uniform01(rng) < c.outlier_frac) y *= c.outlier_mult;
            ingest::SalesRecord r;
            r.store_id = id;
            r.display_id = "D" + id.substr(1);
            r.product_id = "P1";
            r.interval_end = t0 + std::chrono::hours(48 * (j + 1));
            r.timedelta_hours = 48.0;
            r.quantity_faced = q;
            r.units_sold = std::max(y, 1e-9);
            d.sales.push_back(r);
        }
    }
    return d;
}

}  // namespace toy
