#pragma once
// Randomized instances and property checks shared by the unit property tests and the
// acceptance driver. Each check returns an empty string on success or a description.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "gen.hpp"
#include "shelfrec/geocluster.hpp"
#include "shelfrec/persist.hpp"
#include "shelfrec/search.hpp"

namespace fuzz {

using namespace shelfrec;

// ---- search ----

inline search::Scorer table_scorer(std::map<ProductId, double> pepf) {
    return [pepf = std::move(pepf)](const ProductId& p, int q) {
        reward::PepfScore s;
        s.product_id = p;
        s.quantity = q;
        s.mean_payoff = s.pepf = pepf.at(p);
        return s;
    };
}

// Budget, positivity and, under epsilon 0 with one iteration, greedy dominance: every
// replacement beats its victim and no candidate left out beats a replacement.
inline std::string check_search_instance(std::uint64_t seed) {
    Rng rng(seed);
    const int n_products = gen::int_in(rng, 2, 16);
    const int M = gen::int_in(rng, 1, 12);
    auto state = gen::display_state(rng, n_products, M);
    if (gen::int_in(rng, 0, 4) == 0) state.capacity = gen::int_in(rng, 1, M);  // over-full shelf
    const auto cands = gen::candidate_set(rng, state, n_products, gen::int_in(rng, 0, 6));
    std::map<ProductId, double> pe;
    for (int p = 0; p < n_products; ++p) {
        // coarse values so ties occur
        pe[gen::product(p)] = gen::int_in(rng, 0, 3) == 0 ? gen::int_in(rng, 0, 4) : gen::real_in(rng, -2, 5);
    }
    search::SearchConfig cfg;
    cfg.V = gen::int_in(rng, 1, 3);
    const bool greedy = gen::int_in(rng, 0, 1) == 0;
    cfg.epsilon = greedy ? 0.0 : gen::real_in(rng, 0, 1);
    cfg.T = greedy ? 1 : gen::int_in(rng, 1, 4);
    cfg.seed = rng();

    const auto rec = search::recommend(state, cands, table_scorer(pe), cfg);
    std::ostringstream err;
    int total = 0;
    for (const auto& [p, q] : rec.assignment) {
        if (q <= 0) err << "non-positive quantity for " << p << "; ";
        total += q;
    }
    if (total > state.capacity) err << "budget " << total << " > " << state.capacity << "; ";
    if (greedy) {
        double worst_in = INFINITY;
        std::set<ProductId> swapped_in;
        for (const auto& s : rec.swaps) {
            swapped_in.insert(s.replacement);
            if (pe.at(s.replacement) < pe.at(s.victim)) err << "harmful swap " << s.victim << "->" << s.replacement << "; ";
            worst_in = std::min(worst_in, pe.at(s.replacement));
        }
        for (const auto& c : cands.candidates) {
            // the fill step may truncate a replacement on an over-full shelf, so look at the swaps
            if (!swapped_in.count(c.product_id) && !state.slots.count(c.product_id) && pe.at(c.product_id) > worst_in) {
                err << "skipped better candidate " << c.product_id << "; ";
            }
        }
    }
    return err.str();
}

// ---- spagmm ----

struct SpagmmInstance {
    std::vector<geocluster::StoreLocation> stores;
    std::vector<ingest::Tract> tracts;
};

inline SpagmmInstance spagmm_instance(std::uint64_t seed) {
    Rng rng(seed);
    SpagmmInstance in;
    const int L = gen::int_in(rng, 1, 8);
    const int Z = gen::int_in(rng, L + 1, 60);
    const double spread = gen::real_in(rng, 0.01, 0.5);
    for (int l = 0; l < L; ++l) {
        in.stores.push_back({"S" + std::to_string(l), 40 + gen::real_in(rng, -spread, spread), -75 + gen::real_in(rng, -spread, spread)});
    }
    for (int z = 0; z < Z; ++z) {
        const auto& s = in.stores[static_cast<std::size_t>(gen::int_in(rng, 0, L - 1))];
        ingest::Tract t;
        t.tract_id = "T" + std::to_string(z);
        t.lat = s.lat + gen::real_in(rng, 0.001, 0.1) * standard_normal(rng);
        t.lon = s.lon + gen::real_in(rng, 0.001, 0.1) * standard_normal(rng);
        t.demographics = {gen::real_in(rng, 0, 1), gen::real_in(rng, 0, 1)};
        in.tracts.push_back(std::move(t));
    }
    return in;
}

inline std::string check_spagmm_instance(std::uint64_t seed, double slack = 1e-8) {
    const auto in = spagmm_instance(seed);
    geocluster::SpagmmConfig cfg;
    cfg.convergence_rel_tol = 1e-9;
    cfg.max_iterations = 60;
    const auto fit = geocluster::fit_spagmm(in.stores, in.tracts, cfg);
    std::ostringstream err;
    const auto& h = fit.objective_history;
    for (std::size_t i = 1; i < h.size(); ++i) {
        if (h[i] < h[i - 1] - slack * std::max(1.0, std::abs(h[i - 1]))) {
            err << "objective fell at iteration " << i << " (" << h[i - 1] << " -> " << h[i] << "); ";
        }
    }
    if (!fit.covariances_spd_throughout) err << "non-SPD covariance during the fit; ";
    for (const auto& c : fit.membership.covariances) {
        if (!c.is_spd()) err << "non-SPD final covariance; ";
    }
    const auto& m = fit.membership;
    for (std::size_t z = 0; z < m.tracts(); ++z) {
        double col = 0;
        for (std::size_t l = 0; l < m.stores(); ++l) col += m.at(l, z);
        if (std::abs(col - 1.0) > 1e-9) err << "tract " << z << " memberships sum to " << col << "; ";
    }
    return err.str();
}

// ---- persistence ----

inline std::string messy_id(Rng& rng, const char* prefix) {
    static const std::string alphabet = "abcXYZ019_-.,\"' /:";
    std::string s = prefix;
    const int n = gen::int_in(rng, 0, 6);
    for (int i = 0; i < n; ++i) s += alphabet[uniform_index(rng, alphabet.size())];
    s += std::to_string(gen::int_in(rng, 0, 99));
    return s;
}

inline double messy_double(Rng& rng) {
    switch (gen::int_in(rng, 0, 4)) {
        case 0: return gen::int_in(rng, 0, 20);
        case 1: return gen::real_in(rng, 0, 1) * std::pow(10.0, gen::int_in(rng, -12, 12));
        case 2: return -gen::real_in(rng, 0, 100);
        case 3: return 0.1 * gen::int_in(rng, 0, 100);
        default: return standard_normal(rng);
    }
}

inline persist::PipelineState random_state(std::uint64_t seed) {
    Rng rng(seed);
    persist::PipelineState st;
    auto present = [&] { return gen::int_in(rng, 0, 2) > 0; };
    const int n_products = gen::int_in(rng, 1, 4);
    const int n_stores = gen::int_in(rng, 1, 4);
    std::vector<ProductId> products;
    std::vector<StoreId> stores;
    for (int i = 0; i < n_products; ++i) products.push_back(messy_id(rng, "P") + "#" + std::to_string(i));
    for (int i = 0; i < n_stores; ++i) stores.push_back(messy_id(rng, "S") + "#" + std::to_string(i));
    const auto t0 = parse_iso8601("2024-01-01T00:00:00Z");

    if (present()) {
        std::vector<ingest::SalesRecord> sales;
        const int n = gen::int_in(rng, 0, 6);
        for (int i = 0; i < n; ++i) {
            ingest::SalesRecord r;
            r.store_id = stores[uniform_index(rng, stores.size())];
            r.display_id = messy_id(rng, "D");
            r.product_id = products[uniform_index(rng, products.size())];
            r.interval_end = t0 + std::chrono::seconds(gen::int_in(rng, 0, 10000000));
            r.timedelta_hours = gen::real_in(rng, 0.01, 200);
            r.quantity_faced = gen::int_in(rng, 1, 9);
            r.units_sold = gen::int_in(rng, 0, 50);
            r.clamped = gen::int_in(rng, 0, 1);
            sales.push_back(r);
        }
        st.sales = sales;
    }
    const int Z = gen::int_in(rng, 1, 4);
    const int b = gen::int_in(rng, 1, 3);
    if (present()) {
        geocluster::MembershipMatrix m;
        m.store_ids = stores;
        for (int z = 0; z < Z; ++z) m.tract_ids.push_back(messy_id(rng, "T") + "#" + std::to_string(z));
        for (int i = 0; i < n_stores * Z; ++i) m.probabilities.push_back(gen::real_in(rng, 0, 1));
        for (int l = 0; l < n_stores; ++l) {
            m.weights.push_back(gen::real_in(rng, 0, 1));
            m.covariances.push_back({gen::real_in(rng, 0.1, 2), messy_double(rng) * 0.01, gen::real_in(rng, 0.1, 2)});
        }
        st.membership = m;
    }
    if (present()) {
        std::vector<geocluster::StoreProfile> prof;
        for (const auto& s : stores) {
            geocluster::StoreProfile p{s, {}};
            for (int j = 0; j < b; ++j) p.profile.push_back(messy_double(rng));
            prof.push_back(p);
        }
        st.profiles = prof;
    }
    const int k = gen::int_in(rng, 1, n_stores);
    if (present()) {
        geocluster::ClusterAssignment c;
        c.store_ids = stores;
        for (int l = 0; l < n_stores; ++l) c.cluster_of.push_back(l < k ? l : gen::int_in(rng, 0, k - 1));
        c.k = k;
        for (int i = 0; i < k; ++i) {
            c.centroids.emplace_back();
            for (int j = 0; j < b; ++j) c.centroids.back().push_back(messy_double(rng));
        }
        c.wcss = gen::real_in(rng, 0, 10);
        st.clusters = c;
    }
    if (present()) {
        reward::RbpPosterior p;
        p.products = products;
        p.stores = stores;
        for (int l = 0; l < n_stores; ++l) p.store_cluster.push_back(gen::int_in(rng, 0, k - 1));
        for (int i = 0; i < n_products; ++i) {
            for (int c = 0; c < k; ++c) p.cluster_coefs.push_back({i, c});
            for (int l = 0; l < n_stores; ++l) {
                if (gen::int_in(rng, 0, 1)) p.store_coefs.push_back({i, l, i * k + p.store_cluster[static_cast<std::size_t>(l)]});
            }
        }
        p.n_draws = gen::int_in(rng, 1, 5);
        p.warmup = gen::int_in(rng, 0, 5);
        p.seed = rng();
        p.chains.resize(static_cast<std::size_t>(gen::int_in(rng, 1, 3)));
        for (auto& c : p.chains) {
            for (std::size_t i = 0; i < p.n_params() * static_cast<std::size_t>(p.n_draws); ++i) c.push_back(messy_double(rng));
        }
        p.hyper.mu0 = messy_double(rng);
        p.hyper.sigma1 = gen::real_in(rng, 0.1, 3);
        for (std::size_t i = 0; i < p.n_params(); ++i) {
            p.diagnostics.params.push_back({p.param_name(i), gen::real_in(rng, 0.9, 1.3), gen::real_in(rng, 1, 4000)});
        }
        p.diagnostics.max_rhat = gen::real_in(rng, 1, 2);
        p.diagnostics.min_ess = gen::real_in(rng, 1, 100);
        p.diagnostics.pass = gen::int_in(rng, 0, 1);
        p.convergence_warning = !p.diagnostics.pass;
        if (gen::int_in(rng, 0, 1)) p.omitted_products = {messy_id(rng, "Q")};
        p.excluded_zero_records = gen::int_in(rng, 0, 9);
        st.posterior = p;
    }
    if (present()) {
        candidates::CoOccurrenceGraph g = gen::graph(rng, gen::int_in(rng, 0, 6), gen::real_in(rng, 0, 1), 50);
        g.build_timestamp = t0 + std::chrono::seconds(gen::int_in(rng, 0, 1000000));
        g.source_log_count = gen::int_in(rng, 0, 100);
        g.dropped_unknown = gen::int_in(rng, 0, 5);
        g.pair_updates = gen::int_in(rng, 0, 500);
        st.graph = g;
    }
    return st;
}

inline std::string check_persist_instance(std::uint64_t seed) {
    const auto st = random_state(seed);
    const auto text = persist::serialize_state(st);
    const auto back = persist::deserialize_state(text);
    std::ostringstream err;
    if (!(back == st)) err << "round trip changed the state; ";
    if (persist::serialize_state(back) != text) err << "re-serialization is not byte-identical; ";
    return err.str();
}

}  // namespace fuzz
