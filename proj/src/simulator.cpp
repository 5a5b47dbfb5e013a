#include "shelfrec/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace shelfrec::simulator {

namespace {

std::string make_id(const char* prefix, int i, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%0*d", prefix, width, i);
    return buf;
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

constexpr std::int64_t kEpoch = 1704067200;  // 2024-01-01T00:00:00Z

}  // namespace

void WorldConfig::validate() const {
    auto need = [](bool ok, const char* msg) {
        if (!ok) throw ArgumentError(std::string("world config: ") + msg);
    };
    need(n_clusters >= 1, "n_clusters must be >= 1");
    need(n_stores >= 1, "n_stores must be >= 1");
    need(n_clusters <= n_stores, "n_clusters must not exceed n_stores");
    need(tracts_per_store >= 1, "tracts_per_store must be >= 1");
    need(n_demographics >= 1, "n_demographics must be >= 1");
    need(separation >= 0.0, "separation must be non-negative");
    need(n_steady >= 0 && n_lumpy >= 0 && n_steady + n_lumpy >= 1, "product counts must be positive");
    need(n_sub_categories >= 1 && n_sub_categories <= 5, "n_sub_categories must lie in 1..5");
    need(steady_beta_lo > 0.0 && steady_beta_hi >= steady_beta_lo, "steady beta range invalid");
    need(lumpy_beta_lo > 0.0 && lumpy_beta_hi >= lumpy_beta_lo, "lumpy beta range invalid");
    need(cluster_preference_sd >= 0.0 && store_jitter >= 0.0, "spreads must be non-negative");
    need(steady_cv > 0.0 && lumpy_cv > 0.0, "coefficients of variation must be positive");
    need(capacity >= 1, "capacity must be >= 1");
    need(max_facings_per_product >= 1, "max_facings_per_product must be >= 1");
    need(pool_size >= 0, "pool_size must be non-negative");
    need(depth >= 1, "depth must be >= 1");
    need(restock_fill > 0.0 && restock_fill <= 1.0, "restock_fill must lie in (0, 1]");
    need(noise_sd >= 0.0, "noise_sd must be non-negative");
    need(interval_hours > 0.0, "interval_hours must be positive");
    need(train_visits >= 2, "train_visits must be >= 2");
    need(substitution_prob >= 0.0 && substitution_prob <= 1.0, "substitution_prob must lie in [0, 1]");
    need(eval_events_per_display >= 1, "eval_events_per_display must be >= 1");
    const int per_sub = (n_steady + n_lumpy) / n_sub_categories;
    const int distinct = (capacity + max_facings_per_product - 1) / max_facings_per_product;
    need(per_sub >= distinct + pool_size, "too few products per sub-category for capacity and pool");
}

double SyntheticWorld::true_beta(const ProductId& p, const StoreId& s) const {
    return beta.at(p).at(s);
}

const SimStore& SyntheticWorld::store(const StoreId& s) const {
    for (const auto& st : stores) {
        if (st.store_id == s) return st;
    }
    throw ArgumentError("unknown store '" + s + "'");
}

const SimStore& SyntheticWorld::store_for_display(const DisplayId& d) const {
    for (const auto& st : stores) {
        if (st.display_id == d) return st;
    }
    throw ArgumentError("unknown display '" + d + "'");
}

std::vector<geocluster::StoreLocation> SyntheticWorld::store_locations() const {
    std::vector<geocluster::StoreLocation> out;
    for (const auto& s : stores) out.push_back({s.store_id, s.lat, s.lon});
    return out;
}

std::vector<ProductId> SyntheticWorld::choice_set(const SimStore& s) const {
    std::vector<ProductId> out;
    for (const auto& [p, q] : s.planogram) out.push_back(p);
    out.insert(out.end(), s.pool.begin(), s.pool.end());
    return out;
}

SyntheticWorld gen_world(const WorldConfig& c, std::uint64_t seed) {
    c.validate();
    SyntheticWorld w;
    w.config = c;
    w.seed = seed;
    Rng rng(mix_seed(seed, 0x5714));

    std::vector<std::vector<double>> centers(c.n_clusters, std::vector<double>(c.n_demographics));
    for (auto& ctr : centers) {
        double norm = 0.0;
        for (auto& v : ctr) {
            v = standard_normal(rng);
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (auto& v : ctr) v *= c.separation / norm;
    }

    for (int s = 0; s < c.n_stores; ++s) {
        SimStore st;
        st.store_id = make_id("S", s, 3);
        st.display_id = make_id("D", s, 3);
        st.lat = 40.0 + uniform(rng, -0.25, 0.25);
        st.lon = -75.0 + uniform(rng, -0.25, 0.25);
        st.latent_cluster = s % c.n_clusters;
        w.stores.push_back(st);
    }
    int tract_no = 0;
    for (const auto& st : w.stores) {
        for (int t = 0; t < c.tracts_per_store; ++t) {
            ingest::Tract tr;
            tr.tract_id = make_id("T", tract_no++, 4);
            tr.lat = st.lat + 0.01 * standard_normal(rng);
            tr.lon = st.lon + 0.01 * standard_normal(rng);
            for (int j = 0; j < c.n_demographics; ++j) {
                tr.demographics.push_back(centers[st.latent_cluster][j] + standard_normal(rng));
            }
            w.tracts.push_back(std::move(tr));
            w.tract_cluster.push_back(st.latent_cluster);
        }
    }

    const int n_products = c.n_steady + c.n_lumpy;
    std::vector<std::vector<ProductId>> by_sub(c.n_sub_categories);
    for (int i = 0; i < n_products; ++i) {
        const bool lumpy = i >= c.n_steady;
        ingest::Product p;
        p.product_id = make_id("P", i, 3);
        p.name = std::string(lumpy ? "Niche " : "Staple ") + std::to_string(i);
        p.sub_category = kAllSubCategories[i % c.n_sub_categories];
        p.height_mm = 230.0;
        p.width_mm = 66.0;
        by_sub[i % c.n_sub_categories].push_back(p.product_id);
        const double base = lumpy ? uniform(rng, c.lumpy_beta_lo, c.lumpy_beta_hi)
                                  : uniform(rng, c.steady_beta_lo, c.steady_beta_hi);
        w.sigma[p.product_id] = (lumpy ? c.lumpy_cv : c.steady_cv) * base;
        for (int k = 0; k < c.n_clusters; ++k) {
            w.cluster_beta[p.product_id][k] = base * std::exp(c.cluster_preference_sd * standard_normal(rng));
        }
        if (lumpy) w.lumpy.push_back(p.product_id);
        w.catalog.push_back(std::move(p));
    }
    for (const auto& p : w.catalog) {
        for (const auto& st : w.stores) {
            const double cb = w.cluster_beta[p.product_id][st.latent_cluster];
            w.beta[p.product_id][st.store_id] = std::max(0.05, laplace_draw(rng, cb, c.store_jitter * cb));
        }
    }

    const int distinct = (c.capacity + c.max_facings_per_product - 1) / c.max_facings_per_product;
    for (std::size_t s = 0; s < w.stores.size(); ++s) {
        auto& st = w.stores[s];
        auto products = by_sub[s % c.n_sub_categories];
        shuffle(products, rng);
        int remaining = c.capacity;
        for (int i = 0; i < distinct; ++i) {
            st.planogram[products[i]] = 1;
            --remaining;
        }
        for (int i = 0; remaining > 0; i = (i + 1) % distinct) {
            if (st.planogram[products[i]] < c.max_facings_per_product) {
                ++st.planogram[products[i]];
                --remaining;
            }
        }
        st.pool.assign(products.begin() + distinct, products.begin() + distinct + c.pool_size);
        std::sort(st.pool.begin(), st.pool.end());
    }
    return w;
}

double expected_reward(const SyntheticWorld& w, const StoreId& store, const Assignment& a) {
    double v = 0.0;
    for (const auto& [p, q] : a) v += q * w.true_beta(p, store);
    return v;
}

long long restock_level(const WorldConfig& c, int q) {
    return std::max<long long>(1, std::llround(c.restock_fill * c.depth * q));
}

long long draw_sales(const SyntheticWorld& w, const ProductId& p, const StoreId& s, int q, long long stock, Rng& rng) {
    const double mean = q * w.true_beta(p, s);
    const double sd = w.sigma.at(p);
    const double v = gamma_draw(rng, mean * mean / (sd * sd), mean / (sd * sd));
    return std::min(stock, std::llround(v));
}

long long noisy_count(long long true_count, double noise_sd, Rng& rng) {
    if (true_count <= 0) return 0;
    if (noise_sd == 0.0) return true_count;
    return std::max<long long>(0, std::llround(true_count * std::exp(noise_sd * standard_normal(rng))));
}

namespace {

void scan(StepResult& res, const SimStore& st, int visit, TimePoint t, ingest::Phase phase,
          const std::map<ProductId, long long>& stock, double noise_sd, Rng& rng) {
    ingest::ScanEvent e;
    e.store_id = st.store_id;
    e.display_id = st.display_id;
    e.visit_index = visit;
    e.timestamp = t;
    e.phase = phase;
    for (const auto& [p, c] : stock) {
        const long long n = noisy_count(c, noise_sd, rng);
        if (n > 0) e.counts[p] = n;
    }
    res.events.push_back(std::move(e));
    res.true_counts.push_back(stock);
}

void restock(const WorldConfig& c, std::map<ProductId, long long>& stock, const Assignment& a) {
    stock.clear();
    for (const auto& [p, q] : a) stock[p] = restock_level(c, q);
}

}  // namespace

StepResult start(const SyntheticWorld& w, SimState& state, const std::map<DisplayId, Assignment>& assignments,
                 Rng& rng) {
    StepResult res;
    if (state.clock == TimePoint{}) state.clock = TimePoint{std::chrono::seconds{kEpoch}};
    for (const auto& [d, a] : assignments) {
        const auto& st = w.store_for_display(d);
        state.assignment[d] = a;
        state.visit[d] = 0;
        scan(res, st, 0, state.clock, ingest::Phase::Pre, {}, w.config.noise_sd, rng);
        restock(w.config, state.stock[d], a);
        scan(res, st, 0, state.clock + std::chrono::minutes{30}, ingest::Phase::Post, state.stock[d], w.config.noise_sd,
             rng);
    }
    return res;
}

StepResult step(const SyntheticWorld& w, SimState& state, const std::map<DisplayId, Assignment>& assignments,
                double interval_hours, Rng& rng) {
    StepResult res;
    state.clock += std::chrono::seconds{std::llround(interval_hours * 3600.0)};
    for (auto& [d, a] : state.assignment) {
        const auto& st = w.store_for_display(d);
        auto& stock = state.stock[d];
        for (auto& [p, c] : stock) {
            const long long sold = draw_sales(w, p, st.store_id, a.at(p), c, rng);
            c -= sold;
            res.true_sales[d][p] = sold;
        }
        const int v = ++state.visit[d];
        scan(res, st, v, state.clock, ingest::Phase::Pre, stock, w.config.noise_sd, rng);
        auto it = assignments.find(d);
        if (it != assignments.end()) a = it->second;
        restock(w.config, stock, a);
        scan(res, st, v, state.clock + std::chrono::minutes{30}, ingest::Phase::Post, stock, w.config.noise_sd, rng);
    }
    return res;
}

TrainingLog simulate_training(const SyntheticWorld& w, std::uint64_t seed) {
    TrainingLog log;
    Rng rng(mix_seed(seed, 0x7a1));
    SimState state;
    std::map<DisplayId, Assignment> plan;
    for (const auto& st : w.stores) plan[st.display_id] = st.planogram;

    auto record_states = [&](const StepResult& r) {
        for (const auto& e : r.events) {
            if (e.phase != ingest::Phase::Post) continue;
            candidates::DisplayStateLog s;
            s.display_id = e.display_id;
            s.timestamp = e.timestamp;
            for (const auto& [p, q] : state.assignment.at(e.display_id)) s.products.push_back(p);
            log.states.push_back(std::move(s));
        }
        log.scans.insert(log.scans.end(), r.events.begin(), r.events.end());
    };

    record_states(start(w, state, plan, rng));
    for (int v = 1; v < w.config.train_visits; ++v) {
        std::map<DisplayId, Assignment> next;
        for (const auto& st : w.stores) {
            Assignment a = st.planogram;
            if (!st.pool.empty() && uniform01(rng) < w.config.substitution_prob) {
                std::vector<ProductId> current;
                for (const auto& [p, q] : a) current.push_back(p);
                const auto out = current[uniform_index(rng, current.size())];
                const auto in = st.pool[uniform_index(rng, st.pool.size())];
                const int q = a.at(out);
                a.erase(out);
                a[in] = q;
            }
            next[st.display_id] = a;
        }
        record_states(step(w, state, next, w.config.interval_hours, rng));
    }
    auto derived = ingest::derive_sales(log.scans, ingest::FacingDepth{w.config.depth, {}});
    log.sales = std::move(derived.records);
    return log;
}

std::vector<evaluation::LoggedInteraction> simulate_eval_log(const SyntheticWorld& w, std::uint64_t seed) {
    std::vector<evaluation::LoggedInteraction> out;
    Rng rng(mix_seed(seed, 0xe7a1));
    const auto t0 = TimePoint{std::chrono::seconds{kEpoch}} + std::chrono::hours{24 * 365};
    for (const auto& st : w.stores) {
        const auto choices = w.choice_set(st);
        search::DisplayState offered{st.display_id, st.store_id, st.planogram, w.config.capacity};
        const std::size_t m = std::min<std::size_t>(w.config.capacity, choices.size());
        for (int e = 0; e < w.config.eval_events_per_display; ++e) {
            auto pick = choices;
            shuffle(pick, rng);
            pick.resize(m);
            evaluation::LoggedInteraction ev;
            ev.display_id = st.display_id;
            ev.timestamp = t0 + std::chrono::seconds{std::llround(e * w.config.interval_hours * 3600.0)};
            ev.offered_state = offered;
            double reward = 0.0;
            for (const auto& p : pick) {
                ev.chosen[p] = 1;
                const long long stock = restock_level(w.config, 1);
                const long long sold = draw_sales(w, p, st.store_id, 1, stock, rng);
                const long long before = noisy_count(stock, w.config.noise_sd, rng);
                const long long after = noisy_count(stock - sold, w.config.noise_sd, rng);
                reward += static_cast<double>(std::max<long long>(0, before - after));
            }
            ev.reward = reward;
            out.push_back(std::move(ev));
        }
    }
    return out;
}

namespace {

NoiseStats noise_stats(const std::vector<std::pair<long long, long long>>& pairs) {
    NoiseStats s;
    std::vector<double> ape;
    double abs_err = 0.0;
    for (const auto& [c, n] : pairs) {
        if (c <= 0) continue;
        const double err = std::abs(static_cast<double>(n - c));
        ape.push_back(err / static_cast<double>(c));
        abs_err += err;
    }
    s.n = ape.size();
    if (ape.empty()) return s;
    const auto st = summarize(ape);
    s.mape = st.mean;
    s.median_ape = st.median;
    s.mae = abs_err / static_cast<double>(ape.size());
    return s;
}

}  // namespace

NoiseStats scan_noise(const StepResult& r) {
    std::vector<std::pair<long long, long long>> pairs;
    for (std::size_t i = 0; i < r.events.size(); ++i) {
        for (const auto& [p, c] : r.true_counts[i]) {
            auto it = r.events[i].counts.find(p);
            pairs.push_back({c, it == r.events[i].counts.end() ? 0 : it->second});
        }
    }
    return noise_stats(pairs);
}

NoiseStats measure_noise(const std::vector<long long>& true_counts, double noise_sd, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::pair<long long, long long>> pairs;
    for (long long c : true_counts) pairs.push_back({c, noisy_count(c, noise_sd, rng)});
    return noise_stats(pairs);
}

}  // namespace shelfrec::simulator
