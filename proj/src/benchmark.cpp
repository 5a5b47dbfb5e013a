#include "shelfrec/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <set>

#include <json.hpp>

#include "shelfrec/config.hpp"
#include "shelfrec/search.hpp"

namespace shelfrec::benchmark {

using nlohmann::json;

std::string Ablation::name() const {
    return std::string(clustering ? "clusters" : "global") + "+" + (rbp ? "rbp" : "ls") + "+" +
           (search ? "search" : "greedy");
}

std::vector<Ablation> all_ablations() {
    std::vector<Ablation> out;
    for (int mask = 7; mask >= 0; --mask) out.push_back({(mask & 4) != 0, (mask & 2) != 0, (mask & 1) != 0});
    return out;
}

std::vector<std::string> known_policies() { return {"full", "eps", "genetic", "dp", "lp", "random", "oracle"}; }

void BenchConfig::validate() const {
    world.validate();
    if (n_seeds < 2) throw ArgumentError("benchmark: n_seeds must be >= 2");
    const auto known = known_policies();
    if (policies.empty()) throw ArgumentError("benchmark: no policies selected");
    for (const auto& p : policies) {
        if (std::find(known.begin(), known.end(), p) == known.end()) {
            std::string msg = "benchmark: unknown policy '" + p + "'";
            const auto s = config::suggest(p, known);
            if (!s.empty()) msg += "; did you mean '" + s + "'?";
            throw ArgumentError(msg);
        }
    }
    if (horizon_cycles < 1) throw ArgumentError("benchmark: horizon_cycles must be >= 1");
    if (k < 1) throw ArgumentError("benchmark: k must be >= 1");
    if (tau < 1) throw ArgumentError("benchmark: tau must be >= 1");
    search::SearchConfig{V, search_epsilon, lambda, horizon_cycles, 0, {}}.validate();
    reward::SamplerConfig{chains, draws, warmup, 0}.validate();
    if (!(baseline_epsilon >= 0.0 && baseline_epsilon <= 1.0)) throw ArgumentError("benchmark: epsilon must lie in [0, 1]");
    genetic.validate();
    if (!(subsample > 0.0 && subsample <= 1.0)) throw ArgumentError("benchmark: subsample must lie in (0, 1]");
    if (match != "exact" && match != "jaccard") throw ArgumentError("benchmark: match must be exact or jaccard");
    if (!(jaccard_theta > 0.0 && jaccard_theta <= 1.0)) throw ArgumentError("benchmark: jaccard_theta must lie in (0, 1]");
}

namespace {

evaluation::MatchRule match_rule(const BenchConfig& cfg) {
    if (cfg.match == "jaccard") return {evaluation::MatchKind::Jaccard, cfg.jaccard_theta};
    return {evaluation::MatchKind::ExactSet, 1.0};
}

std::vector<ProductId> choices_for(const SeedModel& m, const simulator::SimStore& st) {
    std::vector<ProductId> out;
    for (const auto& [p, q] : st.planogram) out.push_back(p);
    auto it = m.candidates.find(st.display_id);
    if (it != m.candidates.end()) {
        for (const auto& v : it->second.candidates) out.push_back(v.product_id);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

using ScoreTable = std::map<DisplayId, std::map<ProductId, reward::PepfScore>>;

// Point estimates with fallback from the store to the cluster to all stores.
struct PointModel {
    reward::PointEstimates by_store, by_cluster, global;
    std::map<StoreId, int> cluster_of;
    bool use_cluster = true;

    double beta(const ProductId& p, const StoreId& s) const {
        if (auto v = by_store.get(p, s)) return *v;
        if (use_cluster) {
            auto c = cluster_of.find(s);
            if (c != cluster_of.end()) {
                if (auto v = by_cluster.get(p, std::to_string(c->second))) return *v;
            }
        }
        if (auto v = global.get(p, "all")) return *v;
        return 0.0;
    }
};

std::vector<ingest::SalesRecord> positive_records(const std::vector<ingest::SalesRecord>& sales) {
    std::vector<ingest::SalesRecord> out;
    for (const auto& r : sales) {
        if (r.units_sold > 0.0) out.push_back(r);
    }
    return out;
}

PointModel fit_point_model(const SeedModel& m, bool use_cluster) {
    PointModel pm;
    pm.use_cluster = use_cluster;
    pm.cluster_of = m.clusters.as_map();
    const auto sales = positive_records(m.training.sales);
    pm.by_store = reward::least_squares_fit(sales, [](const ingest::SalesRecord& r) { return r.store_id; });
    pm.by_cluster = reward::least_squares_fit(sales, [&](const ingest::SalesRecord& r) {
        auto it = pm.cluster_of.find(r.store_id);
        return it == pm.cluster_of.end() ? std::string("?") : std::to_string(it->second);
    });
    pm.global = reward::least_squares_fit(sales, [](const ingest::SalesRecord&) { return std::string("all"); });
    return pm;
}

ScoreTable rbp_scores(const SeedModel& m, const reward::RbpPosterior& post, double lambda, std::uint64_t seed) {
    ScoreTable t;
    reward::PepfScorer scorer(post, lambda, seed);
    for (const auto& st : m.world.stores) {
        for (const auto& p : choices_for(m, st)) t[st.display_id][p] = scorer.score(p, st.store_id, 1);
    }
    return t;
}

ScoreTable point_scores(const SeedModel& m, const PointModel& pm) {
    ScoreTable t;
    for (const auto& st : m.world.stores) {
        for (const auto& p : choices_for(m, st)) {
            reward::PepfScore s;
            s.product_id = p;
            s.store_id = st.store_id;
            s.quantity = 1;
            s.mean_payoff = pm.beta(p, st.store_id);
            s.sd_payoff = 0.0;
            s.pepf = s.mean_payoff;
            s.lambda = 0.0;
            t[st.display_id][p] = s;
        }
    }
    return t;
}

// Top-M by mean payoff at one facing, each product filled to its cap.
Assignment greedy_by_mean(const std::map<ProductId, reward::PepfScore>& scores, int M, int cap) {
    std::vector<std::pair<double, ProductId>> order;
    for (const auto& [p, s] : scores) order.push_back({s.mean_payoff, p});
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    Assignment out;
    int left = M;
    for (const auto& [v, p] : order) {
        if (left <= 0) break;
        const int q = std::min(cap, left);
        out[p] = q;
        left -= q;
    }
    return out;
}

evaluation::Policy search_policy(std::shared_ptr<const ScoreTable> table, const SeedModel& m, const BenchConfig& cfg,
                                 double lambda) {
    auto cands = std::make_shared<const std::map<DisplayId, candidates::CandidateSet>>(m.candidates);
    const int V = cfg.V, T = cfg.horizon_cycles;
    const double eps = cfg.search_epsilon;
    return [table, cands, V, T, eps, lambda](const evaluation::LoggedInteraction& ev, Rng& rng) {
        const auto& scores = table->at(ev.display_id);
        search::SearchConfig sc{V, eps, lambda, T, rng(), {}};
        search::Scorer scorer = [&](const ProductId& p, int) {
            auto it = scores.find(p);
            if (it == scores.end()) throw ArgumentError("benchmark: no score for '" + p + "'");
            return it->second;
        };
        candidates::CandidateSet empty;
        auto c = cands->find(ev.display_id);
        return search::recommend(ev.offered_state, c == cands->end() ? empty : c->second, scorer, sc).assignment;
    };
}

evaluation::Policy fixed_policy(std::map<DisplayId, Assignment> per_display) {
    auto table = std::make_shared<const std::map<DisplayId, Assignment>>(std::move(per_display));
    return [table](const evaluation::LoggedInteraction& ev, Rng&) { return table->at(ev.display_id); };
}

std::vector<baselines::KnapsackItem> items_from(const std::vector<ProductId>& choices, int cap,
                                                const std::function<double(const ProductId&, int)>& mean_at) {
    std::vector<baselines::KnapsackItem> items;
    for (const auto& p : choices) {
        baselines::KnapsackItem it{p, {}};
        double prev = 0.0;
        for (int q = 1; q <= cap; ++q) {
            const double v = mean_at(p, q);
            it.marginal.push_back(v - prev);
            prev = v;
        }
        items.push_back(std::move(it));
    }
    baselines::enforce_concavity(items);
    return items;
}

}  // namespace

SeedModel prepare_seed(const BenchConfig& cfg, std::uint64_t seed, bool need_global_rbp) {
    SeedModel m;
    m.world = simulator::gen_world(cfg.world, mix_seed(seed, 1));
    m.training = simulator::simulate_training(m.world, mix_seed(seed, 2));
    m.eval_logs = simulator::simulate_eval_log(m.world, mix_seed(seed, 3));
    m.catalog = candidates::make_catalog(m.world.catalog);
    m.graph = candidates::build_graph(m.training.states, m.catalog);

    const auto fit = geocluster::fit_spagmm(m.world.store_locations(), m.world.tracts);
    const auto profiles = geocluster::store_profiles(fit.membership, m.world.tracts);
    geocluster::KMeansConfig kc;
    kc.k = std::min<int>(cfg.k, static_cast<int>(profiles.size()));
    kc.seed = mix_seed(seed, 4);
    m.clusters = geocluster::kmeans(profiles, kc);

    m.global.k = 1;
    m.global.store_ids = m.clusters.store_ids;
    m.global.cluster_of.assign(m.global.store_ids.size(), 0);

    for (const auto& st : m.world.stores) {
        std::set<ProductId> seed_set;
        for (const auto& [p, q] : st.planogram) seed_set.insert(p);
        Rng rng(mix_seed(mix_seed(seed, 5), stable_hash(st.display_id)));
        auto cs = candidates::generate(m.graph, seed_set, m.catalog, cfg.tau, rng, st.display_id);
        const std::set<ProductId> pool(st.pool.begin(), st.pool.end());
        std::vector<candidates::Vote> kept;
        double total = 0.0;
        for (const auto& v : cs.candidates) {
            if (pool.count(v.product_id)) {
                kept.push_back(v);
                total += v.vote_share;
            }
        }
        for (auto& v : kept) v.vote_share /= total;
        cs.candidates = std::move(kept);
        m.candidates[st.display_id] = std::move(cs);
    }

    reward::SamplerConfig sc;
    sc.chains = cfg.chains;
    sc.draws = cfg.draws;
    sc.warmup = cfg.warmup;
    sc.seed = mix_seed(seed, 6);
    m.rbp_clustered = reward::fit_rbp(m.training.sales, m.clusters, {}, sc);
    if (need_global_rbp) {
        sc.seed = mix_seed(seed, 7);
        m.rbp_global = reward::fit_rbp(m.training.sales, m.global, {}, sc);
    }
    return m;
}

evaluation::Policy make_ablation_policy(const Ablation& a, const SeedModel& m, const BenchConfig& cfg,
                                        std::uint64_t seed) {
    std::shared_ptr<const ScoreTable> table;
    if (a.rbp) {
        const auto& post = a.clustering ? m.rbp_clustered : m.rbp_global;
        if (!post) throw ArgumentError("benchmark: reward model for '" + a.name() + "' was not fitted");
        table = std::make_shared<const ScoreTable>(rbp_scores(m, *post, a.search ? cfg.lambda : 0.0, mix_seed(seed, 8)));
    } else {
        table = std::make_shared<const ScoreTable>(point_scores(m, fit_point_model(m, a.clustering)));
    }
    if (a.search) return search_policy(table, m, cfg, a.rbp ? cfg.lambda : 0.0);
    std::map<DisplayId, Assignment> fixed;
    for (const auto& st : m.world.stores) {
        fixed[st.display_id] =
            greedy_by_mean(table->at(st.display_id), m.world.config.capacity, m.world.config.max_facings_per_product);
    }
    return fixed_policy(std::move(fixed));
}

evaluation::Policy make_policy(const std::string& name, const SeedModel& m, const BenchConfig& cfg,
                               std::uint64_t seed) {
    const auto& wc = m.world.config;
    if (name == "full") return make_ablation_policy(Ablation{}, m, cfg, seed);

    if (name == "random") {
        std::map<DisplayId, std::vector<ProductId>> choices;
        for (const auto& st : m.world.stores) choices[st.display_id] = choices_for(m, st);
        const int M = wc.capacity;
        return [choices, M](const evaluation::LoggedInteraction& ev, Rng& rng) {
            return baselines::random_subset(choices.at(ev.display_id), M, rng);
        };
    }

    if (name == "eps") {
        // arms are the assortments in force over each logged interval, valued by total interval sales
        std::map<std::pair<DisplayId, TimePoint>, std::pair<Assignment, double>> intervals;
        for (const auto& r : m.training.sales) {
            auto& [arm, total] = intervals[{r.display_id, r.interval_end}];
            arm[r.product_id] = r.quantity_faced;
            total += r.units_sold;
        }
        auto learner = std::make_shared<baselines::EpsilonGreedy>(cfg.baseline_epsilon);
        for (const auto& [key, v] : intervals) learner->observe(key.first, v.first, v.second);
        std::map<DisplayId, std::vector<ProductId>> choices;
        for (const auto& st : m.world.stores) choices[st.display_id] = choices_for(m, st);
        const int M = wc.capacity;
        return [learner, choices, M](const evaluation::LoggedInteraction& ev, Rng& rng) {
            return learner->act(ev.display_id, choices.at(ev.display_id), M, rng);
        };
    }

    if (name == "genetic") {
        const auto pm = fit_point_model(m, true);
        std::map<DisplayId, std::vector<ProductId>> choices;
        std::map<DisplayId, Assignment> best;
        for (const auto& st : m.world.stores) {
            choices[st.display_id] = choices_for(m, st);
            const StoreId sid = st.store_id;
            baselines::Fitness fitness = [&pm, sid](const Assignment& a) {
                double v = 0.0;
                for (const auto& [p, q] : a) v += q * pm.beta(p, sid);
                return v;
            };
            Rng rng(mix_seed(mix_seed(seed, 9), stable_hash(st.display_id)));
            best[st.display_id] = baselines::genetic_search(choices[st.display_id], wc.capacity,
                                                            wc.max_facings_per_product, fitness, cfg.genetic, rng)
                                      .best;
        }
        const int M = wc.capacity;
        const double random_action = cfg.genetic.random_action;
        return [choices, best, M, random_action](const evaluation::LoggedInteraction& ev, Rng& rng) {
            if (uniform01(rng) < random_action) return baselines::random_subset(choices.at(ev.display_id), M, rng);
            return best.at(ev.display_id);
        };
    }

    if (name == "dp" || name == "lp" || name == "oracle") {
        std::map<DisplayId, Assignment> fixed;
        const int cap = wc.max_facings_per_product;
        std::optional<reward::PepfScorer> scorer;
        if (name != "oracle") scorer.emplace(*m.rbp_clustered, 0.0, mix_seed(seed, 8));
        for (const auto& st : m.world.stores) {
            const StoreId sid = st.store_id;
            std::function<double(const ProductId&, int)> mean_at;
            if (name == "oracle") {
                mean_at = [&m, sid](const ProductId& p, int q) { return q * m.world.true_beta(p, sid); };
            } else {
                mean_at = [&scorer, sid](const ProductId& p, int q) { return scorer->score(p, sid, q).mean_payoff; };
            }
            const auto items = items_from(choices_for(m, st), cap, mean_at);
            fixed[st.display_id] = name == "lp" ? baselines::lp_relax_greedy(items, wc.capacity)
                                                : baselines::dp_knapsack(items, wc.capacity);
        }
        return fixed_policy(std::move(fixed));
    }
    throw ArgumentError("benchmark: unknown policy '" + name + "'");
}

double expected_policy_reward(const evaluation::Policy& policy, const SeedModel& m, const DisplayId& display,
                              std::uint64_t seed) {
    const auto& st = m.world.store_for_display(display);
    evaluation::LoggedInteraction ev;
    ev.display_id = display;
    ev.offered_state = {st.display_id, st.store_id, st.planogram, m.world.config.capacity};
    Rng rng(seed);
    return simulator::expected_reward(m.world, st.store_id, policy(ev, rng));
}

namespace {

void aggregate(PolicyResult& r) {
    std::vector<double> ok;
    for (double v : r.per_seed) {
        if (std::isfinite(v)) ok.push_back(v);
    }
    if (ok.empty()) {
        r.mean = r.median = r.std = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    const auto s = summarize(ok);
    r.mean = s.mean;
    r.median = s.median;
    r.std = s.sd;
}

struct Cell {
    double value = std::numeric_limits<double>::quiet_NaN();
    std::size_t matched = 0;
    bool failed = false;
    bool undefined = false;
    std::string error;
};

Cell run_cell(const std::function<evaluation::Policy()>& build, const SeedModel& m, const BenchConfig& cfg,
              std::uint64_t seed) {
    Cell c;
    try {
        const auto policy = build();
        const auto rep = evaluation::replay_evaluate_serial(policy, m.eval_logs, cfg.subsample, match_rule(cfg),
                                                            mix_seed(seed, 10));
        c.matched = rep.matched_count;
        if (rep.defined) c.value = rep.mean_reward;
        else c.undefined = true;
    } catch (const std::exception& e) {
        c.failed = true;
        c.error = e.what();
    }
    return c;
}

void record(PolicyResult& r, const Cell& c, std::uint64_t seed) {
    r.per_seed.push_back(c.value);
    r.matched.push_back(c.matched);
    if (c.failed) {
        ++r.failed;
        r.errors.push_back("seed " + std::to_string(seed) + ": " + c.error);
    } else if (c.undefined) {
        ++r.undefined;
    }
}

}  // namespace

BenchmarkReport run_benchmark(const BenchConfig& cfg) {
    cfg.validate();
    BenchmarkReport rep;
    rep.config = cfg;
    const auto n = static_cast<std::size_t>(cfg.n_seeds);
    for (std::size_t i = 0; i < n; ++i) rep.seeds.push_back(mix_seed(cfg.seed, i));
    const auto ablations = cfg.ablations ? all_ablations() : std::vector<Ablation>{};

    std::vector<std::vector<Cell>> policy_cells(n), ablation_cells(n);
    rep.runtime_seconds.assign(n, 0.0);

#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < n; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto seed = rep.seeds[i];
        std::optional<SeedModel> m;
        std::string setup_error;
        try {
            m = prepare_seed(cfg, seed, cfg.ablations);
        } catch (const std::exception& e) {
            setup_error = e.what();
        }
        for (const auto& name : cfg.policies) {
            if (!m) {
                policy_cells[i].push_back({std::numeric_limits<double>::quiet_NaN(), 0, true, false, setup_error});
                continue;
            }
            policy_cells[i].push_back(run_cell([&] { return make_policy(name, *m, cfg, seed); }, *m, cfg, seed));
        }
        for (const auto& a : ablations) {
            if (!m) {
                ablation_cells[i].push_back({std::numeric_limits<double>::quiet_NaN(), 0, true, false, setup_error});
                continue;
            }
            ablation_cells[i].push_back(run_cell([&] { return make_ablation_policy(a, *m, cfg, seed); }, *m, cfg, seed));
        }
        rep.runtime_seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    for (std::size_t p = 0; p < cfg.policies.size(); ++p) {
        PolicyResult r;
        r.name = cfg.policies[p];
        for (std::size_t i = 0; i < n; ++i) record(r, policy_cells[i][p], rep.seeds[i]);
        aggregate(r);
        rep.policies.push_back(std::move(r));
    }
    for (std::size_t a = 0; a < ablations.size(); ++a) {
        PolicyResult r;
        r.name = ablations[a].name();
        for (std::size_t i = 0; i < n; ++i) record(r, ablation_cells[i][a], rep.seeds[i]);
        aggregate(r);
        rep.ablations.push_back(std::move(r));
    }
    return rep;
}

// ---------------- output ----------------

namespace {

json number(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

json result_json(const PolicyResult& r) {
    json j;
    j["name"] = r.name;
    j["mean_reward"] = number(r.mean);
    j["median_reward"] = number(r.median);
    j["std_reward"] = number(r.std);
    json series = json::array();
    for (double v : r.per_seed) series.push_back(number(v));
    j["per_seed"] = series;
    j["matched"] = r.matched;
    j["failed_runs"] = r.failed;
    j["seeds_without_matches"] = r.undefined;
    j["errors"] = r.errors;
    return j;
}

std::string csv_rows(const std::vector<PolicyResult>& rows, const char* label) {
    std::string out = std::string(label) + ",mean_reward,median_reward,std_reward,seeds_used,failed_runs,seeds_without_matches\n";
    for (const auto& r : rows) {
        const std::size_t used = r.per_seed.size() - static_cast<std::size_t>(r.failed + r.undefined);
        auto f = [](double v) { return std::isfinite(v) ? format_double(v) : std::string("nan"); };
        out += r.name + "," + f(r.mean) + "," + f(r.median) + "," + f(r.std) + "," + std::to_string(used) + "," +
               std::to_string(r.failed) + "," + std::to_string(r.undefined) + "\n";
    }
    return out;
}

}  // namespace

std::string report_to_json(const BenchmarkReport& r) {
    json j;
    j["format"] = "shelfrec-benchmark";
    j["version"] = 1;
    j["note"] =
        "Synthetic desk-scale benchmark. Absolute rewards are not comparable to field measurements; only the "
        "ordering of policies and ablation cells is meaningful.";
    j["not_implemented"] = {"deep-ensembles", "mopo"};
    auto cfg = r.config;
    config::Binder b;
    config::bind_bench(b, cfg);
    j["config"] = b.dump();
    j["seeds"] = r.seeds;
    json pol = json::array();
    for (const auto& p : r.policies) pol.push_back(result_json(p));
    j["policies"] = pol;
    json abl = json::array();
    for (const auto& a : r.ablations) abl.push_back(result_json(a));
    j["ablations"] = abl;
    return j.dump(2) + "\n";
}

std::string policies_to_csv(const BenchmarkReport& r) {
    std::string out = csv_rows(r.policies, "policy");
    out += "deep-ensembles,not implemented,,,,,\nmopo,not implemented,,,,,\n";
    return out;
}

std::string ablations_to_csv(const BenchmarkReport& r) { return csv_rows(r.ablations, "cell"); }

std::string timing_to_json(const BenchmarkReport& r) {
    json j;
    j["seeds"] = r.seeds;
    j["runtime_seconds"] = r.runtime_seconds;
    double total = 0.0;
    for (double v : r.runtime_seconds) total += v;
    j["total_seconds"] = total;
    return j.dump(2) + "\n";
}

}  // namespace shelfrec::benchmark
