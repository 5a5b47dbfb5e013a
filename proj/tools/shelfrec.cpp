// shelfrec: command-line entry point. Every run writes its outputs plus a manifest
// (resolved parameters, input and output digests) that `--from-manifest` replays.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "digest.hpp"
#include "shelfrec/baselines.hpp"
#include "shelfrec/benchmark.hpp"
#include "shelfrec/candidates.hpp"
#include "shelfrec/config.hpp"
#include "shelfrec/evaluation.hpp"
#include "shelfrec/geocluster.hpp"
#include "shelfrec/ingest.hpp"
#include "shelfrec/reward.hpp"
#include "shelfrec/search.hpp"
#include "shelfrec/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace shelfrec;

namespace {

constexpr const char* kVersion = "0.1.0";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Kind { Str, Path, Int, Real, Flag };

struct OptSpec {
    std::string name;
    Kind kind;
    std::string def;
    std::string help;
    bool required = false;
};

using Params = std::map<std::string, std::string>;

// Everything a subcommand reads and writes goes through here so the manifest sees it.
class Run {
public:
    Run(std::string cmd, Params params, fs::path out) : cmd_(std::move(cmd)), params_(std::move(params)), out_(std::move(out)) {}

    const std::string& str(const std::string& k) const {
        auto it = params_.find(k);
        if (it == params_.end()) throw std::logic_error("no parameter '" + k + "'");
        return it->second;
    }
    bool has(const std::string& k) const { return params_.count(k) && !params_.at(k).empty(); }
    int integer(const std::string& k) const {
        try {
            const long long v = parse_int(str(k));
            if (v < INT32_MIN || v > INT32_MAX) throw std::out_of_range("int");
            return static_cast<int>(v);
        } catch (const std::exception&) {
            throw UsageError("option --" + k + ": expected an integer, got '" + str(k) + "'");
        }
    }
    std::uint64_t u64(const std::string& k) const {
        const std::string& s = str(k);
        try {
            if (s.empty() || s.front() == '-') throw std::out_of_range("neg");
            std::size_t pos = 0;
            const auto v = std::stoull(s, &pos);
            if (pos != s.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw UsageError("option --" + k + ": expected a non-negative integer, got '" + s + "'");
        }
    }
    double real(const std::string& k) const {
        try {
            return parse_double(str(k));
        } catch (const std::exception&) {
            throw UsageError("option --" + k + ": expected a number, got '" + str(k) + "'");
        }
    }
    bool flag(const std::string& k) const { return str(k) == "true"; }

    std::string input(const std::string& k) {
        const std::string path = str(k);
        if (!fs::exists(path)) throw ArgumentError("input --" + k + ": file '" + path + "' does not exist");
        std::string text = ingest::read_text_file(path);
        inputs_[k] = {path, tools::sha256_hex(text)};
        return text;
    }

    void output(const std::string& name, const std::string& text, bool volatile_file = false) {
        const fs::path p = out_ / name;
        fs::create_directories(p.parent_path());
        ingest::write_text_file(p.string(), text);
        if (volatile_file) volatile_.insert(name);
        else outputs_[name] = tools::sha256_hex(text);
    }

    json manifest() const {
        json j;
        j["format"] = "shelfrec-manifest";
        j["tool"] = "shelfrec";
        j["version"] = kVersion;
        j["subcommand"] = cmd_;
        j["params"] = params_;
        json in = json::object();
        for (const auto& [k, v] : inputs_) in[k] = {{"path", v.first}, {"sha256", v.second}};
        j["inputs"] = in;
        j["outputs"] = outputs_;
        j["volatile_outputs"] = volatile_;
        j["libraries"] = {{"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                          {"cli11", CLI11_VERSION}};
        return j;
    }

    const std::map<std::string, std::string>& outputs() const { return outputs_; }
    const std::string& command() const { return cmd_; }
    const Params& params() const { return params_; }

private:
    std::string cmd_;
    Params params_;
    fs::path out_;
    std::map<std::string, std::pair<std::string, std::string>> inputs_;
    std::map<std::string, std::string> outputs_;
    std::set<std::string> volatile_;
};

struct Command {
    std::string name;
    std::string help;
    std::vector<OptSpec> opts;
    std::vector<std::pair<std::string, std::string>> excludes;
    bool uses_bench_config = false;  // parameters are the benchmark/world config keys
    std::function<int(Run&)> run;
};

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

json nan_safe(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

// ---------------- subcommands ----------------

int cmd_ingest(Run& r) {
    const auto parsed = ingest::parse_scan_log(r.input("scans"));
    ingest::FacingDepth depth;
    depth.default_depth = r.integer("depth");
    if (depth.default_depth < 1) throw ArgumentError("--depth must be >= 1");
    const auto derived = ingest::derive_sales(parsed.items, depth);
    r.output("sales.csv", ingest::sales_to_csv(derived.records));
    json rep;
    rep["events"] = parsed.items.size();
    rep["records"] = derived.records.size();
    int clamped = 0;
    for (const auto& s : derived.records) clamped += s.clamped ? 1 : 0;
    rep["clamped_records"] = clamped;
    rep["skipped_incomplete_visits"] = derived.skipped_incomplete_visits;
    rep["skipped_nonpositive_intervals"] = derived.skipped_nonpositive_intervals;
    json errs = json::array();
    for (const auto& e : parsed.errors) errs.push_back({{"line", e.line}, {"message", e.message}});
    rep["row_errors"] = errs;
    r.output("ingest_report.json", dump_json(rep));
    if (!parsed.errors.empty()) {
        std::cerr << "ingest: " << parsed.errors.size() << " malformed row(s) skipped; see ingest_report.json\n";
        if (r.flag("strict")) return 1;
    }
    return 0;
}

geocluster::StoreSales store_sales_from(const std::vector<ingest::SalesRecord>& sales) {
    std::map<StoreId, std::map<ProductId, std::pair<double, int>>> acc;
    for (const auto& s : sales) {
        auto& a = acc[s.store_id][s.product_id];
        a.first += s.units_sold / s.quantity_faced;
        ++a.second;
    }
    geocluster::StoreSales out;
    for (const auto& [st, m] : acc) {
        for (const auto& [p, a] : m) out[st][p] = a.first / a.second;
    }
    return out;
}

// "2..40" or "3,5,8"
std::vector<int> parse_k_range(const std::string& s) {
    std::vector<int> ks;
    try {
        if (const auto dots = s.find(".."); dots != std::string::npos) {
            const int lo = static_cast<int>(parse_int(trim(s.substr(0, dots))));
            const int hi = static_cast<int>(parse_int(trim(s.substr(dots + 2))));
            if (lo > hi) throw std::invalid_argument("empty range");
            for (int k = lo; k <= hi; ++k) ks.push_back(k);
        } else {
            for (const auto& t : split(s, ',')) ks.push_back(static_cast<int>(parse_int(trim(t))));
        }
    } catch (const std::exception&) {
        throw UsageError("option --select-k: expected a range like 2..40 or a list like 3,5,8, got '" + s + "'");
    }
    return ks;
}

int cmd_cluster(Run& r) {
    const auto stores = geocluster::load_stores(r.input("stores"));
    const auto tracts = ingest::load_tracts(r.input("tracts"));
    if (!tracts.errors.empty()) {
        throw ParseError("tracts line " + std::to_string(tracts.errors.front().line) + ": " +
                         tracts.errors.front().message);
    }
    geocluster::SpagmmConfig sc;
    sc.convergence_rel_tol = r.real("tol");
    sc.max_iterations = r.integer("max-iter");
    const auto metric = r.str("metric");
    if (metric == "loglik") sc.metric = geocluster::ConvergenceMetric::LogLikelihood;
    else if (metric == "density") sc.metric = geocluster::ConvergenceMetric::RawDensity;
    else throw UsageError("option --metric: expected loglik or density, got '" + metric + "'");

    const auto fit = geocluster::fit_spagmm(stores, tracts.items, sc);
    const auto profiles = geocluster::store_profiles(fit.membership, tracts.items);

    geocluster::KMeansConfig kc;
    kc.seed = r.u64("seed");
    kc.restarts = r.integer("restarts");
    kc.k = r.integer("k");
    auto cluster_fn = [&](int k) {
        auto c = kc;
        c.k = k;
        return geocluster::kmeans(profiles, c);
    };

    json meta = {{"iterations", fit.iterations},
                 {"converged", fit.converged},
                 {"covariances_spd_throughout", fit.covariances_spd_throughout},
                 {"objective_history", fit.objective_history},
                 {"perturbed_stores", fit.perturbed_stores}};
    if (r.has("select-k")) {
        if (!r.has("sales")) throw UsageError("--select-k requires --sales");
        const auto sales = ingest::sales_from_csv(r.input("sales"));
        if (!sales.errors.empty()) {
            throw ParseError("sales line " + std::to_string(sales.errors.front().line) + ": " +
                             sales.errors.front().message);
        }
        const auto ks = parse_k_range(r.str("select-k"));
        const auto sel = geocluster::select_k(cluster_fn, store_sales_from(sales.items), ks, r.real("alpha"),
                                              r.real("elbow"));
        json entries = json::array();
        for (const auto& e : sel.entries) {
            entries.push_back({{"k", e.k},
                               {"fraction_significant", e.fraction_significant},
                               {"products_tested", e.products_tested},
                               {"products_excluded", e.products_excluded}});
        }
        r.output("k_selection.json", dump_json({{"entries", entries},
                                                {"recommended_k", sel.recommended_k},
                                                {"alpha", sel.alpha},
                                                {"elbow_threshold", sel.elbow_threshold}}));
        kc.k = sel.recommended_k;
    }
    const auto clusters = cluster_fn(kc.k);
    meta["k"] = clusters.k;
    meta["kmeans_wcss"] = clusters.wcss;
    r.output("membership.csv", geocluster::membership_to_csv(fit.membership));
    r.output("membership_components.csv", geocluster::membership_components_to_csv(fit.membership));
    r.output("profiles.csv", geocluster::profiles_to_csv(profiles));
    r.output("clusters.csv", geocluster::clusters_to_csv(clusters));
    r.output("centroids.csv", geocluster::centroids_to_csv(clusters));
    r.output("spagmm.json", dump_json(meta));
    return 0;
}

int cmd_fit_rbp(Run& r) {
    const auto sales = ingest::sales_from_csv(r.input("sales"));
    if (!sales.errors.empty()) {
        throw ParseError("sales line " + std::to_string(sales.errors.front().line) + ": " + sales.errors.front().message);
    }
    const auto clusters = geocluster::clusters_from_csv(r.input("clusters"));
    reward::SamplerConfig sc;
    sc.chains = r.integer("chains");
    sc.draws = r.integer("draws");
    sc.warmup = r.integer("warmup");
    sc.seed = r.u64("seed");
    reward::RbpHyperParams hp;
    hp.mu0 = r.real("mu0");
    hp.sigma0 = r.real("sigma0");
    hp.mu1 = r.real("mu1");
    hp.sigma1 = r.real("sigma1");
    hp.mu2 = r.real("mu2");
    hp.sigma2 = r.real("sigma2");
    const auto post = reward::fit_rbp(sales.items, clusters, hp, sc);
    r.output("posterior.json", reward::posterior_to_json(post));
    json d;
    d["pass"] = post.diagnostics.pass;
    d["convergence_warning"] = post.convergence_warning;
    d["max_rhat"] = nan_safe(post.diagnostics.max_rhat);
    d["min_ess"] = nan_safe(post.diagnostics.min_ess);
    d["rhat_threshold"] = post.diagnostics.rhat_threshold;
    d["ess_threshold"] = post.diagnostics.ess_threshold;
    d["excluded_zero_records"] = post.excluded_zero_records;
    d["omitted_products"] = post.omitted_products;
    json ps = json::array();
    for (const auto& p : post.diagnostics.params) ps.push_back({{"name", p.name}, {"rhat", nan_safe(p.rhat)}, {"ess", nan_safe(p.ess)}});
    d["params"] = ps;
    r.output("diagnostics.json", dump_json(d));
    if (post.convergence_warning) std::cerr << "fit-rbp: convergence warning (see diagnostics.json)\n";
    return 0;
}

int cmd_candidates(Run& r) {
    const auto states = candidates::states_from_csv(r.input("states"));
    const auto cat = ingest::load_catalog(r.input("catalog"));
    if (!cat.errors.empty()) {
        throw ParseError("catalog line " + std::to_string(cat.errors.front().line) + ": " + cat.errors.front().message);
    }
    const auto catalog = candidates::make_catalog(cat.items);
    const auto graph = candidates::build_graph(states, catalog);
    const int tau = r.integer("tau");
    const auto seed = r.u64("seed");

    // the latest logged state of each display seeds its candidates
    std::map<DisplayId, const candidates::DisplayStateLog*> latest;
    for (const auto& s : states) {
        auto& cur = latest[s.display_id];
        if (!cur || s.timestamp >= cur->timestamp) cur = &s;
    }
    std::vector<candidates::CandidateSet> sets;
    json rep = json::object();
    if (r.has("seed-display")) {
        const auto it = latest.find(r.str("seed-display"));
        if (it == latest.end()) throw ArgumentError("--seed-display: no logged state for display '" + r.str("seed-display") + "'");
        latest = {*it};
    }
    for (const auto& [d, s] : latest) {
        Rng rng(mix_seed(seed, stable_hash(d)));
        const std::set<ProductId> seed_set(s->products.begin(), s->products.end());
        auto sampled = candidates::sample_candidates(graph, seed_set, tau, rng);
        auto cs = candidates::prune(sampled.votes, seed_set, catalog, d, tau);
        rep[d] = {{"missing_seeds", sampled.missing_seeds},
                  {"dropped_missing_height", cs.dropped_missing_height},
                  {"candidates", cs.candidates.size()}};
        sets.push_back(std::move(cs));
    }
    r.output("graph.csv", candidates::graph_to_csv(graph));
    r.output("graph_meta.json", candidates::graph_meta_to_json(graph));
    r.output("candidates.csv", candidates::candidates_to_csv(sets));
    r.output("candidates_report.json", dump_json(rep));
    return 0;
}

search::SearchConfig search_config(const Run& r) {
    search::SearchConfig c;
    c.V = r.integer("v");
    c.epsilon = r.real("epsilon");
    c.lambda = r.real("lambda");
    c.T = r.integer("T");
    c.seed = r.u64("seed");
    return c;
}

int cmd_recommend(Run& r) {
    const auto sf = search::state_from_json(r.input("state"));
    const auto post = reward::posterior_from_json(r.input("posterior"));
    const auto all = candidates::candidates_from_csv(r.input("candidates"));
    auto cfg = search_config(r);
    cfg.decay_state = sf.decay_state;
    candidates::CandidateSet cands;
    if (auto it = all.find(sf.state.display_id); it != all.end()) cands = it->second;
    else std::cerr << "recommend: no candidates for display '" << sf.state.display_id << "'\n";

    const reward::PepfScorer scorer(post, cfg.lambda, cfg.seed, sf.cluster);
    const StoreId store = sf.state.store_id;
    const auto rec = search::recommend(
        sf.state, cands, [&](const ProductId& p, int q) { return scorer.score(p, store, q); }, cfg);
    r.output("recommendation.json", search::recommendation_to_json(rec, cfg));
    search::StateFile next = sf;
    next.state.slots = rec.assignment;
    next.decay_state = rec.decay_state;
    r.output("next_state.json", search::state_to_json(next));

    if (r.has("catalog")) {
        const auto cat = ingest::load_catalog(r.input("catalog"));
        const auto report = search::validate(rec, sf.state, cands, candidates::make_catalog(cat.items));
        json j;
        j["pass"] = report.pass;
        j["overflow"] = report.overflow;
        json checks = json::array();
        for (const auto& c : report.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
        j["checks"] = checks;
        r.output("validation.json", dump_json(j));
        if (!report.pass) {
            std::cerr << "recommend: validation failed (see validation.json)\n";
            return 1;
        }
    }
    return 0;
}

int cmd_replay(Run& r) {
    const auto logs = evaluation::logs_from_csv(r.input("logs"));
    const std::string policy_name = r.str("policy");
    const double subsample = r.real("subsample");
    evaluation::MatchRule rule;
    const auto match = r.str("match");
    if (match == "exact") rule = {evaluation::MatchKind::ExactSet, 1.0};
    else if (match == "jaccard") rule = {evaluation::MatchKind::Jaccard, r.real("theta")};
    else throw UsageError("option --match: expected exact or jaccard, got '" + match + "'");

    evaluation::Policy policy;
    std::map<DisplayId, std::map<ProductId, reward::PepfScore>> table;
    std::map<DisplayId, candidates::CandidateSet> cands;
    const auto cfg = search_config(r);
    if (policy_name == "full") {
        if (!r.has("posterior") || !r.has("candidates")) throw UsageError("--policy full requires --posterior and --candidates");
        const auto post = reward::posterior_from_json(r.input("posterior"));
        cands = candidates::candidates_from_csv(r.input("candidates"));
        const reward::PepfScorer scorer(post, cfg.lambda, cfg.seed);
        for (const auto& ev : logs) {
            auto& t = table[ev.display_id];
            auto score = [&](const ProductId& p) {
                if (!t.count(p)) t[p] = scorer.score(p, ev.offered_state.store_id, 1);
            };
            for (const auto& [p, q] : ev.offered_state.slots) score(p);
            if (auto it = cands.find(ev.display_id); it != cands.end()) {
                for (const auto& v : it->second.candidates) score(v.product_id);
            }
        }
        policy = [&](const evaluation::LoggedInteraction& ev, Rng& rng) {
            auto sc = cfg;
            sc.seed = rng();
            const auto& t = table.at(ev.display_id);
            candidates::CandidateSet empty;
            auto it = cands.find(ev.display_id);
            return search::recommend(ev.offered_state, it == cands.end() ? empty : it->second,
                                     [&](const ProductId& p, int) { return t.at(p); }, sc)
                .assignment;
        };
    } else if (policy_name == "random") {
        if (r.has("candidates")) cands = candidates::candidates_from_csv(r.input("candidates"));
        policy = [&](const evaluation::LoggedInteraction& ev, Rng& rng) {
            std::set<ProductId> pool;
            for (const auto& [p, q] : ev.offered_state.slots) pool.insert(p);
            if (auto it = cands.find(ev.display_id); it != cands.end()) {
                for (const auto& v : it->second.candidates) pool.insert(v.product_id);
            }
            const std::vector<ProductId> choices(pool.begin(), pool.end());
            return baselines::random_subset(choices, ev.offered_state.capacity, rng);
        };
    } else if (policy_name == "planogram") {
        policy = [](const evaluation::LoggedInteraction& ev, Rng&) { return ev.offered_state.slots; };
    } else {
        throw UsageError("option --policy: expected full, random or planogram, got '" + policy_name + "'");
    }
    const auto rep = evaluation::replay_evaluate(policy, logs, subsample, rule, r.u64("seed"));
    json j;
    j["policy"] = policy_name;
    j["defined"] = rep.defined;
    j["mean_reward"] = nan_safe(rep.mean_reward);
    j["median_reward"] = nan_safe(rep.median_reward);
    j["std_reward"] = nan_safe(rep.std_reward);
    j["matched_count"] = rep.matched_count;
    j["total_count"] = rep.total_count;
    j["logged_count"] = rep.logged_count;
    j["subsample_fraction"] = rep.subsample_fraction;
    j["seed"] = rep.seed;
    r.output("replay.json", dump_json(j));
    return 0;
}

int cmd_did(Run& r) {
    evaluation::DidReport rep;
    if (r.has("means")) {
        std::vector<double> v;
        for (const auto& t : split(r.str("means"), ',')) {
            try {
                v.push_back(parse_double(trim(t)));
            } catch (const std::exception&) {
                throw UsageError("option --means: '" + t + "' is not a number");
            }
        }
        if (v.size() != 4) throw UsageError("option --means: expected pre_treat,post_treat,pre_control,post_control");
        rep = evaluation::did_from_means(v[0], v[1], v[2], v[3]);
    } else if (r.has("panel")) {
        const auto panel = evaluation::panel_from_csv(r.input("panel"));
        rep = evaluation::did_estimate(panel);
        const int n = r.integer("permutations");
        if (n > 0) {
            const auto perm = evaluation::permutation_test(panel, n, r.u64("seed"));
            rep.p_value = perm.p_value;
            rep.n_permutations = perm.n_permutations;
        }
    } else {
        throw UsageError("did: one of --panel or --means is required");
    }
    json j;
    j["pre_treat"] = rep.pre_treat;
    j["post_treat"] = rep.post_treat;
    j["pre_control"] = rep.pre_control;
    j["post_control"] = rep.post_control;
    j["did_units"] = rep.did_units;
    j["did_percent"] = nan_safe(rep.did_percent);
    j["p_value"] = rep.n_permutations > 0 ? json(rep.p_value) : json(nullptr);
    j["n_permutations"] = rep.n_permutations;
    r.output("did.json", dump_json(j));
    return 0;
}

benchmark::BenchConfig bench_config(const Params& params) {
    benchmark::BenchConfig c;
    config::Binder b;
    config::bind_bench(b, c);
    b.apply(params);
    c.validate();
    return c;
}

int cmd_bench(Run& r) {
    const auto cfg = bench_config(r.params());
    const auto rep = benchmark::run_benchmark(cfg);
    r.output("report.json", benchmark::report_to_json(rep));
    r.output("policies.csv", benchmark::policies_to_csv(rep));
    if (cfg.ablations) r.output("ablations.csv", benchmark::ablations_to_csv(rep));
    r.output("timing.json", benchmark::timing_to_json(rep), true);
    int failed = 0;
    for (const auto& p : rep.policies) failed += p.failed;
    for (const auto& p : rep.ablations) failed += p.failed;
    if (failed) std::cerr << "bench: " << failed << " failed run(s) recorded in report.json\n";
    return 0;
}

std::string stores_csv(const simulator::SyntheticWorld& w) {
    std::string out = "store_id,lat,lon\n";
    for (const auto& s : w.stores) out += s.store_id + "," + format_double(s.lat) + "," + format_double(s.lon) + "\n";
    return out;
}

int cmd_simulate(Run& r) {
    const auto cfg = bench_config(r.params());
    const auto seed = cfg.seed;
    const auto w = simulator::gen_world(cfg.world, seed);
    const auto log = simulator::simulate_training(w, mix_seed(seed, 2));
    const auto eval = simulator::simulate_eval_log(w, mix_seed(seed, 3));
    r.output("stores.csv", stores_csv(w));
    r.output("tracts.csv", ingest::tracts_to_csv(w.tracts));
    r.output("catalog.csv", ingest::catalog_to_csv(w.catalog));
    r.output("scans.csv", ingest::scans_to_csv(log.scans));
    r.output("states.csv", candidates::states_to_csv(log.states));
    r.output("eval_logs.csv", evaluation::logs_to_csv(eval));
    json truth;
    truth["beta"] = w.beta;
    truth["sigma"] = w.sigma;
    json lat = json::object();
    for (const auto& s : w.stores) lat[s.store_id] = s.latent_cluster;
    truth["latent_cluster"] = lat;
    truth["lumpy"] = w.lumpy;
    r.output("truth.json", dump_json(truth));
    for (const auto& s : w.stores) {
        search::StateFile sf;
        sf.state = {s.display_id, s.store_id, s.planogram, cfg.world.capacity};
        r.output("displays/" + s.display_id + ".json", search::state_to_json(sf));
    }
    return 0;
}

std::vector<Command> commands() {
    const std::vector<OptSpec> search_opts = {
        {"v", Kind::Int, "2", "victims per iteration"},
        {"epsilon", Kind::Real, "0.05", "probability of a random replacement"},
        {"lambda", Kind::Real, "1", "penalty on payoff sd"},
        {"T", Kind::Int, "1", "search iterations"},
        {"seed", Kind::Int, "0", "random seed"},
    };
    std::vector<Command> out;
    out.push_back({"ingest", "derive per-interval sales from pre/post scan logs",
                   {{"scans", Kind::Path, "", "scan log CSV", true},
                    {"depth", Kind::Int, "1", "units per facing"},
                    {"strict", Kind::Flag, "false", "exit 1 when rows are malformed"}},
                   {}, false, cmd_ingest});
    out.push_back({"cluster", "fit SpAGMM memberships and cluster store profiles",
                   {{"stores", Kind::Path, "", "store_id,lat,lon CSV", true},
                    {"tracts", Kind::Path, "", "tract CSV with demographics", true},
                    {"sales", Kind::Path, "", "sales CSV (needed by --k-candidates)"},
                    {"k", Kind::Int, "20", "number of clusters"},
                    {"select-k", Kind::Str, "", "k values for ANOVA-based selection: lo..hi or a list"},
                    {"restarts", Kind::Int, "10", "k-means restarts"},
                    {"seed", Kind::Int, "0", "random seed"},
                    {"tol", Kind::Real, "0.05", "relative convergence tolerance"},
                    {"max-iter", Kind::Int, "200", "EM iteration cap"},
                    {"metric", Kind::Str, "loglik", "convergence metric: loglik or density"},
                    {"alpha", Kind::Real, "0.05", "ANOVA significance level"},
                    {"elbow", Kind::Real, "0.02", "minimum gain in significant fraction"}},
                   {{"k", "select-k"}}, false, cmd_cluster});
    out.push_back({"fit-rbp", "fit the hierarchical payoff model",
                   {{"sales", Kind::Path, "", "sales CSV", true},
                    {"clusters", Kind::Path, "", "clusters CSV", true},
                    {"chains", Kind::Int, "4", "MCMC chains"},
                    {"draws", Kind::Int, "1000", "draws per chain"},
                    {"warmup", Kind::Int, "1000", "warmup iterations per chain"},
                    {"seed", Kind::Int, "0", "random seed"},
                    {"mu0", Kind::Real, "0", ""},
                    {"sigma0", Kind::Real, "2", ""},
                    {"mu1", Kind::Real, "0", ""},
                    {"sigma1", Kind::Real, "1", ""},
                    {"mu2", Kind::Real, "0", ""},
                    {"sigma2", Kind::Real, "2", ""}},
                   {}, false, cmd_fit_rbp});
    out.push_back({"candidates", "build the co-occurrence graph and sample candidates per display",
                   {{"states", Kind::Path, "", "display state log CSV", true},
                    {"catalog", Kind::Path, "", "catalog CSV", true},
                    {"tau", Kind::Int, "10", "neighbours drawn per seed product"},
                    {"seed-display", Kind::Str, "", "only this display (default: every display in the log)"},
                    {"seed", Kind::Int, "0", "random seed"}},
                   {}, false, cmd_candidates});
    {
        Command c{"recommend", "recommend an assignment for one display",
                  {{"state", Kind::Path, "", "display state JSON", true},
                   {"posterior", Kind::Path, "", "posterior JSON", true},
                   {"candidates", Kind::Path, "", "candidates CSV", true},
                   {"catalog", Kind::Path, "", "catalog CSV; enables validation"}},
                  {}, false, cmd_recommend};
        c.opts.insert(c.opts.end(), search_opts.begin(), search_opts.end());
        out.push_back(std::move(c));
    }
    {
        Command c{"replay", "replay-evaluate a policy on logged interactions",
                  {{"logs", Kind::Path, "", "logged interactions CSV", true},
                   {"policy", Kind::Str, "full", "full, random or planogram"},
                   {"posterior", Kind::Path, "", "posterior JSON (policy full)"},
                   {"candidates", Kind::Path, "", "candidates CSV (policies full and random)"},
                   {"subsample", Kind::Real, "0.5", "fraction of events kept"},
                   {"match", Kind::Str, "exact", "exact or jaccard"},
                   {"theta", Kind::Real, "0.75", "Jaccard threshold"}},
                  {}, false, cmd_replay};
        c.opts.insert(c.opts.end(), search_opts.begin(), search_opts.end());
        out.push_back(std::move(c));
    }
    out.push_back({"did", "difference-in-differences with a permutation test",
                   {{"panel", Kind::Path, "", "unit_id,group,period,value CSV"},
                    {"means", Kind::Str, "", "pre_treat,post_treat,pre_control,post_control"},
                    {"permutations", Kind::Int, "10000", "label permutations (0 to skip)"},
                    {"seed", Kind::Int, "0", "random seed"}},
                   {{"panel", "means"}}, false, cmd_did});
    out.push_back({"bench", "run the synthetic benchmark",
                   {{"policies", Kind::Str, "", "comma-separated policies"},
                    {"seeds", Kind::Int, "", "number of seeds"},
                    {"seed", Kind::Int, "", "base seed"},
                    {"ablations", Kind::Str, "", "all or none"}},
                   {}, true, cmd_bench});
    out.push_back({"simulate", "generate a synthetic world and its logs",
                   {{"seed", Kind::Int, "", "world seed"}}, {}, true, cmd_simulate});
    return out;
}

// flag name -> benchmark config key
const std::map<std::string, std::string>& bench_flag_keys() {
    static const std::map<std::string, std::string> m = {
        {"policies", "bench.policies"}, {"seeds", "bench.n_seeds"}, {"seed", "bench.seed"}, {"ablations", "bench.ablations"}};
    return m;
}

std::vector<std::string> option_names(const Command& c) {
    std::vector<std::string> out = {"--out", "--jobs", "--config", "--from-manifest", "--help"};
    for (const auto& o : c.opts) out.push_back("--" + o.name);
    return out;
}

void unknown_key(const std::string& key, const std::string& word, const std::vector<std::string>& known,
                 const std::string& prefix) {
    std::string msg = "config: unknown key '" + key + "'";
    const auto s = config::suggest(word, known);
    if (!s.empty()) msg += "; did you mean '" + prefix + s + "'?";
    throw UsageError(msg);
}

// Every key in the file must be known, whichever subcommand runs.
void check_file(const std::vector<Command>& cmds, const config::Binder& b, const config::KeyValues& file) {
    std::map<std::string, std::vector<std::string>> sections;
    for (const auto& c : cmds) {
        if (c.uses_bench_config) continue;
        for (const auto& o : c.opts) sections[c.name].push_back(o.name);
    }
    for (const auto& k : b.keys()) sections[k.substr(0, k.find('.'))].push_back(k.substr(k.find('.') + 1));
    std::vector<std::string> names;
    for (const auto& [n, _] : sections) names.push_back(n);
    for (const auto& [k, v] : file) {
        const auto dot = k.find('.');
        const std::string sec = dot == std::string::npos ? "" : k.substr(0, dot);
        const std::string name = dot == std::string::npos ? k : k.substr(dot + 1);
        auto it = sections.find(sec);
        if (it == sections.end()) unknown_key(k, sec, names, "");
        if (std::find(it->second.begin(), it->second.end(), name) == it->second.end()) {
            unknown_key(k, name, it->second, sec + ".");
        }
    }
}

// defaults < config file < SHELFREC_SEED < flags
Params resolve(const Command& c, const std::map<std::string, std::string>& flags, const config::KeyValues& file) {
    benchmark::BenchConfig bc;
    config::Binder b;
    config::bind_bench(b, bc);
    check_file(commands(), b, file);

    const char* env_seed = std::getenv("SHELFREC_SEED");
    if (c.uses_bench_config) {
        try {
            for (const auto& [k, v] : file) {
                if (b.has(k)) b.set(k, v);
            }
            if (env_seed) b.set("bench.seed", env_seed);
            for (const auto& [flag, v] : flags) {
                if (flag == "ablations") {
                    if (v != "all" && v != "none") throw UsageError("option --ablations: expected all or none, got '" + v + "'");
                    b.set("bench.ablations", v == "all" ? "true" : "false");
                } else {
                    try {
                        b.set(bench_flag_keys().at(flag), v);
                    } catch (const ArgumentError&) {
                        throw UsageError("option --" + flag + ": invalid value '" + v + "'");
                    }
                }
            }
            bc.validate();
        } catch (const ArgumentError& e) {
            throw UsageError(e.what());
        }
        return b.dump();
    }

    Params p;
    for (const auto& o : c.opts) p[o.name] = o.def;
    for (const auto& [k, v] : file) {
        if (k.rfind(c.name + ".", 0) == 0) p[k.substr(c.name.size() + 1)] = v;
    }
    if (env_seed && p.count("seed")) p["seed"] = env_seed;
    for (const auto& [k, v] : flags) p[k] = v;
    for (const auto& o : c.opts) {
        if (o.required && p[o.name].empty()) throw UsageError(c.name + ": missing required option --" + o.name);
        // recorded absolute so a manifest replays from any directory
        if (o.kind == Kind::Path && !p[o.name].empty()) p[o.name] = fs::absolute(p[o.name]).lexically_normal().string();
    }
    return p;
}

int execute(const Command& c, const Params& params, const fs::path& out, const json* expected) {
    Run run(c.name, params, out);
    fs::create_directories(out);
    const int code = c.run(run);
    const json manifest = run.manifest();
    ingest::write_text_file((out / "manifest.json").string(), dump_json(manifest));
    if (expected) {
        if (manifest.at("outputs") != expected->at("outputs")) {
            std::cerr << "rerun: outputs differ from the manifest\n";
            return 1;
        }
        std::cerr << "rerun: outputs byte-identical to the manifest\n";
    }
    return code;
}

int from_manifest(const std::string& path, const fs::path& out) {
    json m;
    try {
        m = json::parse(ingest::read_text_file(path));
    } catch (const json::exception& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
    if (m.value("format", "") != "shelfrec-manifest") throw ParseError("manifest: not a shelfrec manifest");
    if (m.value("version", "") != kVersion) {
        throw VersionError("manifest version " + m.value("version", std::string("?")) + " does not match tool version " +
                           kVersion);
    }
    const std::string name = m.at("subcommand").get<std::string>();
    const auto cmds = commands();
    auto it = std::find_if(cmds.begin(), cmds.end(), [&](const Command& c) { return c.name == name; });
    if (it == cmds.end()) throw ParseError("manifest: unknown subcommand '" + name + "'");
    const Params params = m.at("params").get<Params>();
    for (const auto& [k, v] : m.at("inputs").items()) {
        const std::string p = v.at("path");
        if (!fs::exists(p)) throw ArgumentError("manifest input '" + p + "' no longer exists");
        if (tools::sha256_hex(ingest::read_text_file(p)) != v.at("sha256").get<std::string>()) {
            throw ArgumentError("manifest input '" + p + "' changed since the recorded run");
        }
    }
    return execute(*it, params, out, &m);
}

}  // namespace

int main(int argc, char** argv) {
    const auto cmds = commands();
    CLI::App app{"shelfrec: uncertainty-aware product assortment recommendation"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(0, 1);
    std::string out = "out", config_path, manifest_path;
    int jobs = 0;
    app.add_option("--out", out, "output directory")->capture_default_str();
    app.add_option("--jobs", jobs, "worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
    auto* cfg_opt = app.add_option("--config", config_path, "TOML configuration file");
    auto* man_opt = app.add_option("--from-manifest", manifest_path, "rerun a recorded manifest");
    man_opt->excludes(cfg_opt);

    std::map<std::string, std::map<std::string, std::string>> raw;
    std::map<std::string, CLI::App*> subs;
    for (const auto& c : cmds) {
        auto* sub = app.add_subcommand(c.name, c.help);
        subs[c.name] = sub;
        std::map<std::string, CLI::Option*> opts;
        for (const auto& o : c.opts) {
            std::string help = o.help;
            if (!o.def.empty() && o.kind != Kind::Flag) help += " [default: " + o.def + "]";
            if (o.required) help += " (required)";
            if (o.kind == Kind::Flag) {
                opts[o.name] = sub->add_flag_callback("--" + o.name, [&raw, name = c.name, on = o.name] { raw[name][on] = "true"; }, help);
            } else {
                opts[o.name] = sub->add_option_function<std::string>(
                    "--" + o.name, [&raw, name = c.name, on = o.name](const std::string& v) { raw[name][on] = v; }, help);
            }
        }
        for (const auto& [a, b] : c.excludes) opts.at(a)->excludes(opts.at(b));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ExtrasError& e) {
        // find the subcommand on the line to suggest against its options
        const Command* active = nullptr;
        for (int i = 1; i < argc && !active; ++i) {
            for (const auto& c : cmds) {
                if (c.name == argv[i]) active = &c;
            }
        }
        std::cerr << "error: " << e.what() << "\n";
        const std::vector<std::string> global_values{"--out", "--jobs", "--config", "--from-manifest"};
        bool suggested_subcommand = false;
        for (int i = 1; i < argc; ++i) {
            const std::string a = argv[i];
            std::vector<std::string> pool;
            const bool after_global = i > 1 && std::find(global_values.begin(), global_values.end(), argv[i - 1]) != global_values.end();
            if (a.rfind("--", 0) == 0) {
                const auto eq = a.find('=');
                const std::string flag = a.substr(0, eq);
                pool = active ? option_names(*active) : std::vector<std::string>{"--out", "--jobs", "--config", "--from-manifest"};
                if (std::find(pool.begin(), pool.end(), flag) != pool.end()) continue;
                const auto s = config::suggest(flag, pool);
                if (!s.empty()) std::cerr << "  unknown option '" << flag << "'; did you mean '" << s << "'?\n";
            } else if (!active && !after_global && !suggested_subcommand) {
                suggested_subcommand = true;
                for (const auto& c : cmds) pool.push_back(c.name);
                const auto s = config::suggest(a, pool);
                if (!s.empty()) std::cerr << "  unknown subcommand '" << a << "'; did you mean '" << s << "'?\n";
            }
        }
        return 2;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    if (jobs > 0) omp_set_num_threads(jobs);

    try {
        const Command* active = nullptr;
        for (const auto& c : cmds) {
            if (subs.at(c.name)->parsed()) active = &c;
        }
        if (!manifest_path.empty()) {
            if (active) throw UsageError("--from-manifest cannot be combined with a subcommand");
            return from_manifest(manifest_path, out);
        }
        if (!active) {
            std::cerr << app.help();
            return 2;
        }
        config::KeyValues file;
        if (!config_path.empty()) {
            if (!fs::exists(config_path)) throw UsageError("--config: file '" + config_path + "' does not exist");
            file = config::parse_toml(ingest::read_text_file(config_path));
        }
        const Params params = resolve(*active, raw[active->name], file);
        return execute(*active, params, out, nullptr);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ArgumentError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
