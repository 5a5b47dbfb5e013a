// Acceptance driver: one PASS/FAIL line per criterion. Tolerances and budgets are fixed here.
// Usage: acceptance [path-to-shelfrec-binary] [work-dir]

#include <gmpxx.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/binomial.hpp>

#include "fuzz.hpp"
#include "oracle.hpp"
#include "shelfrec/benchmark.hpp"
#include "shelfrec/combinatorics.hpp"
#include "shelfrec/evaluation.hpp"
#include "shelfrec/geocluster.hpp"
#include "shelfrec/reward.hpp"
#include "shelfrec/simulator.hpp"
#include "toy.hpp"

using namespace shelfrec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------- 1 ----------------

Outcome did_arithmetic() {
    const double tol = 0.01;
    const auto e1 = evaluation::did_from_means(5.82, 6.77, 5.40, 4.40);
    const auto e2 = evaluation::did_from_means(9.50, 10.74, 12.74, 10.86);
    struct Row {
        const char* what;
        double got, want;
    };
    const std::vector<Row> rows{{"exp1 units", e1.did_units, 1.95},
                                {"exp1 pp", e1.did_percent, 35.03},
                                {"exp2 units", e2.did_units, 3.12},
                                {"exp2 pp", e2.did_percent, 27.78}};
    Outcome o{true, ""};
    for (const auto& r : rows) {
        const bool ok = std::abs(r.got - r.want) <= tol;
        o.pass = o.pass && ok;
        o.detail += std::string(r.what) + " " + fmt("%.4f", r.got) + " vs " + fmt("%.2f", r.want) + (ok ? "" : " (off)") + "; ";
    }
    return o;
}

// ---------------- 2 ----------------

Outcome combination_count() {
    const auto c = combinatorics::assortment_count(100, 20);
    mpz_class ref;
    mpz_bin_uiui(ref.get_mpz_t(), 119, 20);
    const bool exact = c.to_string() == ref.get_str();
    const double rel = std::abs(c.to_double() - 2.5e22) / 2.5e22;
    return {exact && rel <= 0.05, "C(119,20) = " + c.to_string() + ", GMP " + (exact ? "agrees" : "disagrees") +
                                      ", " + fmt("%.2f%%", 100 * rel) + " from 2.5e22"};
}

// ---------------- 3 and 4 ----------------

struct BenchRun {
    benchmark::BenchmarkReport report;
    double seconds = 0;
};

const benchmark::PolicyResult& find(const std::vector<benchmark::PolicyResult>& v, const std::string& name) {
    for (const auto& p : v) {
        if (p.name == name) return p;
    }
    throw std::runtime_error("missing result " + name);
}

Outcome offline_ordering(const BenchRun& run) {
    const auto& pol = run.report.policies;
    const auto& full = find(pol, "full");
    const auto& eps = find(pol, "eps");
    const auto& gen = find(pol, "genetic");
    const auto& dp = find(pol, "dp");
    const auto& lp = find(pol, "lp");
    int wins = 0, n = 0;
    for (std::size_t i = 0; i < full.per_seed.size(); ++i) {
        if (!std::isfinite(full.per_seed[i]) || !std::isfinite(eps.per_seed[i])) continue;
        ++n;
        wins += full.per_seed[i] > eps.per_seed[i];
    }
    const bool share = n > 0 && wins >= 0.8 * static_cast<double>(full.per_seed.size());
    const bool chain = full.mean > gen.mean && gen.mean > eps.mean;
    const bool dp_below = dp.mean < eps.mean;
    const bool lp_below = lp.mean < eps.mean;
    std::ostringstream d;
    d << "full>eps in " << wins << "/" << full.per_seed.size() << " seeds; means full " << fmt("%.3f", full.mean)
      << " genetic " << fmt("%.3f", gen.mean) << " eps " << fmt("%.3f", eps.mean) << " dp " << fmt("%.3f", dp.mean)
      << " lp " << fmt("%.3f", lp.mean);
    if (!chain) d << "; full>genetic>eps violated";
    if (!dp_below) d << "; dp not below eps";
    if (!lp_below) d << "; lp not below eps";
    d << "; benchmark " << fmt("%.0f", run.seconds) << " s";
    return {share && chain && dp_below && lp_below && run.seconds < 15 * 60, d.str()};
}

Outcome ablation_structure(const BenchRun& run) {
    const auto& ab = run.report.ablations;
    const double full = find(ab, "clusters+rbp+search").mean;
    const double no_cluster = find(ab, "global+rbp+search").mean;
    const double no_rbp = find(ab, "clusters+ls+search").mean;
    const double no_search = find(ab, "clusters+rbp+greedy").mean;
    const bool search_largest = full - no_search > full - no_cluster && full - no_search > full - no_rbp;
    bool full_max = true;
    std::string best = "clusters+rbp+search";
    double best_v = full;
    for (const auto& a : ab) {
        if (a.name != "clusters+rbp+search" && !(a.mean < full)) full_max = false;
        if (a.mean > best_v) {
            best_v = a.mean;
            best = a.name;
        }
    }
    std::ostringstream d;
    d << "drops: search " << fmt("%.3f", full - no_search) << ", clustering " << fmt("%.3f", full - no_cluster)
      << ", rbp " << fmt("%.3f", full - no_rbp) << "; best cell " << best << " " << fmt("%.3f", best_v);
    return {search_largest && full_max && run.seconds < 30 * 60, d.str()};
}

// ---------------- 5 ----------------

reward::SamplerConfig toy_sampler(std::uint64_t seed) {
    reward::SamplerConfig s;
    s.chains = 2;
    s.draws = 500;
    s.warmup = 500;
    s.seed = seed;
    return s;
}

Outcome toy_experiment(std::vector<std::string>& info) {
    const int reps = 50;
    // (a) outliers
    int rbp_wins = 0;
    for (int r = 0; r < reps; ++r) {
        toy::Config c;
        c.outlier_frac = 0.1;
        const auto d = toy::generate(c, 1000 + static_cast<std::uint64_t>(r));
        const auto post = reward::fit_rbp(d.sales, d.clusters, {}, toy_sampler(static_cast<std::uint64_t>(r)));
        const auto ls = reward::least_squares_fit(d.sales, [](const ingest::SalesRecord& x) { return x.store_id; });
        double e_rbp = 0, e_ls = 0;
        for (const auto& [s, b] : d.beta) {
            e_rbp += std::abs(post.mean(*post.store_coef_param("P1", s)) - b);
            e_ls += std::abs(*ls.get("P1", s) - b);
        }
        rbp_wins += e_rbp < e_ls;
    }
    const bool a_ok = rbp_wins >= 0.9 * reps;

    // (b) one unusual store among 20 pooled ones
    const std::vector<int> sizes{50, 150, 500};
    const int b_reps = 20;
    std::vector<double> err_rbp(sizes.size()), err_pool(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        for (int r = 0; r < b_reps; ++r) {
            toy::Config c;
            c.clusters = 1;
            c.stores_per_cluster = 20;
            c.n_per_store = 200;
            c.store_factor[0] = 1.5;
            c.n_override[0] = sizes[i];
            const auto d = toy::generate(c, 2000 + static_cast<std::uint64_t>(r));
            const auto post = reward::fit_rbp(d.sales, d.clusters, {}, toy_sampler(static_cast<std::uint64_t>(r)));
            const auto pooled = reward::least_squares_fit(d.sales, [](const ingest::SalesRecord&) { return std::string("all"); });
            const StoreId target = toy::store_name(0);
            const double truth = d.beta.at(target);
            err_rbp[i] += std::abs(post.mean(*post.store_coef_param("P1", target)) - truth) / b_reps;
            err_pool[i] += std::abs(*pooled.get("P1", "all") - truth) / b_reps;
        }
    }
    const bool rbp_falls = err_rbp[0] > err_rbp[1] && err_rbp[1] > err_rbp[2];
    // plateau: the pooled error keeps at least half its size from n=50 to n=500
    const bool pool_flat = err_pool[2] >= 0.5 * err_pool[0];
    const bool b_ok = rbp_falls && pool_flat;

    // (c) predictive sd at the shelf capacity used elsewhere (8 facings)
    auto sd_drop = [&](int q) {
        int dec = 0;
        for (int r = 0; r < reps; ++r) {
            double sd[2];
            for (int i = 0; i < 2; ++i) {
                toy::Config c;
                c.n_per_store = i ? 500 : 50;
                const auto d = toy::generate(c, 5000 + static_cast<std::uint64_t>(r));
                const auto post = reward::fit_rbp(d.sales, d.clusters, {}, toy_sampler(static_cast<std::uint64_t>(r)));
                sd[i] = reward::posterior_predictive(post, "P1", toy::store_name(0), q, 1).sd;
            }
            dec += sd[1] < sd[0];
        }
        return dec;
    };
    const int dec8 = sd_drop(8);
    const bool c_ok = dec8 >= 0.9 * reps;
    for (int q : {1, 3}) {
        info.push_back("5c info: predictive sd falls n=50->500 at quantity " + std::to_string(q) + " in " +
                       std::to_string(sd_drop(q)) + "/50");
    }

    std::ostringstream d;
    d << "(a) rbp beats LS in " << rbp_wins << "/50; (b) rbp error";
    for (double e : err_rbp) d << " " << fmt("%.3f", e);
    d << ", pooled LS";
    for (double e : err_pool) d << " " << fmt("%.3f", e);
    d << "; (c) q=8 sd falls in " << dec8 << "/50";
    return {a_ok && b_ok && c_ok, d.str()};
}

// ---------------- 6 ----------------

Outcome spagmm_properties() {
    int bad = 0;
    std::string first;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto err = fuzz::check_spagmm_instance(60000 + s, 1e-8);
        if (!err.empty()) {
            if (bad++ == 0) first = "seed " + std::to_string(60000 + s) + ": " + err;
        }
    }
    const std::vector<geocluster::Point2> pts{{1.0, 0.0}, {0.0, 1.0}};
    const std::vector<double> resp{0.5, 0.5};
    const auto c = geocluster::map_covariance_update(pts, {0.0, 0.0}, resp, 1);
    const double dev = std::max({std::abs(c.xx - 1.0 / 6.0), std::abs(c.yy - 1.0 / 6.0), std::abs(c.xy)});
    const bool ok = bad == 0 && dev <= 1e-12;
    return {ok, std::to_string(100 - bad) + "/100 instances monotone and SPD; single-store example deviation " +
                    fmt("%.1e", dev) + (first.empty() ? "" : "; first failure " + first)};
}

// ---------------- 7 ----------------

Outcome search_fuzz() {
    int bad = 0;
    std::string first;
    for (std::uint64_t s = 0; s < 10000; ++s) {
        const auto err = fuzz::check_search_instance(70000 + s);
        if (!err.empty() && bad++ == 0) first = "seed " + std::to_string(70000 + s) + ": " + err;
    }
    return {bad == 0, std::to_string(10000 - bad) + "/10000 instances clean" + (first.empty() ? "" : "; " + first)};
}

// ---------------- 8 ----------------

candidates::CoOccurrenceGraph graph_from_mask(int n, unsigned mask, Rng& rng) {
    candidates::CoOccurrenceGraph g;
    for (int i = 0; i < n; ++i) g.nodes.insert(gen::product(i));
    int bit = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j, ++bit) {
            if (!(mask >> bit & 1u)) continue;
            const long long w = gen::int_in(rng, 1, 5);
            g.adjacency[gen::product(i)][gen::product(j)] = w;
            g.adjacency[gen::product(j)][gen::product(i)] = w;
        }
    }
    return g;
}

Outcome sampler_exactness() {
    const int trials = 10000;
    Rng rng(8080);
    std::vector<candidates::CoOccurrenceGraph> graphs;
    // every edge pattern on 2 to 4 nodes, a random sample of patterns on 5 and 6
    for (int n = 2; n <= 4; ++n) {
        const unsigned patterns = 1u << (n * (n - 1) / 2);
        for (unsigned m = 0; m < patterns; ++m) graphs.push_back(graph_from_mask(n, m, rng));
    }
    for (int n = 5; n <= 6; ++n) {
        for (int i = 0; i < 60; ++i) {
            graphs.push_back(graph_from_mask(n, static_cast<unsigned>(rng() & ((1u << (n * (n - 1) / 2)) - 1)), rng));
        }
    }
    long long comparisons = 0, exceed = 0, exact_fail = 0;
    double max_z = 0;
    for (const auto& g : graphs) {
        const int n = static_cast<int>(g.nodes.size());
        std::set<ProductId> seed;
        const int k = gen::int_in(rng, 1, std::min(3, n - 1));
        while (static_cast<int>(seed.size()) < k) seed.insert(gen::product(gen::int_in(rng, 0, n - 1)));
        const int tau = gen::int_in(rng, 1, 3);
        const auto exact = oracle::marginal_inclusion(g, seed, tau);
        std::map<ProductId, int> hits;
        for (int t = 0; t < trials; ++t) {
            for (const auto& v : candidates::sample_candidates(g, seed, tau, rng).votes) ++hits[v.product_id];
        }
        for (const auto& p : g.nodes) {
            const double q = exact.count(p) ? exact.at(p) : 0.0;
            const double f = hits.count(p) ? hits.at(p) / static_cast<double>(trials) : 0.0;
            ++comparisons;
            if (q < 1e-12 || q > 1 - 1e-12) {
                exact_fail += std::abs(f - std::round(q)) > 0;
                continue;
            }
            const double z = std::abs(f - q) / std::sqrt(q * (1 - q) / trials);
            max_z = std::max(max_z, z);
            exceed += z > 3.0;
        }
    }
    // with this many probabilities some 3-sigma excursions are expected; allow what the
    // nominal two-sided 0.27% rate explains at the 99.9% level
    const boost::math::binomial_distribution<double> nominal(static_cast<double>(comparisons), 0.0027);
    const auto allowed = static_cast<long long>(boost::math::quantile(nominal, 0.999));
    std::ostringstream d;
    d << graphs.size() << " graphs, " << comparisons << " inclusion probabilities; " << exceed
      << " beyond 3 sigma (allowed " << allowed << "), max |z| " << fmt("%.2f", max_z) << "; " << exact_fail
      << " deterministic mismatches";
    return {exceed <= allowed && exact_fail == 0, d.str()};
}

// ---------------- 9 ----------------

Outcome replay_calibration() {
    const int events = 50000, K = 8;
    Rng rng(9090);
    std::vector<double> mu(K);
    for (auto& m : mu) m = gen::real_in(rng, 1.0, 6.0);
    std::vector<evaluation::LoggedInteraction> logs;
    for (int i = 0; i < events; ++i) {
        const int a = static_cast<int>(uniform_index(rng, K));
        evaluation::LoggedInteraction e;
        e.display_id = "D" + std::to_string(i % 100);
        e.offered_state = {e.display_id, "S1", {{gen::product(0), 1}}, 1};
        e.chosen = {{gen::product(a), 1}};
        e.reward = gamma_draw(rng, 4.0, 4.0 / mu[a]);  // mean mu[a]
        logs.push_back(std::move(e));
    }
    const int target = 3;
    const evaluation::Policy fixed = [target](const evaluation::LoggedInteraction&, Rng&) {
        return Assignment{{gen::product(target), 1}};
    };
    const auto r = evaluation::replay_evaluate(fixed, logs, 1.0, {}, 1);
    const double se = r.std_reward / std::sqrt(static_cast<double>(r.matched_count));
    const double z = std::abs(r.mean_reward - mu[target]) / se;
    const bool replay_ok = r.defined && z <= 3.0;

    int rejections = 0;
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<evaluation::PanelRow> panel;
        for (int u = 0; u < 20; ++u) {
            const auto g = u < 10 ? evaluation::Group::Treat : evaluation::Group::Control;
            const double base = 5.0 + standard_normal(rng);
            const std::string id = "U" + std::to_string(u);
            panel.push_back({id, g, evaluation::Period::Pre, base + standard_normal(rng)});
            panel.push_back({id, g, evaluation::Period::Post, base + standard_normal(rng)});
        }
        rejections += evaluation::permutation_test(panel, 999, 500 + static_cast<std::uint64_t>(rep)).p_value < 0.05;
    }
    const double frac = rejections / 200.0;
    const bool null_ok = frac >= 0.01 && frac <= 0.10;
    std::ostringstream d;
    d << "credited " << fmt("%.4f", r.mean_reward) << " vs true " << fmt("%.4f", mu[target]) << " (|z| "
      << fmt("%.2f", z) << ", " << r.matched_count << " matches); null rejections " << rejections << "/200";
    return {replay_ok && null_ok, d.str()};
}

// ---------------- 10 ----------------

int run(const std::string& cmd) {
    const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) { return ingest::read_text_file(p.string()); }

Outcome cli_determinism(const std::string& binary, const fs::path& work) {
    std::ostringstream d;
    bool ok = true;
    if (binary.empty()) {
        ok = false;
        d << "no CLI binary supplied; ";
    } else {
        fs::remove_all(work);
        fs::create_directories(work);
        const std::string bin = "\"" + binary + "\" --jobs 1 --out ";
        auto dir = [&](const std::string& n) { return "\"" + (work / n).string() + "\""; };
        auto in = [&](const std::string& n) { return "\"" + (work / n).string() + "\""; };
        const std::vector<std::pair<std::string, std::string>> steps{
            {"sim", "simulate --seed 3"},
            {"ing", "ingest --scans " + in("sim/scans.csv") + " --depth 12"},
            {"cl", "cluster --stores " + in("sim/stores.csv") + " --tracts " + in("sim/tracts.csv") + " --k 3"},
            {"fit", "fit-rbp --sales " + in("ing/sales.csv") + " --clusters " + in("cl/clusters.csv") +
                        " --chains 2 --draws 200 --warmup 200"},
            {"cand", "candidates --states " + in("sim/states.csv") + " --catalog " + in("sim/catalog.csv")},
            {"rec", "recommend --state " + in("sim/displays/D000.json") + " --posterior " + in("fit/posterior.json") +
                        " --candidates " + in("cand/candidates.csv") + " --catalog " + in("sim/catalog.csv")},
            {"rep", "replay --logs " + in("sim/eval_logs.csv") + " --policy full --posterior " + in("fit/posterior.json") +
                        " --candidates " + in("cand/candidates.csv")},
            {"did", "did --means 5.82,6.77,5.40,4.40 --permutations 1000"},
            {"bench", "bench --seeds 2 --policies full,eps"},
        };
        int identical = 0;
        for (const auto& [name, args] : steps) {
            if (run(bin + dir(name) + " " + args) != 0) {
                ok = false;
                d << name << " failed; ";
                continue;
            }
            const fs::path first = work / name, again = work / ("re_" + name);
            const int rc = run(bin + dir("re_" + name) + " --from-manifest " + in(name + "/manifest.json"));
            bool same = rc == 0;
            const auto manifest = nlohmann::json::parse(slurp(first / "manifest.json"));
            for (const auto& [file, digest] : manifest.at("outputs").items()) {
                if (!fs::exists(again / file) || slurp(first / file) != slurp(again / file)) same = false;
            }
            if (same) ++identical;
            else {
                ok = false;
                d << name << " rerun differs; ";
            }
        }
        d << identical << "/" << steps.size() << " subcommands byte-identical on rerun; ";
    }

    int bad = 0;
    std::string first;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        const auto err = fuzz::check_persist_instance(100000 + s);
        if (!err.empty() && bad++ == 0) first = "seed " + std::to_string(100000 + s) + ": " + err;
    }
    d << (1000 - bad) << "/1000 persisted states round-trip" << (first.empty() ? "" : "; " + first);
    return {ok && bad == 0, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
    const std::string binary = argc > 1 ? argv[1] : "";
    const fs::path work = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "shelfrec_acceptance";
    int failures = 0;
    std::vector<std::string> info;

    auto report = [&](int id, double budget_s, const std::function<Outcome()>& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (budget_s > 0 && secs > budget_s) {
            o.pass = false;
            o.detail += "; over the " + fmt("%.0f", budget_s) + " s budget";
        }
        failures += !o.pass;
        std::printf("CRITERION %d %s: %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
        for (const auto& line : info) std::printf("  %s\n", line.c_str());
        info.clear();
        std::fflush(stdout);
    };

    report(1, 1, did_arithmetic);
    report(2, 1, combination_count);

    BenchRun bench;
    {
        benchmark::BenchConfig cfg;  // default world, 30 seeds
        cfg.ablations = true;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            bench.report = benchmark::run_benchmark(cfg);
        } catch (const std::exception& e) {
            std::printf("benchmark failed: %s\n", e.what());
        }
        bench.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    report(3, 0, [&] { return offline_ordering(bench); });
    report(4, 0, [&] { return ablation_structure(bench); });
    report(5, 600, [&] { return toy_experiment(info); });
    report(6, 120, spagmm_properties);
    report(7, 120, search_fuzz);
    report(8, 120, sampler_exactness);
    report(9, 300, replay_calibration);
    report(10, 120, [&] { return cli_determinism(binary, work); });

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
