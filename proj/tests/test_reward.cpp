#include <doctest.h>

#include <cmath>

#include <omp.h>

#include "shelfrec/reward.hpp"
#include "toy.hpp"

using namespace shelfrec;
using namespace shelfrec::reward;

TEST_SUITE_BEGIN("reward");

namespace {

// One product, one store in cluster 0, constant draws.
RbpPosterior constant_posterior(double beta, double scale, double sigma, int draws = 400) {
    RbpPosterior p;
    p.products = {"P1"};
    p.stores = {"S1"};
    p.store_cluster = {0};
    p.cluster_coefs = {{0, 0}};
    p.store_coefs = {{0, 0, 0}};
    p.n_draws = draws;
    p.chains.assign(2, {});
    for (auto& c : p.chains) {
        for (int d = 0; d < draws; ++d) c.insert(c.end(), {beta, beta, scale, sigma});
    }
    return p;
}

std::vector<std::vector<double>> iid_chains(int m, int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> out(static_cast<std::size_t>(m));
    for (auto& c : out) {
        for (int i = 0; i < n; ++i) c.push_back(standard_normal(rng));
    }
    return out;
}

SamplerConfig quick_sampler(std::uint64_t seed) {
    SamplerConfig s;
    s.chains = 2;
    s.draws = 500;
    s.warmup = 500;
    s.seed = seed;
    return s;
}

}  // namespace

TEST_CASE("log densities against reference values") {
    // reference values from an independent statistics package
    CHECK(log_folded_normal(1.3, 0.5, 2.0) == doctest::Approx(-1.1482931097864397));
    CHECK(log_folded_normal(0.7, 0.0, 1.0) == doctest::Approx(-0.4707913526447274));
    CHECK(log_truncated_laplace(0.9, 1.2, 0.4) == doctest::Approx(-0.5016478304488705));
    CHECK(log_truncated_laplace(0.3, 0.1, 0.5) == doctest::Approx(0.12655768717627303));
    CHECK(log_gamma_mean_sd(5.1, 6.0, 2.0) == doctest::Approx(-1.5714926119295296));
    CHECK(std::isinf(log_folded_normal(-0.1, 0.0, 1.0)));
    const auto g = gamma_from_mean_sd(6.0, 2.0);
    CHECK(g.shape == doctest::Approx(9.0));
    CHECK(g.rate == doctest::Approx(1.5));
}

TEST_CASE("pepf arithmetic") {
    PredictiveSummary s;
    s.mean = 2.0;
    s.sd = 0.5;
    CHECK(pepf(s, 1.0).pepf == doctest::Approx(1.5));
    CHECK(pepf(s, 0.0).pepf == 2.0);
    CHECK(pepf(s, 2.0).pepf == doctest::Approx(1.0));
    CHECK_THROWS_AS(pepf(s, -1.0), ArgumentError);
}

TEST_CASE("R-hat and ESS oracles") {
    const double r = split_rhat(iid_chains(4, 1000, 1));
    CHECK(r >= 1.0 - 1e-3);
    CHECK(r <= 1.02);

    const std::vector<std::vector<double>> stuck{std::vector<double>(100, 1.0), std::vector<double>(100, 2.0)};
    CHECK(std::isinf(split_rhat(stuck)));

    const double ess = effective_sample_size(iid_chains(4, 1000, 2));
    CHECK(ess == doctest::Approx(4000.0).epsilon(0.2));

    // AR(1) with phi = 0.8 has ESS about N (1 - phi) / (1 + phi)
    Rng rng(3);
    std::vector<std::vector<double>> ar(4);
    for (auto& c : ar) {
        double x = 0;
        for (int i = 0; i < 5000; ++i) {
            x = 0.8 * x + std::sqrt(1 - 0.64) * standard_normal(rng);
            c.push_back(x);
        }
    }
    CHECK(effective_sample_size(ar) == doctest::Approx(20000.0 * 0.2 / 1.8).epsilon(0.2));
    CHECK(std::isnan(split_rhat({{1.0, 2.0}})));
}

TEST_CASE("degenerate posterior predictive") {
    const auto post = constant_posterior(2.0, 0.1, 1e-6);
    const auto s = posterior_predictive(post, "P1", "S1", 3, 7);
    CHECK(s.mean == doctest::Approx(6.0).epsilon(1e-4));
    CHECK(s.sd < 1e-4);
    CHECK(s.source == PredictionSource::Store);
    const auto d = posterior_predictive(post, "P1", "S1", 6, 7);
    CHECK(d.mean == doctest::Approx(2 * s.mean).epsilon(1e-4));
    CHECK_THROWS_AS(posterior_predictive(post, "P9", "S1", 1, 7), ArgumentError);
    CHECK_THROWS_AS(posterior_predictive(post, "P1", "S1", 0, 7), ArgumentError);
}

TEST_CASE("scorer falls back from store to cluster to prior") {
    const auto post = constant_posterior(2.0, 1e-6, 1e-6);
    const PepfScorer on_cluster(post, 1.0, 1, 0);
    const auto c = on_cluster.score("P1", "S_new", 1);
    CHECK(c.mean_payoff == doctest::Approx(2.0).epsilon(1e-3));

    const auto cp = posterior_predictive(post, "P1", "S_new", 1, 1);
    CHECK(cp.source == PredictionSource::Prior);
    const auto cc = posterior_predictive(post, "P1", "S_new", 1, 1, 0);
    CHECK(cc.source == PredictionSource::Cluster);

    const PepfScorer plain(post, 1.0, 1);
    const auto unknown = plain.score("P_unseen", "S1", 1);
    CHECK(unknown.sd_payoff > 0.5);  // prior predictive is wide
    CHECK(plain.score("P1", "S1", 2) == plain.score("P1", "S1", 2));
}

TEST_CASE("least squares through the origin") {
    std::vector<ingest::SalesRecord> recs(3);
    recs[0] = {"S1", "D1", "P", {}, 48, 1, 2.0, false};
    recs[1] = {"S1", "D1", "P", {}, 48, 2, 5.0, false};
    recs[2] = {"S2", "D2", "P", {}, 48, 1, 7.0, false};
    const auto by_store = least_squares_fit(recs, [](const ingest::SalesRecord& r) { return r.store_id; });
    CHECK(*by_store.get("P", "S1") == doctest::Approx(12.0 / 5.0));
    CHECK(*by_store.get("P", "S2") == 7.0);
    CHECK_FALSE(by_store.get("P", "S3").has_value());
    CHECK_FALSE(by_store.get("Q", "S1").has_value());
}

TEST_CASE("fit excludes zeros and omits all-zero products") {
    toy::Config c;
    c.clusters = 1;
    c.stores_per_cluster = 2;
    c.n_per_store = 20;
    auto d = toy::generate(c, 4);
    auto zero = d.sales.front();
    zero.units_sold = 0.0;
    d.sales.push_back(zero);
    zero.product_id = "P_dead";
    d.sales.push_back(zero);
    const auto post = fit_rbp(d.sales, d.clusters, {}, quick_sampler(1));
    CHECK(post.excluded_zero_records == 2);
    CHECK(post.omitted_products == std::vector<ProductId>{"P_dead"});
    CHECK(post.n_chains() == 2);
    CHECK(post.chains[0].size() == post.n_params() * 500);
    CHECK(fit_rbp(d.sales, d.clusters, {}, quick_sampler(1)) == post);
}

TEST_CASE("chains do not depend on the thread count") {
    toy::Config c;
    c.clusters = 2;
    c.stores_per_cluster = 2;
    c.n_per_store = 20;
    const auto d = toy::generate(c, 8);
    auto s = quick_sampler(5);
    s.chains = 4;
    const int before = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto one = fit_rbp(d.sales, d.clusters, {}, s);
    omp_set_num_threads(3);
    const auto three = fit_rbp(d.sales, d.clusters, {}, s);
    omp_set_num_threads(before);
    CHECK(one == three);
}

TEST_CASE("sampler and hyperparameter validation") {
    SamplerConfig s;
    s.chains = 0;
    CHECK_THROWS_AS(s.validate(), ArgumentError);
    RbpHyperParams h;
    h.sigma1 = 0.0;
    CHECK_THROWS_AS(h.validate(), ArgumentError);
}

TEST_CASE("credible interval calibration on the generative model") {
    int covered = 0;
    const int reps = 50;
    for (int r = 0; r < reps; ++r) {
        toy::Config c;
        c.clusters = 1;
        c.stores_per_cluster = 1;
        c.n_per_store = 500;
        c.store_factor[0] = 1.0;
        c.beta_lo = c.beta_hi = 2.0;
        const auto d = toy::generate(c, 100 + static_cast<std::uint64_t>(r));
        const auto post = fit_rbp(d.sales, d.clusters, {}, quick_sampler(static_cast<std::uint64_t>(r)));
        const auto ci = post.credible_interval(*post.store_coef_param("P1", toy::store_name(0)), 0.9);
        covered += ci.first <= 2.0 && 2.0 <= ci.second;
    }
    CHECK(covered >= 40);
}

TEST_CASE("single store in its own cluster agrees with its cluster") {
    toy::Config c;
    c.clusters = 2;
    c.stores_per_cluster = 1;
    c.n_per_store = 200;
    const auto d = toy::generate(c, 9);
    const auto post = fit_rbp(d.sales, d.clusters, {}, quick_sampler(3));
    for (int s = 0; s < 2; ++s) {
        const auto sp = *post.store_coef_param("P1", toy::store_name(s));
        const auto cp = *post.cluster_coef_param("P1", s);
        CHECK(std::abs(post.mean(sp) - post.mean(cp)) <= std::max(post.sd(sp), post.sd(cp)));
    }
}

TEST_CASE("outliers hurt least squares more than the hierarchical fit") {
    toy::Config c;
    c.outlier_frac = 0.1;
    const auto d = toy::generate(c, 12);
    const auto post = fit_rbp(d.sales, d.clusters, {}, quick_sampler(12));
    const auto ls = least_squares_fit(d.sales, [](const ingest::SalesRecord& r) { return r.store_id; });
    double e_rbp = 0, e_ls = 0;
    for (const auto& [s, b] : d.beta) {
        e_rbp += std::abs(post.mean(*post.store_coef_param("P1", s)) - b);
        e_ls += std::abs(*ls.get("P1", s) - b);
    }
    CHECK(e_rbp < e_ls);
}

TEST_CASE("posterior json round trip") {
    toy::Config c;
    c.n_per_store = 10;
    const auto d = toy::generate(c, 2);
    auto s = quick_sampler(5);
    s.draws = 50;
    s.warmup = 50;
    const auto post = fit_rbp(d.sales, d.clusters, {}, s);
    const auto text = posterior_to_json(post);
    const auto back = posterior_from_json(text);
    CHECK(back == post);
    CHECK(posterior_to_json(back) == text);
}

TEST_SUITE_END();
