#include "shelfrec/reward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <json.hpp>

namespace shelfrec::reward {

using nlohmann::json;

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;

double lgamma_safe(double x) {
    int sign = 0;
    return ::lgamma_r(x, &sign);
}

double draw_folded_normal(Rng& rng, double mu, double sigma) {
    return std::abs(mu + sigma * standard_normal(rng));
}

double draw_truncated_laplace(Rng& rng, double loc, double scale) {
    for (int tries = 0; tries < 1000; ++tries) {
        const double x = laplace_draw(rng, loc, scale);
        if (x > 0.0) return x;
    }
    return std::max(loc, std::numeric_limits<double>::min());
}

double draw_reward(Rng& rng, double mean, double sd) {
    if (!(mean > 0.0)) return 0.0;
    if (sd <= 1e-12 * mean) return mean;
    const auto g = gamma_from_mean_sd(mean, sd);
    return gamma_draw(rng, g.shape, g.rate);
}

}  // namespace

void RbpHyperParams::validate() const {
    if (!(sigma0 > 0.0 && sigma1 > 0.0 && sigma2 > 0.0)) throw ArgumentError("RBP prior scales must be positive");
    if (mu0 < 0.0 || mu1 < 0.0 || mu2 < 0.0) throw ArgumentError("RBP prior locations must be non-negative");
}

void SamplerConfig::validate() const {
    if (chains < 1) throw ArgumentError("sampler: chains must be >= 1");
    if (draws < 1) throw ArgumentError("sampler: draws must be >= 1");
    if (warmup < 0) throw ArgumentError("sampler: warmup must be >= 0");
    if (!(initial_step > 0.0)) throw ArgumentError("sampler: initial_step must be positive");
    if (adapt_batch < 1) throw ArgumentError("sampler: adapt_batch must be >= 1");
}

GammaParams gamma_from_mean_sd(double mean, double sd) {
    if (!(mean > 0.0) || !(sd > 0.0)) throw ArgumentError("gamma_from_mean_sd: mean and sd must be positive");
    const double v = sd * sd;
    return {mean * mean / v, mean / v};
}

double log_folded_normal(double x, double mu, double sigma) {
    if (x < 0.0) return -std::numeric_limits<double>::infinity();
    const double z = (x - mu) / sigma;
    return -0.5 * z * z + std::log1p(std::exp(-2.0 * x * mu / (sigma * sigma))) - std::log(sigma) - kHalfLog2Pi;
}

double log_truncated_laplace(double x, double loc, double scale) {
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    return -std::log(2.0 * scale) - std::abs(x - loc) / scale - std::log1p(-0.5 * std::exp(-loc / scale));
}

double log_gamma_mean_sd(double y, double mean, double sd) {
    const auto g = gamma_from_mean_sd(mean, sd);
    return g.shape * std::log(g.rate) - lgamma_safe(g.shape) + (g.shape - 1.0) * std::log(y) - g.rate * y;
}

// ---------------- posterior accessors ----------------

std::optional<std::size_t> RbpPosterior::product_index(const ProductId& p) const {
    auto it = std::lower_bound(products.begin(), products.end(), p);
    if (it == products.end() || *it != p) return std::nullopt;
    return static_cast<std::size_t>(it - products.begin());
}

std::optional<std::size_t> RbpPosterior::store_index(const StoreId& s) const {
    auto it = std::lower_bound(stores.begin(), stores.end(), s);
    if (it == stores.end() || *it != s) return std::nullopt;
    return static_cast<std::size_t>(it - stores.begin());
}

std::optional<std::size_t> RbpPosterior::cluster_coef_param(const ProductId& p, int cluster) const {
    auto pi = product_index(p);
    if (!pi) return std::nullopt;
    const ClusterCoef key{static_cast<int>(*pi), cluster};
    auto it = std::lower_bound(cluster_coefs.begin(), cluster_coefs.end(), key, [](const auto& a, const auto& b) {
        return std::pair(a.product, a.cluster) < std::pair(b.product, b.cluster);
    });
    if (it == cluster_coefs.end() || !(*it == key)) return std::nullopt;
    return static_cast<std::size_t>(it - cluster_coefs.begin());
}

std::optional<std::size_t> RbpPosterior::store_coef_param(const ProductId& p, const StoreId& s) const {
    auto pi = product_index(p);
    auto si = store_index(s);
    if (!pi || !si) return std::nullopt;
    auto it = std::lower_bound(store_coefs.begin(), store_coefs.end(), std::pair(int(*pi), int(*si)),
                               [](const StoreCoef& a, const std::pair<int, int>& b) {
                                   return std::pair(a.product, a.store) < b;
                               });
    if (it == store_coefs.end() || it->product != int(*pi) || it->store != int(*si)) return std::nullopt;
    return store_param(static_cast<std::size_t>(it - store_coefs.begin()));
}

std::string RbpPosterior::param_name(std::size_t p) const {
    const std::size_t C = cluster_coefs.size();
    const std::size_t S = store_coefs.size();
    const std::size_t P = products.size();
    if (p < C) {
        return "beta_cluster[" + products[cluster_coefs[p].product] + "," + std::to_string(cluster_coefs[p].cluster) +
               "]";
    }
    if (p < C + S) {
        const auto& sc = store_coefs[p - C];
        return "beta_store[" + products[sc.product] + "," + stores[sc.store] + "]";
    }
    if (p < C + S + P) return "laplace_scale[" + products[p - C - S] + "]";
    return "sigma_r[" + products[p - C - S - P] + "]";
}

std::vector<double> RbpPosterior::pooled(std::size_t param) const {
    std::vector<double> out;
    out.reserve(n_chains() * n_draws);
    for (std::size_t c = 0; c < n_chains(); ++c) {
        for (int d = 0; d < n_draws; ++d) out.push_back(value(c, d, param));
    }
    return out;
}

double RbpPosterior::mean(std::size_t param) const {
    const auto v = pooled(param);
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double RbpPosterior::sd(std::size_t param) const {
    return summarize(pooled(param)).sd;
}

std::pair<double, double> RbpPosterior::credible_interval(std::size_t param, double mass) const {
    if (!(mass > 0.0 && mass < 1.0)) throw ArgumentError("credible_interval: mass must lie in (0, 1)");
    auto v = pooled(param);
    std::sort(v.begin(), v.end());
    const double lo_q = (1.0 - mass) / 2.0;
    auto at = [&](double q) {
        const double pos = q * static_cast<double>(v.size() - 1);
        const auto i = static_cast<std::size_t>(std::floor(pos));
        const double f = pos - static_cast<double>(i);
        return i + 1 < v.size() ? v[i] * (1.0 - f) + v[i + 1] * f : v[i];
    };
    return {at(lo_q), at(1.0 - lo_q)};
}

// ---------------- sampler ----------------

namespace {

struct Group {
    int store_coef = 0;
    int quantity = 1;
    double n = 0.0;
    double sum_y = 0.0;
    double sum_log_y = 0.0;
};

struct Model {
    RbpHyperParams hp;
    std::size_t C = 0, S = 0, P = 0;
    std::vector<Group> groups;
    std::vector<std::vector<int>> groups_of_store_coef;
    std::vector<std::vector<int>> groups_of_product;
    std::vector<std::vector<int>> members_of_cluster_coef;  // store coefs
    std::vector<std::vector<int>> store_coefs_of_product;
    std::vector<int> product_of_store_coef;
    std::vector<int> cluster_coef_of_store_coef;

    double group_ll(const Group& g, double beta, double sigma) const {
        const double mu = g.quantity * beta;
        const double v = sigma * sigma;
        const double a = mu * mu / v;
        const double r = mu / v;
        return g.n * (a * std::log(r) - lgamma_safe(a)) + (a - 1.0) * g.sum_log_y - r * g.sum_y;
    }

    std::size_t b_index(std::size_t i) const { return C + S + i; }
    std::size_t sigma_index(std::size_t i) const { return C + S + P + i; }

    double local_store(const std::vector<double>& th, std::size_t s, double x) const {
        const int i = product_of_store_coef[s];
        const double sigma = th[sigma_index(i)];
        double lp = log_truncated_laplace(x, th[cluster_coef_of_store_coef[s]], th[b_index(i)]);
        for (int g : groups_of_store_coef[s]) lp += group_ll(groups[g], x, sigma);
        return lp;
    }

    double local_cluster(const std::vector<double>& th, std::size_t c, double x, double b) const {
        double lp = log_folded_normal(x, hp.mu0, hp.sigma0);
        for (int s : members_of_cluster_coef[c]) lp += log_truncated_laplace(th[C + s], x, b);
        return lp;
    }

    double local_scale(const std::vector<double>& th, std::size_t i, double x) const {
        double lp = log_folded_normal(x, hp.mu1, hp.sigma1);
        for (int s : store_coefs_of_product[i]) {
            lp += log_truncated_laplace(th[C + s], th[cluster_coef_of_store_coef[s]], x);
        }
        return lp;
    }

    double local_sigma(const std::vector<double>& th, std::size_t i, double x) const {
        double lp = log_folded_normal(x, hp.mu2, hp.sigma2);
        for (int g : groups_of_product[i]) {
            lp += group_ll(groups[g], th[C + groups[g].store_coef], x);
        }
        return lp;
    }

    double local(const std::vector<double>& th, std::size_t j, double x) const {
        if (j < C) return local_cluster(th, j, x, th[b_index(cluster_product[j])]);
        if (j < C + S) return local_store(th, j - C, x);
        if (j < C + S + P) return local_scale(th, j - C - S, x);
        return local_sigma(th, j - C - S - P, x);
    }

    // Cluster coefficient together with its store coefficients, for the joint rescaling move.
    double local_block(const std::vector<double>& th, std::size_t c) const {
        const double bc = th[c];
        const double b = th[b_index(cluster_product[c])];
        double lp = log_folded_normal(bc, hp.mu0, hp.sigma0);
        for (int s : members_of_cluster_coef[c]) {
            const double bs = th[C + s];
            const double sigma = th[sigma_index(product_of_store_coef[s])];
            lp += log_truncated_laplace(bs, bc, b);
            for (int g : groups_of_store_coef[s]) lp += group_ll(groups[g], bs, sigma);
        }
        return lp;
    }

    // Laplace scale with every store coefficient of the product, for the joint deviation move.
    double local_spread(const std::vector<double>& th, std::size_t i) const {
        const double b = th[b_index(i)];
        const double sigma = th[sigma_index(i)];
        double lp = log_folded_normal(b, hp.mu1, hp.sigma1);
        for (int s : store_coefs_of_product[i]) {
            const double bs = th[C + s];
            lp += log_truncated_laplace(bs, th[cluster_coef_of_store_coef[s]], b);
            for (int g : groups_of_store_coef[s]) lp += group_ll(groups[g], bs, sigma);
        }
        return lp;
    }

    std::vector<int> cluster_product;
};

void run_chain(const Model& m, const SamplerConfig& cfg, std::size_t chain, const std::vector<double>& init_center,
               std::vector<double>& out) {
    Rng rng(mix_seed(cfg.seed, chain));
    const std::size_t N = init_center.size();
    std::vector<double> th(N);
    for (std::size_t j = 0; j < N; ++j) th[j] = init_center[j] * std::exp(0.3 * standard_normal(rng));
    std::vector<double> step(N, cfg.initial_step);
    std::vector<int> accepted(N, 0);
    std::vector<double> block_step(m.C, cfg.initial_step);
    std::vector<int> block_accepted(m.C, 0);
    std::vector<double> spread_step(m.P, cfg.initial_step);
    std::vector<int> spread_accepted(m.P, 0);
    std::vector<double> saved;

    out.assign(static_cast<std::size_t>(cfg.draws) * N, 0.0);
    const int total = cfg.warmup + cfg.draws;
    int batch = 0;
    for (int it = 0; it < total; ++it) {
        for (std::size_t j = 0; j < N; ++j) {
            const double x = th[j];
            const double y = x * std::exp(step[j] * standard_normal(rng));
            const double cur = m.local(th, j, x);
            const double prop = m.local(th, j, y);
            // log-scale random walk: Jacobian contributes log(y) - log(x)
            const double log_ratio = prop - cur + std::log(y) - std::log(x);
            if (std::isfinite(prop) && std::log(uniform01(rng)) < log_ratio) {
                th[j] = y;
                ++accepted[j];
            }
        }
        // scale a cluster coefficient and its store coefficients by one common factor
        for (std::size_t c = 0; c < m.C; ++c) {
            const auto& members = m.members_of_cluster_coef[c];
            const double cur = m.local_block(th, c);
            const double f = std::exp(block_step[c] * standard_normal(rng));
            saved.assign({th[c]});
            th[c] *= f;
            for (int s : members) {
                saved.push_back(th[m.C + s]);
                th[m.C + s] *= f;
            }
            const double prop = m.local_block(th, c);
            const double log_ratio = prop - cur + static_cast<double>(members.size() + 1) * std::log(f);
            if (std::isfinite(prop) && std::log(uniform01(rng)) < log_ratio) {
                ++block_accepted[c];
            } else {
                th[c] = saved[0];
                for (std::size_t k = 0; k < members.size(); ++k) th[m.C + members[k]] = saved[k + 1];
            }
        }
        // scale the Laplace scale and each store deviation from its cluster coefficient together
        for (std::size_t i = 0; i < m.P; ++i) {
            const auto& members = m.store_coefs_of_product[i];
            const std::size_t bj = m.b_index(i);
            const double cur = m.local_spread(th, i);
            const double f = std::exp(spread_step[i] * standard_normal(rng));
            saved.assign({th[bj]});
            th[bj] *= f;
            bool positive = true;
            for (int s : members) {
                const double bc = th[m.cluster_coef_of_store_coef[s]];
                saved.push_back(th[m.C + s]);
                th[m.C + s] = bc + f * (th[m.C + s] - bc);
                positive = positive && th[m.C + s] > 0.0;
            }
            const double prop = positive ? m.local_spread(th, i) : -std::numeric_limits<double>::infinity();
            const double log_ratio = prop - cur + static_cast<double>(members.size() + 1) * std::log(f);
            if (std::isfinite(prop) && std::log(uniform01(rng)) < log_ratio) {
                ++spread_accepted[i];
            } else {
                th[bj] = saved[0];
                for (std::size_t k = 0; k < members.size(); ++k) th[m.C + members[k]] = saved[k + 1];
            }
        }
        if (it < cfg.warmup && (it + 1) % cfg.adapt_batch == 0) {
            ++batch;
            const double delta = std::min(0.5, 1.0 / std::sqrt(static_cast<double>(batch)));
            auto adapt = [&](std::vector<double>& steps, std::vector<int>& acc) {
                for (std::size_t j = 0; j < steps.size(); ++j) {
                    const double rate = static_cast<double>(acc[j]) / cfg.adapt_batch;
                    steps[j] *= std::exp(rate > cfg.target_acceptance ? delta : -delta);
                    acc[j] = 0;
                }
            };
            adapt(step, accepted);
            adapt(block_step, block_accepted);
            adapt(spread_step, spread_accepted);
        }
        if (it >= cfg.warmup) {
            std::copy(th.begin(), th.end(), out.begin() + static_cast<std::ptrdiff_t>((it - cfg.warmup) * N));
        }
    }
}

}  // namespace

RbpPosterior fit_rbp(const std::vector<ingest::SalesRecord>& sales, const geocluster::ClusterAssignment& clusters,
                     const RbpHyperParams& hp, const SamplerConfig& sampler) {
    hp.validate();
    sampler.validate();
    RbpPosterior post;
    post.hyper = hp;
    post.seed = sampler.seed;
    post.n_draws = sampler.draws;
    post.warmup = sampler.warmup;

    const auto cmap = clusters.as_map();
    std::set<ProductId> all_products, kept_products;
    std::set<StoreId> kept_stores;
    std::vector<const ingest::SalesRecord*> kept;
    for (const auto& r : sales) {
        all_products.insert(r.product_id);
        if (!(r.units_sold > 0.0)) {
            ++post.excluded_zero_records;
            continue;
        }
        if (r.quantity_faced < 1) throw ArgumentError("fit_rbp: quantity_faced must be >= 1");
        if (!cmap.count(r.store_id)) throw ArgumentError("fit_rbp: store '" + r.store_id + "' has no cluster");
        kept.push_back(&r);
        kept_products.insert(r.product_id);
        kept_stores.insert(r.store_id);
    }
    for (const auto& p : all_products) {
        if (!kept_products.count(p)) post.omitted_products.push_back(p);
    }
    post.products.assign(kept_products.begin(), kept_products.end());
    post.stores.assign(kept_stores.begin(), kept_stores.end());
    for (const auto& s : post.stores) post.store_cluster.push_back(cmap.at(s));

    // group sufficient statistics by (product, store, quantity)
    std::map<std::tuple<int, int, int>, Group> gmap;
    std::set<std::pair<int, int>> pair_set, cc_set;
    for (const auto* r : kept) {
        const int i = static_cast<int>(*post.product_index(r->product_id));
        const int l = static_cast<int>(*post.store_index(r->store_id));
        auto& g = gmap[{i, l, r->quantity_faced}];
        g.quantity = r->quantity_faced;
        g.n += 1.0;
        g.sum_y += r->units_sold;
        g.sum_log_y += std::log(r->units_sold);
        pair_set.insert({i, l});
        cc_set.insert({i, post.store_cluster[l]});
    }
    for (const auto& [i, k] : cc_set) post.cluster_coefs.push_back({i, k});
    for (const auto& [i, l] : pair_set) {
        const int cc = static_cast<int>(*post.cluster_coef_param(post.products[i], post.store_cluster[l]));
        post.store_coefs.push_back({i, l, cc});
    }

    Model m;
    m.hp = hp;
    m.C = post.cluster_coefs.size();
    m.S = post.store_coefs.size();
    m.P = post.products.size();
    m.groups_of_store_coef.resize(m.S);
    m.groups_of_product.resize(m.P);
    m.members_of_cluster_coef.resize(m.C);
    m.store_coefs_of_product.resize(m.P);
    for (const auto& cc : post.cluster_coefs) m.cluster_product.push_back(cc.product);
    for (std::size_t s = 0; s < m.S; ++s) {
        const auto& sc = post.store_coefs[s];
        m.product_of_store_coef.push_back(sc.product);
        m.cluster_coef_of_store_coef.push_back(sc.cluster_coef);
        m.members_of_cluster_coef[sc.cluster_coef].push_back(static_cast<int>(s));
        m.store_coefs_of_product[sc.product].push_back(static_cast<int>(s));
    }
    for (const auto& [key, g] : gmap) {
        const auto [i, l, q] = key;
        Group grp = g;
        const int s = static_cast<int>(*post.store_coef_param(post.products[i], post.stores[l]) - m.C);
        grp.store_coef = s;
        m.groups_of_store_coef[s].push_back(static_cast<int>(m.groups.size()));
        m.groups_of_product[i].push_back(static_cast<int>(m.groups.size()));
        m.groups.push_back(grp);
    }

    // data-driven initial values, jittered per chain
    const std::size_t N = post.n_params();
    std::vector<double> center(N, 1.0);
    {
        std::vector<double> sq(m.S, 0.0), sqy(m.S, 0.0);
        for (const auto& g : m.groups) {
            sq[g.store_coef] += g.n * g.quantity * g.quantity;
            sqy[g.store_coef] += g.quantity * g.sum_y;
        }
        for (std::size_t s = 0; s < m.S; ++s) center[m.C + s] = sqy[s] / sq[s];
        for (std::size_t c = 0; c < m.C; ++c) {
            double acc = 0.0;
            for (int s : m.members_of_cluster_coef[c]) acc += center[m.C + s];
            center[c] = acc / static_cast<double>(m.members_of_cluster_coef[c].size());
        }
        std::vector<double> sum_sq(m.P, 0.0);
        for (const auto* r : kept) sum_sq[*post.product_index(r->product_id)] += r->units_sold * r->units_sold;
        for (std::size_t i = 0; i < m.P; ++i) {
            double n = 0.0, sy = 0.0, beta_acc = 0.0;
            const double syy = sum_sq[i];
            for (int g : m.groups_of_product[i]) {
                n += m.groups[g].n;
                sy += m.groups[g].sum_y;
            }
            for (int s : m.store_coefs_of_product[i]) beta_acc += center[m.C + s];
            const double mean_y = sy / n;
            const double var_y = std::max(syy / n - mean_y * mean_y, 0.0);
            center[m.b_index(i)] = std::max(0.25 * beta_acc / m.store_coefs_of_product[i].size(), 1e-3);
            center[m.sigma_index(i)] = std::max(std::sqrt(var_y), 0.1 * mean_y);
        }
    }

    post.chains.resize(sampler.chains);
    const long long n_chains = sampler.chains;
#pragma omp parallel for schedule(dynamic, 1)
    for (long long c = 0; c < n_chains; ++c) run_chain(m, sampler, static_cast<std::size_t>(c), center, post.chains[c]);

    post.diagnostics = mcmc_diagnostics(post);
    post.convergence_warning = !post.diagnostics.pass;
    return post;
}

// ---------------- prediction ----------------

std::string_view to_string(PredictionSource s) {
    switch (s) {
        case PredictionSource::Store: return "store";
        case PredictionSource::Cluster: return "cluster";
        case PredictionSource::Prior: return "prior";
    }
    return "?";
}

namespace {

std::uint64_t prediction_seed(std::uint64_t seed, const ProductId& p, const StoreId& s, int q) {
    return mix_seed(mix_seed(seed, stable_hash(p)), stable_hash(s) ^ static_cast<std::uint64_t>(q));
}

void finish_summary(PredictiveSummary& out) {
    const double n = static_cast<double>(out.draws.size());
    double s = 0.0;
    for (double v : out.draws) s += v;
    out.mean = s / n;
    double ss = 0.0;
    for (double v : out.draws) ss += (v - out.mean) * (v - out.mean);
    out.sd = out.draws.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

}  // namespace

PredictiveSummary posterior_predictive(const RbpPosterior& post, const ProductId& product, const StoreId& store,
                                       int quantity, std::uint64_t seed, std::optional<int> cluster) {
    if (quantity < 1) throw ArgumentError("posterior_predictive: quantity must be >= 1");
    const auto pi = post.product_index(product);
    if (!pi) throw ArgumentError("posterior_predictive: product '" + product + "' is not in the posterior");
    if (post.n_chains() == 0 || post.n_draws == 0) throw ArgumentError("posterior_predictive: posterior has no draws");

    PredictiveSummary out;
    out.product_id = product;
    out.store_id = store;
    out.quantity = quantity;

    const auto store_param = post.store_coef_param(product, store);
    std::optional<std::size_t> cluster_param;
    if (!store_param) {
        if (!cluster) {
            const auto si = post.store_index(store);
            if (si) cluster = post.store_cluster[*si];
        }
        if (cluster) cluster_param = post.cluster_coef_param(product, *cluster);
    }
    out.source = store_param ? PredictionSource::Store
                             : (cluster_param ? PredictionSource::Cluster : PredictionSource::Prior);

    Rng rng(prediction_seed(seed, product, store, quantity));
    const std::size_t bp = post.scale_param(*pi);
    const std::size_t sp = post.sigma_param(*pi);
    out.draws.reserve(post.n_chains() * post.n_draws);
    for (std::size_t c = 0; c < post.n_chains(); ++c) {
        for (int d = 0; d < post.n_draws; ++d) {
            double beta;
            if (store_param) {
                beta = post.value(c, d, *store_param);
            } else {
                const double bc = cluster_param ? post.value(c, d, *cluster_param)
                                                : draw_folded_normal(rng, post.hyper.mu0, post.hyper.sigma0);
                beta = draw_truncated_laplace(rng, bc, post.value(c, d, bp));
            }
            out.draws.push_back(draw_reward(rng, quantity * beta, post.value(c, d, sp)));
        }
    }
    finish_summary(out);
    return out;
}

PredictiveSummary prior_predictive(const RbpHyperParams& hp, const ProductId& product, const StoreId& store,
                                   int quantity, std::size_t n_draws, std::uint64_t seed) {
    if (quantity < 1) throw ArgumentError("prior_predictive: quantity must be >= 1");
    if (n_draws == 0) throw ArgumentError("prior_predictive: n_draws must be positive");
    PredictiveSummary out;
    out.product_id = product;
    out.store_id = store;
    out.quantity = quantity;
    out.source = PredictionSource::Prior;
    Rng rng(prediction_seed(seed, product, store, quantity));
    for (std::size_t d = 0; d < n_draws; ++d) {
        const double bc = draw_folded_normal(rng, hp.mu0, hp.sigma0);
        const double b = std::max(draw_folded_normal(rng, hp.mu1, hp.sigma1), 1e-12);
        const double beta = draw_truncated_laplace(rng, bc, b);
        const double sigma = draw_folded_normal(rng, hp.mu2, hp.sigma2);
        out.draws.push_back(draw_reward(rng, quantity * beta, sigma));
    }
    finish_summary(out);
    return out;
}

PepfScore pepf(const PredictiveSummary& summary, double lambda) {
    if (!(lambda >= 0.0)) throw ArgumentError("pepf: lambda must be non-negative");
    PepfScore s;
    s.product_id = summary.product_id;
    s.store_id = summary.store_id;
    s.quantity = summary.quantity;
    s.mean_payoff = summary.mean;
    s.sd_payoff = summary.sd;
    s.lambda = lambda;
    s.pepf = summary.mean - lambda * summary.sd;
    return s;
}

PepfScorer::PepfScorer(const RbpPosterior& post, double lambda, std::uint64_t seed, std::optional<int> cluster,
                       std::size_t prior_draws)
    : post_(&post), lambda_(lambda), seed_(seed), cluster_(cluster), prior_draws_(prior_draws) {
    if (!(lambda >= 0.0)) throw ArgumentError("PepfScorer: lambda must be non-negative");
}

PepfScore PepfScorer::score(const ProductId& product, const StoreId& store, int quantity) const {
    if (post_->product_index(product)) {
        return pepf(posterior_predictive(*post_, product, store, quantity, seed_, cluster_), lambda_);
    }
    return pepf(prior_predictive(post_->hyper, product, store, quantity, prior_draws_, seed_), lambda_);
}

// ---------------- point estimates ----------------

std::optional<double> PointEstimates::get(const ProductId& p, const std::string& group) const {
    auto it = beta.find(p);
    if (it == beta.end()) return std::nullopt;
    auto jt = it->second.find(group);
    if (jt == it->second.end()) return std::nullopt;
    return jt->second;
}

PointEstimates least_squares_fit(const std::vector<ingest::SalesRecord>& sales, const GroupFn& group_of) {
    std::map<ProductId, std::map<std::string, std::pair<double, double>>> acc;
    for (const auto& r : sales) {
        auto& a = acc[r.product_id][group_of(r)];
        a.first += r.quantity_faced * r.units_sold;
        a.second += static_cast<double>(r.quantity_faced) * r.quantity_faced;
    }
    PointEstimates out;
    for (const auto& [p, m] : acc) {
        for (const auto& [g, a] : m) {
            if (a.second > 0.0) out.beta[p][g] = a.first / a.second;
        }
    }
    return out;
}

// ---------------- JSON ----------------

namespace {

json num(double v) {
    if (std::isfinite(v)) return v;
    return format_double(v);
}

double num_from(const json& j) {
    if (j.is_string()) return parse_double(j.get<std::string>());
    return j.get<double>();
}

}  // namespace

std::string posterior_to_json(const RbpPosterior& post) {
    json j;
    j["format"] = "shelfrec-posterior";
    j["version"] = 1;
    j["seed"] = post.seed;
    j["warmup"] = post.warmup;
    j["n_draws"] = post.n_draws;
    j["hyper"] = {{"mu0", post.hyper.mu0}, {"sigma0", post.hyper.sigma0}, {"mu1", post.hyper.mu1},
                  {"sigma1", post.hyper.sigma1}, {"mu2", post.hyper.mu2}, {"sigma2", post.hyper.sigma2}};
    j["products"] = post.products;
    j["stores"] = post.stores;
    j["store_cluster"] = post.store_cluster;
    json cc = json::array();
    for (const auto& c : post.cluster_coefs) cc.push_back({c.product, c.cluster});
    j["cluster_coefs"] = cc;
    json sc = json::array();
    for (const auto& s : post.store_coefs) sc.push_back({s.product, s.store, s.cluster_coef});
    j["store_coefs"] = sc;
    json names = json::array();
    for (std::size_t p = 0; p < post.n_params(); ++p) names.push_back(post.param_name(p));
    j["param_names"] = names;
    j["chains"] = post.chains;
    json diag;
    diag["max_rhat"] = num(post.diagnostics.max_rhat);
    diag["min_ess"] = num(post.diagnostics.min_ess);
    diag["rhat_available"] = post.diagnostics.rhat_available;
    diag["rhat_threshold"] = post.diagnostics.rhat_threshold;
    diag["ess_threshold"] = post.diagnostics.ess_threshold;
    diag["pass"] = post.diagnostics.pass;
    json params = json::array();
    for (const auto& p : post.diagnostics.params) params.push_back({{"name", p.name}, {"rhat", num(p.rhat)}, {"ess", num(p.ess)}});
    diag["params"] = params;
    j["diagnostics"] = diag;
    j["convergence_warning"] = post.convergence_warning;
    j["omitted_products"] = post.omitted_products;
    j["excluded_zero_records"] = post.excluded_zero_records;
    return j.dump() + "\n";
}

RbpPosterior posterior_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("posterior JSON: ") + e.what());
    }
    try {
        if (j.at("format") != "shelfrec-posterior") throw ParseError("posterior JSON: unexpected format tag");
        const int version = j.at("version").get<int>();
        if (version != 1) {
            throw VersionError("posterior JSON version " + std::to_string(version) + " is not supported (expected 1)");
        }
        RbpPosterior post;
        post.seed = j.at("seed").get<std::uint64_t>();
        post.warmup = j.at("warmup").get<int>();
        post.n_draws = j.at("n_draws").get<int>();
        const auto& h = j.at("hyper");
        post.hyper = {h.at("mu0"), h.at("sigma0"), h.at("mu1"), h.at("sigma1"), h.at("mu2"), h.at("sigma2")};
        post.products = j.at("products").get<std::vector<ProductId>>();
        post.stores = j.at("stores").get<std::vector<StoreId>>();
        post.store_cluster = j.at("store_cluster").get<std::vector<int>>();
        for (const auto& c : j.at("cluster_coefs")) post.cluster_coefs.push_back({c.at(0), c.at(1)});
        for (const auto& s : j.at("store_coefs")) post.store_coefs.push_back({s.at(0), s.at(1), s.at(2)});
        post.chains = j.at("chains").get<std::vector<std::vector<double>>>();
        for (const auto& c : post.chains) {
            if (c.size() != post.n_params() * static_cast<std::size_t>(post.n_draws)) {
                throw ParseError("posterior JSON: chain length does not match the parameter layout");
            }
        }
        const auto& d = j.at("diagnostics");
        post.diagnostics.max_rhat = num_from(d.at("max_rhat"));
        post.diagnostics.min_ess = num_from(d.at("min_ess"));
        post.diagnostics.rhat_available = d.at("rhat_available");
        post.diagnostics.rhat_threshold = d.at("rhat_threshold");
        post.diagnostics.ess_threshold = d.at("ess_threshold");
        post.diagnostics.pass = d.at("pass");
        for (const auto& p : d.at("params")) {
            post.diagnostics.params.push_back({p.at("name"), num_from(p.at("rhat")), num_from(p.at("ess"))});
        }
        post.convergence_warning = j.at("convergence_warning");
        post.omitted_products = j.at("omitted_products").get<std::vector<ProductId>>();
        post.excluded_zero_records = j.at("excluded_zero_records");
        return post;
    } catch (const json::exception& e) {
        throw ParseError(std::string("posterior JSON: ") + e.what());
    }
}

}  // namespace shelfrec::reward
