#include "shelfrec/geocluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <boost/math/distributions/fisher_f.hpp>

#include "shelfrec/csv.hpp"

namespace shelfrec::geocluster {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
constexpr int kDim = 2;

double log_gauss2(Point2 p, Point2 mu, const Cov2& c) {
    const double det = c.det();
    const double dx = p.x - mu.x;
    const double dy = p.y - mu.y;
    const double quad = (c.yy * dx * dx - 2.0 * c.xy * dx * dy + c.xx * dy * dy) / det;
    return -kLog2Pi - 0.5 * std::log(det) - 0.5 * quad;
}

double normalize_row(const double* log_dens, std::span<const double> weights, std::size_t L, double eps,
                     double* resp) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < L; ++k) {
        if (weights[k] <= 0.0) continue;
        m = std::max(m, log_dens[k] + std::log(weights[k]));
    }
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (std::size_t k = 0; k < L; ++k) {
        double e = weights[k] > 0.0 ? std::exp(log_dens[k] + std::log(weights[k]) - m) : 0.0;
        resp[k] = e;
        s += e;
    }
    const double denom = s + eps;
    for (std::size_t k = 0; k < L; ++k) resp[k] /= denom;
    return m + std::log(s);
}

}  // namespace

void SpagmmConfig::validate() const {
    if (!(convergence_rel_tol > 0.0 && convergence_rel_tol < 1.0)) {
        throw ArgumentError("convergence_rel_tol must lie in (0, 1)");
    }
    if (max_iterations < 1) throw ArgumentError("max_iterations must be positive");
    if (!(epsilon_stabilizer > 0.0)) throw ArgumentError("epsilon_stabilizer must be positive");
}

double Cov2::min_eigenvalue() const {
    const double tr = xx + yy;
    const double disc = std::sqrt(std::max(0.0, 0.25 * (xx - yy) * (xx - yy) + xy * xy));
    return 0.5 * tr - disc;
}

void log_density_matrix_serial(std::span<const Point2> tracts, std::span<const Point2> centers,
                               std::span<const Cov2> covs, std::span<double> out) {
    const std::size_t L = centers.size();
    for (std::size_t z = 0; z < tracts.size(); ++z) {
        for (std::size_t k = 0; k < L; ++k) out[z * L + k] = log_gauss2(tracts[z], centers[k], covs[k]);
    }
}

void log_density_matrix(std::span<const Point2> tracts, std::span<const Point2> centers, std::span<const Cov2> covs,
                        std::span<double> out) {
    const std::size_t L = centers.size();
    const long long Z = static_cast<long long>(tracts.size());
#pragma omp parallel for schedule(static)
    for (long long z = 0; z < Z; ++z) {
        for (std::size_t k = 0; k < L; ++k) out[z * L + k] = log_gauss2(tracts[z], centers[k], covs[k]);
    }
}

double responsibilities_serial(std::span<const double> log_dens, std::span<const double> weights,
                               std::size_t n_tracts, double eps, std::span<double> resp) {
    const std::size_t L = weights.size();
    double total = 0.0;
    for (std::size_t z = 0; z < n_tracts; ++z) {
        total += normalize_row(&log_dens[z * L], weights, L, eps, &resp[z * L]);
    }
    return total;
}

double responsibilities(std::span<const double> log_dens, std::span<const double> weights, std::size_t n_tracts,
                        double eps, std::span<double> resp) {
    const std::size_t L = weights.size();
    std::vector<double> per_tract(n_tracts);
    const long long Z = static_cast<long long>(n_tracts);
#pragma omp parallel for schedule(static)
    for (long long z = 0; z < Z; ++z) {
        per_tract[z] = normalize_row(&log_dens[z * L], weights, L, eps, &resp[z * L]);
    }
    // fixed summation order keeps the result independent of the thread count
    double total = 0.0;
    for (double v : per_tract) total += v;
    return total;
}

Cov2 map_covariance_update(std::span<const Point2> tracts, Point2 center, std::span<const double> resp,
                           std::size_t n_stores) {
    const double y0 = 1.0 / std::pow(static_cast<double>(n_stores), 1.0 / kDim);
    double r = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t z = 0; z < tracts.size(); ++z) {
        const double w = resp[z];
        const double dx = tracts[z].x - center.x;
        const double dy = tracts[z].y - center.y;
        r += w;
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
    }
    const double denom = r + 2.0 * kDim + 4.0;
    return Cov2{(y0 + sxx) / denom, sxy / denom, (y0 + syy) / denom};
}

double log_inverse_wishart(const Cov2& sigma, const Cov2& scale, double dof) {
    // log IW(S | Psi, nu) for D = 2
    const double D = kDim;
    const double det_s = sigma.det();
    const double det_psi = scale.det();
    // tr(Psi S^{-1})
    const double tr = (scale.xx * sigma.yy - 2.0 * scale.xy * sigma.xy + scale.yy * sigma.xx) / det_s;
    const double log_gamma_d = 0.5 * std::log(M_PI) + std::lgamma(dof / 2.0) + std::lgamma((dof - 1.0) / 2.0);
    return 0.5 * dof * std::log(det_psi) - 0.5 * dof * D * std::log(2.0) - log_gamma_d -
           0.5 * (dof + D + 1.0) * std::log(det_s) - 0.5 * tr;
}

SpagmmFit fit_spagmm(std::vector<StoreLocation> stores, const std::vector<ingest::Tract>& tracts,
                     const SpagmmConfig& config) {
    config.validate();
    if (stores.empty()) throw ArgumentError("fit_spagmm: no stores");
    if (tracts.empty()) throw ArgumentError("fit_spagmm: no tracts");

    SpagmmFit fit;
    std::sort(stores.begin(), stores.end(),
              [](const StoreLocation& a, const StoreLocation& b) { return a.store_id < b.store_id; });
    {
        std::map<std::pair<double, double>, int> seen;
        for (auto& s : stores) {
            int& n = seen[{s.lat, s.lon}];
            if (n > 0) {
                s.lat += 1e-9 * n;
                fit.perturbed_stores.push_back(s.store_id);
            }
            ++n;
        }
    }

    const std::size_t L = stores.size();
    const std::size_t Z = tracts.size();

    auto mean_sd = [](const std::vector<double>& v) {
        double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        double sd = std::sqrt(ss / static_cast<double>(v.size()));
        return std::pair{m, sd > 0.0 ? sd : 1.0};
    };
    std::vector<double> lats, lons;
    for (const auto& s : stores) {
        lats.push_back(s.lat);
        lons.push_back(s.lon);
    }
    const auto [mlat, sdlat] = mean_sd(lats);
    const auto [mlon, sdlon] = mean_sd(lons);

    std::vector<Point2> centers(L), pts(Z);
    for (std::size_t k = 0; k < L; ++k) centers[k] = {(stores[k].lat - mlat) / sdlat, (stores[k].lon - mlon) / sdlon};
    for (std::size_t z = 0; z < Z; ++z) pts[z] = {(tracts[z].lat - mlat) / sdlat, (tracts[z].lon - mlon) / sdlon};

    std::vector<double> weights(L, 1.0 / static_cast<double>(L));
    std::vector<Cov2> covs(L, Cov2{});
    std::vector<double> log_dens(Z * L), resp(Z * L);
    const double y0 = 1.0 / std::pow(static_cast<double>(L), 1.0 / kDim);
    const Cov2 prior_scale{y0, 0.0, y0};

    for (int iter = 0; iter < config.max_iterations; ++iter) {
        log_density_matrix(pts, centers, covs, log_dens);
        const double loglik = responsibilities(log_dens, weights, Z, config.epsilon_stabilizer, resp);
        if (!std::isfinite(loglik)) {
            throw NumericalError("fit_spagmm: non-finite likelihood at iteration " + std::to_string(iter));
        }
        double penalty = 0.0;
        for (const auto& c : covs) penalty += log_inverse_wishart(c, prior_scale, kPriorDof);
        fit.objective_history.push_back(loglik + penalty);

        double metric = loglik;
        if (config.metric == ConvergenceMetric::RawDensity) {
            metric = 0.0;
            for (double ld : log_dens) metric += std::exp(ld);
        }
        fit.likelihood_history.push_back(metric);

        // M-step: all components use responsibilities from the same E-step
        const long long LL = static_cast<long long>(L);
#pragma omp parallel for schedule(static)
        for (long long k = 0; k < LL; ++k) {
            std::vector<double> rk(Z);
            double r = 0.0;
            for (std::size_t z = 0; z < Z; ++z) {
                rk[z] = resp[z * L + k];
                r += rk[z];
            }
            weights[k] = r / static_cast<double>(Z);
            covs[k] = map_covariance_update(pts, centers[k], rk, L);
        }
        for (const auto& c : covs) {
            if (!c.is_spd()) fit.covariances_spd_throughout = false;
        }
        fit.iterations = iter + 1;

        const auto& H = fit.likelihood_history;
        if (H.size() >= 2) {
            const double prev = H[H.size() - 2];
            const double rel = std::abs(H.back() - prev) / std::max(std::abs(prev), 1e-300);
            if (rel <= config.convergence_rel_tol) {
                fit.converged = true;
                break;
            }
        }
    }

    auto& m = fit.membership;
    for (const auto& s : stores) m.store_ids.push_back(s.store_id);
    for (const auto& t : tracts) m.tract_ids.push_back(t.tract_id);
    m.probabilities.resize(L * Z);
    for (std::size_t k = 0; k < L; ++k) {
        for (std::size_t z = 0; z < Z; ++z) m.probabilities[k * Z + z] = resp[z * L + k];
    }
    m.weights = weights;
    m.covariances = covs;
    return fit;
}

std::vector<StoreProfile> store_profiles(const MembershipMatrix& m, const std::vector<ingest::Tract>& tracts) {
    if (tracts.size() != m.tracts()) throw ArgumentError("store_profiles: tract count does not match matrix columns");
    for (std::size_t z = 0; z < tracts.size(); ++z) {
        if (tracts[z].tract_id != m.tract_ids[z]) {
            throw ArgumentError("store_profiles: tract order mismatch at column " + std::to_string(z));
        }
    }
    const std::size_t b = tracts.empty() ? 0 : tracts.front().demographics.size();
    std::vector<StoreProfile> out;
    for (std::size_t l = 0; l < m.stores(); ++l) {
        double mass = 0.0;
        std::vector<double> acc(b, 0.0);
        for (std::size_t z = 0; z < m.tracts(); ++z) {
            const double w = m.at(l, z);
            mass += w;
            for (std::size_t j = 0; j < b; ++j) acc[j] += w * tracts[z].demographics[j];
        }
        if (!(mass > 0.0)) throw ArgumentError("store_profiles: store '" + m.store_ids[l] + "' has zero membership mass");
        for (auto& v : acc) v /= mass;
        out.push_back({m.store_ids[l], std::move(acc)});
    }
    return out;
}

// ---------------- k-means ----------------

int ClusterAssignment::cluster_for(const StoreId& s) const {
    for (std::size_t i = 0; i < store_ids.size(); ++i) {
        if (store_ids[i] == s) return cluster_of[i];
    }
    throw ArgumentError("store '" + s + "' has no cluster");
}

std::map<StoreId, int> ClusterAssignment::as_map() const {
    std::map<StoreId, int> out;
    for (std::size_t i = 0; i < store_ids.size(); ++i) out[store_ids[i]] = cluster_of[i];
    return out;
}

namespace {

double sqdist(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double t = a[j] - b[j];
        s += t * t;
    }
    return s;
}

int nearest(const double* p, std::span<const double> centroids, std::size_t d, double* best_out) {
    const std::size_t k = centroids.size() / d;
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
        const double dd = sqdist(p, &centroids[c * d], d);
        if (dd < bd) {
            bd = dd;
            best = static_cast<int>(c);
        }
    }
    *best_out = bd;
    return best;
}

}  // namespace

double assign_nearest_serial(std::span<const double> points, std::span<const double> centroids, std::size_t d,
                             std::span<int> labels) {
    const std::size_t n = labels.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dd;
        labels[i] = nearest(&points[i * d], centroids, d, &dd);
        total += dd;
    }
    return total;
}

double assign_nearest(std::span<const double> points, std::span<const double> centroids, std::size_t d,
                      std::span<int> labels) {
    const long long n = static_cast<long long>(labels.size());
    std::vector<double> dist(labels.size());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) labels[i] = nearest(&points[i * d], centroids, d, &dist[i]);
    double total = 0.0;
    for (double v : dist) total += v;
    return total;
}

ClusterAssignment kmeans(const std::vector<StoreProfile>& profiles, const KMeansConfig& config) {
    const std::size_t n = profiles.size();
    if (config.k < 1) throw ArgumentError("kmeans: K must be positive");
    if (static_cast<std::size_t>(config.k) > n) {
        throw ArgumentError("kmeans: K=" + std::to_string(config.k) + " exceeds store count " + std::to_string(n));
    }
    const std::size_t d = profiles.front().profile.size();
    for (const auto& p : profiles) {
        if (p.profile.size() != d) throw ArgumentError("kmeans: ragged profiles");
    }
    const std::size_t K = static_cast<std::size_t>(config.k);

    // canonical order makes the result independent of input order
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (profiles[a].profile != profiles[b].profile) return profiles[a].profile < profiles[b].profile;
        return profiles[a].store_id < profiles[b].store_id;
    });

    std::vector<double> X(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) X[i * d + j] = profiles[order[i]].profile[j];
    }
    if (config.standardize) {
        for (std::size_t j = 0; j < d; ++j) {
            double m = 0.0;
            for (std::size_t i = 0; i < n; ++i) m += X[i * d + j];
            m /= static_cast<double>(n);
            double ss = 0.0;
            for (std::size_t i = 0; i < n; ++i) ss += (X[i * d + j] - m) * (X[i * d + j] - m);
            const double sd = std::sqrt(ss / static_cast<double>(n));
            for (std::size_t i = 0; i < n; ++i) X[i * d + j] = sd > 0.0 ? (X[i * d + j] - m) / sd : 0.0;
        }
    }

    std::vector<int> best_labels;
    double best_wcss = std::numeric_limits<double>::infinity();
    const int restarts = std::max(1, config.restarts);

    for (int r = 0; r < restarts; ++r) {
        Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(r)));
        std::vector<double> C(K * d);
        // k-means++ seeding
        std::vector<std::size_t> chosen;
        chosen.push_back(uniform_index(rng, n));
        std::vector<double> dmin(n, std::numeric_limits<double>::infinity());
        while (chosen.size() < K) {
            const double* last = &X[chosen.back() * d];
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                dmin[i] = std::min(dmin[i], sqdist(&X[i * d], last, d));
                total += dmin[i];
            }
            std::size_t pick = n;
            if (total > 0.0) {
                double u = uniform01(rng) * total;
                for (std::size_t i = 0; i < n; ++i) {
                    u -= dmin[i];
                    if (u < 0.0 && dmin[i] > 0.0) {
                        pick = i;
                        break;
                    }
                }
                if (pick == n) {
                    for (std::size_t i = n; i-- > 0;) {
                        if (dmin[i] > 0.0) {
                            pick = i;
                            break;
                        }
                    }
                }
            } else {
                // all remaining points coincide with chosen centers: take any unchosen index
                std::vector<std::size_t> rest;
                for (std::size_t i = 0; i < n; ++i) {
                    if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) rest.push_back(i);
                }
                pick = rest[uniform_index(rng, rest.size())];
            }
            chosen.push_back(pick);
        }
        for (std::size_t c = 0; c < K; ++c) std::copy_n(&X[chosen[c] * d], d, &C[c * d]);

        std::vector<int> labels(n, -1), prev;
        double wcss = 0.0;
        for (int it = 0; it < config.max_iterations; ++it) {
            prev = labels;
            wcss = assign_nearest(X, C, d, labels);
            // recompute centroids; empty clusters re-seed at the farthest point
            std::vector<double> sum(K * d, 0.0);
            std::vector<int> cnt(K, 0);
            for (std::size_t i = 0; i < n; ++i) {
                ++cnt[labels[i]];
                for (std::size_t j = 0; j < d; ++j) sum[labels[i] * d + j] += X[i * d + j];
            }
            bool reseeded = false;
            for (std::size_t c = 0; c < K; ++c) {
                if (cnt[c] == 0) {
                    std::size_t far = 0;
                    double fd = -1.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        if (cnt[labels[i]] <= 1) continue;
                        const double dd = sqdist(&X[i * d], &C[labels[i] * d], d);
                        if (dd > fd) {
                            fd = dd;
                            far = i;
                        }
                    }
                    --cnt[labels[far]];
                    labels[far] = static_cast<int>(c);
                    cnt[c] = 1;
                    std::copy_n(&X[far * d], d, &C[c * d]);
                    reseeded = true;
                }
            }
            if (reseeded) {
                std::fill(sum.begin(), sum.end(), 0.0);
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < d; ++j) sum[labels[i] * d + j] += X[i * d + j];
                }
            }
            for (std::size_t c = 0; c < K; ++c) {
                for (std::size_t j = 0; j < d; ++j) C[c * d + j] = sum[c * d + j] / cnt[c];
            }
            if (!reseeded && labels == prev) break;
        }
        wcss = 0.0;
        for (std::size_t i = 0; i < n; ++i) wcss += sqdist(&X[i * d], &C[labels[i] * d], d);
        if (wcss < best_wcss) {
            best_wcss = wcss;
            best_labels = labels;
        }
    }

    // relabel clusters by first appearance in canonical order
    std::vector<int> relabel(K, -1);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (relabel[best_labels[i]] < 0) relabel[best_labels[i]] = next++;
    }

    ClusterAssignment out;
    out.k = config.k;
    out.wcss = best_wcss;
    out.store_ids.resize(n);
    out.cluster_of.resize(n);
    out.centroids.assign(K, std::vector<double>(d, 0.0));
    std::vector<int> cnt(K, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t orig = order[i];
        const int c = relabel[best_labels[i]];
        out.store_ids[orig] = profiles[orig].store_id;
        out.cluster_of[orig] = c;
        ++cnt[c];
        for (std::size_t j = 0; j < d; ++j) out.centroids[c][j] += profiles[orig].profile[j];
    }
    for (std::size_t c = 0; c < K; ++c) {
        for (auto& v : out.centroids[c]) v /= cnt[c];
    }
    return out;
}

// ---------------- ANOVA / k selection ----------------

AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups) {
    AnovaResult res;
    std::size_t N = 0;
    double grand = 0.0;
    int g = 0;
    for (const auto& grp : groups) {
        if (grp.empty()) continue;
        ++g;
        N += grp.size();
        for (double v : grp) grand += v;
    }
    if (g < 2 || N <= static_cast<std::size_t>(g)) return res;
    grand /= static_cast<double>(N);
    double ssb = 0.0, ssw = 0.0;
    for (const auto& grp : groups) {
        if (grp.empty()) continue;
        double m = std::accumulate(grp.begin(), grp.end(), 0.0) / static_cast<double>(grp.size());
        ssb += static_cast<double>(grp.size()) * (m - grand) * (m - grand);
        for (double v : grp) ssw += (v - m) * (v - m);
    }
    res.df_between = g - 1;
    res.df_within = static_cast<int>(N) - g;
    if (ssw <= 0.0) {
        res.f = ssb > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        res.p_value = ssb > 0.0 ? 0.0 : 1.0;
        return res;
    }
    res.f = (ssb / res.df_between) / (ssw / res.df_within);
    boost::math::fisher_f dist(res.df_between, res.df_within);
    res.p_value = boost::math::cdf(boost::math::complement(dist, res.f));
    return res;
}

KSelectionReport select_k(const ClusterFn& cluster_fn, const StoreSales& store_sales, std::vector<int> k_candidates,
                          double alpha, double elbow_threshold) {
    std::sort(k_candidates.begin(), k_candidates.end());
    k_candidates.erase(std::unique(k_candidates.begin(), k_candidates.end()), k_candidates.end());
    if (k_candidates.empty()) throw ArgumentError("select_k: no k candidates");

    std::set<ProductId> products;
    for (const auto& [s, m] : store_sales) {
        for (const auto& [p, v] : m) products.insert(p);
    }

    KSelectionReport rep;
    rep.alpha = alpha;
    rep.elbow_threshold = elbow_threshold;
    for (int k : k_candidates) {
        const auto assignment = cluster_fn(k);
        const auto cmap = assignment.as_map();
        KSelectionEntry e;
        e.k = k;
        int significant = 0;
        for (const auto& p : products) {
            std::map<int, std::vector<double>> by_cluster;
            for (const auto& [s, m] : store_sales) {
                auto it = m.find(p);
                auto cit = cmap.find(s);
                if (it == m.end() || cit == cmap.end()) continue;
                by_cluster[cit->second].push_back(it->second);
            }
            std::vector<std::vector<double>> groups;
            for (auto& [c, v] : by_cluster) {
                if (v.size() >= 2) groups.push_back(std::move(v));
            }
            if (groups.size() < 2) {
                ++e.products_excluded;
                continue;
            }
            ++e.products_tested;
            if (one_way_anova(groups).p_value < alpha) ++significant;
        }
        e.fraction_significant = e.products_tested > 0 ? static_cast<double>(significant) / e.products_tested : 0.0;
        rep.entries.push_back(e);
    }
    rep.recommended_k = rep.entries.back().k;
    for (std::size_t i = 1; i < rep.entries.size(); ++i) {
        if (rep.entries[i].fraction_significant - rep.entries[i - 1].fraction_significant < elbow_threshold) {
            rep.recommended_k = rep.entries[i - 1].k;
            break;
        }
    }
    return rep;
}

// ---------------- I/O ----------------

std::vector<StoreLocation> load_stores(std::string_view text) {
    auto t = csv::read_string(text);
    const auto c_id = t.require_column("store_id");
    const auto c_lat = t.require_column("lat");
    const auto c_lon = t.require_column("lon");
    std::vector<StoreLocation> out;
    for (const auto& r : t.rows) {
        if (r.fields.size() != t.header.size()) {
            throw ParseError("stores CSV line " + std::to_string(r.line) + ": field count mismatch");
        }
        out.push_back({trim(r.fields[c_id]), parse_double(r.fields[c_lat]), parse_double(r.fields[c_lon])});
    }
    return out;
}

std::string membership_to_csv(const MembershipMatrix& m) {
    std::string out = "store_id,tract_id,probability\n";
    for (std::size_t l = 0; l < m.stores(); ++l) {
        for (std::size_t z = 0; z < m.tracts(); ++z) {
            out += csv::format_row({m.store_ids[l], m.tract_ids[z], format_double(m.at(l, z))});
        }
    }
    return out;
}

std::string membership_components_to_csv(const MembershipMatrix& m) {
    std::string out = "store_id,weight,cov_xx,cov_xy,cov_yy\n";
    for (std::size_t l = 0; l < m.stores(); ++l) {
        const auto& c = m.covariances[l];
        out += csv::format_row({m.store_ids[l], format_double(m.weights[l]), format_double(c.xx), format_double(c.xy),
                                format_double(c.yy)});
    }
    return out;
}

MembershipMatrix membership_from_csv(std::string_view probabilities_csv, std::string_view components_csv) {
    MembershipMatrix m;
    auto comp = csv::read_string(components_csv);
    const auto c_store = comp.require_column("store_id");
    const auto c_w = comp.require_column("weight");
    const auto c_xx = comp.require_column("cov_xx");
    const auto c_xy = comp.require_column("cov_xy");
    const auto c_yy = comp.require_column("cov_yy");
    std::map<StoreId, std::size_t> store_index;
    for (const auto& r : comp.rows) {
        if (r.fields.size() != comp.header.size()) throw ParseError("membership components: field count mismatch");
        store_index[r.fields[c_store]] = m.store_ids.size();
        m.store_ids.push_back(r.fields[c_store]);
        m.weights.push_back(parse_double(r.fields[c_w]));
        m.covariances.push_back(
            {parse_double(r.fields[c_xx]), parse_double(r.fields[c_xy]), parse_double(r.fields[c_yy])});
    }
    auto probs = csv::read_string(probabilities_csv);
    const auto p_store = probs.require_column("store_id");
    const auto p_tract = probs.require_column("tract_id");
    const auto p_prob = probs.require_column("probability");
    std::map<TractId, std::size_t> tract_index;
    for (const auto& r : probs.rows) {
        if (r.fields.size() != probs.header.size()) throw ParseError("membership: field count mismatch");
        if (tract_index.emplace(r.fields[p_tract], m.tract_ids.size()).second) m.tract_ids.push_back(r.fields[p_tract]);
    }
    m.probabilities.assign(m.stores() * m.tracts(), 0.0);
    for (const auto& r : probs.rows) {
        auto sit = store_index.find(r.fields[p_store]);
        if (sit == store_index.end()) throw ParseError("membership: unknown store '" + r.fields[p_store] + "'");
        m.probabilities[sit->second * m.tracts() + tract_index.at(r.fields[p_tract])] = parse_double(r.fields[p_prob]);
    }
    return m;
}

std::string profiles_to_csv(const std::vector<StoreProfile>& profiles) {
    const std::size_t b = profiles.empty() ? 0 : profiles.front().profile.size();
    std::vector<std::string> header{"store_id"};
    for (std::size_t j = 0; j < b; ++j) header.push_back(ingest::demographic_column(j));
    std::string out = csv::format_row(header);
    for (const auto& p : profiles) {
        std::vector<std::string> f{p.store_id};
        for (double v : p.profile) f.push_back(format_double(v));
        out += csv::format_row(f);
    }
    return out;
}

std::vector<StoreProfile> profiles_from_csv(std::string_view text) {
    auto t = csv::read_string(text);
    const auto c_id = t.require_column("store_id");
    std::vector<StoreProfile> out;
    for (const auto& r : t.rows) {
        if (r.fields.size() != t.header.size()) throw ParseError("profiles: field count mismatch");
        StoreProfile p;
        p.store_id = r.fields[c_id];
        for (std::size_t j = 0; j < r.fields.size(); ++j) {
            if (j != c_id) p.profile.push_back(parse_double(r.fields[j]));
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::string clusters_to_csv(const ClusterAssignment& c) {
    std::string out = "store_id,cluster_id\n";
    for (std::size_t i = 0; i < c.store_ids.size(); ++i) {
        out += csv::format_row({c.store_ids[i], std::to_string(c.cluster_of[i])});
    }
    return out;
}

std::string centroids_to_csv(const ClusterAssignment& c) {
    const std::size_t b = c.centroids.empty() ? 0 : c.centroids.front().size();
    std::vector<std::string> header{"cluster_id"};
    for (std::size_t j = 0; j < b; ++j) header.push_back(ingest::demographic_column(j));
    std::string out = csv::format_row(header);
    for (std::size_t k = 0; k < c.centroids.size(); ++k) {
        std::vector<std::string> f{std::to_string(k)};
        for (double v : c.centroids[k]) f.push_back(format_double(v));
        out += csv::format_row(f);
    }
    return out;
}

ClusterAssignment clusters_from_csv(std::string_view clusters_csv, std::string_view centroids_csv) {
    ClusterAssignment c;
    auto t = csv::read_string(clusters_csv);
    const auto c_store = t.require_column("store_id");
    const auto c_cluster = t.require_column("cluster_id");
    int max_id = -1;
    for (const auto& r : t.rows) {
        if (r.fields.size() != t.header.size()) throw ParseError("clusters: field count mismatch");
        c.store_ids.push_back(trim(r.fields[c_store]));
        const int id = static_cast<int>(parse_int(r.fields[c_cluster]));
        if (id < 0) throw ParseError("clusters: negative cluster id");
        c.cluster_of.push_back(id);
        max_id = std::max(max_id, id);
    }
    c.k = max_id + 1;
    if (!centroids_csv.empty()) {
        auto ct = csv::read_string(centroids_csv);
        const auto k_col = ct.require_column("cluster_id");
        for (const auto& r : ct.rows) {
            std::vector<double> v;
            for (std::size_t j = 0; j < r.fields.size(); ++j) {
                if (j != k_col) v.push_back(parse_double(r.fields[j]));
            }
            c.centroids.push_back(std::move(v));
        }
        c.k = static_cast<int>(c.centroids.size());
    }
    return c;
}

}  // namespace shelfrec::geocluster
