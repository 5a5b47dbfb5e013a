#pragma once
// Hierarchical Gamma-likelihood payoff model fitted by adaptive Metropolis-within-Gibbs,
// posterior predictive summaries and the penalized ranking statistic.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shelfrec/common.hpp"
#include "shelfrec/geocluster.hpp"
#include "shelfrec/ingest.hpp"

namespace shelfrec::reward {

struct RbpHyperParams {
    double mu0 = 0.0, sigma0 = 2.0;  // cluster coefficients
    double mu1 = 0.0, sigma1 = 1.0;  // Laplace scales
    double mu2 = 0.0, sigma2 = 2.0;  // reward dispersion

    void validate() const;
    bool operator==(const RbpHyperParams&) const = default;
};

struct SamplerConfig {
    int chains = 4;
    int draws = 1000;
    int warmup = 1000;
    std::uint64_t seed = 0;
    double initial_step = 0.3;  // random-walk sd on the log scale
    double target_acceptance = 0.44;
    int adapt_batch = 50;

    void validate() const;
};

struct GammaParams {
    double shape = 1.0;
    double rate = 1.0;
};
GammaParams gamma_from_mean_sd(double mean, double sd);

// log density of the folded normal |N(mu, sigma)| at x >= 0
double log_folded_normal(double x, double mu, double sigma);
// log density of Laplace(loc, scale) truncated to (0, inf)
double log_truncated_laplace(double x, double loc, double scale);
double log_gamma_mean_sd(double y, double mean, double sd);

// ---- diagnostics ----

struct ParamDiagnostic {
    std::string name;
    double rhat = 1.0;
    double ess = 0.0;
    bool operator==(const ParamDiagnostic&) const = default;
};

struct DiagnosticsReport {
    std::vector<ParamDiagnostic> params;
    double max_rhat = 1.0;
    double min_ess = 0.0;
    bool rhat_available = true;
    double rhat_threshold = 1.1;
    double ess_threshold = 100.0;
    bool pass = true;
    bool operator==(const DiagnosticsReport&) const = default;
};

// Split R-hat over chains of equal length. Infinity when chains are individually constant
// but disagree; 1 when every draw is identical. NaN for fewer than two draws per half.
double split_rhat(const std::vector<std::vector<double>>& chains);
// Multi-chain effective sample size with Geyer's initial monotone sequence.
double effective_sample_size(const std::vector<std::vector<double>>& chains);

// ---- posterior ----

struct ClusterCoef {
    int product = 0;
    int cluster = 0;
    bool operator==(const ClusterCoef&) const = default;
};

struct StoreCoef {
    int product = 0;
    int store = 0;
    int cluster_coef = 0;  // index into cluster_coefs
    bool operator==(const StoreCoef&) const = default;
};

struct RbpPosterior {
    std::vector<ProductId> products;
    std::vector<StoreId> stores;
    std::vector<int> store_cluster;  // aligned with stores
    std::vector<ClusterCoef> cluster_coefs;
    std::vector<StoreCoef> store_coefs;
    // Parameter layout per draw: cluster coefs, store coefs, then one Laplace scale and
    // one dispersion per product.
    std::vector<std::vector<double>> chains;  // chain -> draw-major flat array
    int n_draws = 0;
    int warmup = 0;
    std::uint64_t seed = 0;
    RbpHyperParams hyper;
    DiagnosticsReport diagnostics;
    bool convergence_warning = false;
    std::vector<ProductId> omitted_products;
    int excluded_zero_records = 0;

    std::size_t n_chains() const { return chains.size(); }
    std::size_t n_params() const { return cluster_coefs.size() + store_coefs.size() + 2 * products.size(); }
    std::size_t scale_param(std::size_t product) const { return cluster_coefs.size() + store_coefs.size() + product; }
    std::size_t sigma_param(std::size_t product) const { return scale_param(product) + products.size(); }
    std::size_t store_param(std::size_t store_coef) const { return cluster_coefs.size() + store_coef; }
    double value(std::size_t chain, std::size_t draw, std::size_t param) const {
        return chains[chain][draw * n_params() + param];
    }

    std::optional<std::size_t> product_index(const ProductId& p) const;
    std::optional<std::size_t> store_index(const StoreId& s) const;
    std::optional<std::size_t> cluster_coef_param(const ProductId& p, int cluster) const;
    std::optional<std::size_t> store_coef_param(const ProductId& p, const StoreId& s) const;
    std::string param_name(std::size_t param) const;

    std::vector<double> pooled(std::size_t param) const;  // all chains concatenated
    double mean(std::size_t param) const;
    double sd(std::size_t param) const;
    std::pair<double, double> credible_interval(std::size_t param, double mass) const;

    bool operator==(const RbpPosterior&) const = default;
};

// Records with units_sold == 0 are dropped and counted; products left without records
// are listed as omitted. Every store in the sales must have a cluster.
// Each sweep updates every parameter on the log scale, then rescales each cluster coefficient
// jointly with its store coefficients, then each Laplace scale jointly with the store
// deviations from their cluster coefficients.
RbpPosterior fit_rbp(const std::vector<ingest::SalesRecord>& sales, const geocluster::ClusterAssignment& clusters,
                     const RbpHyperParams& hp = {}, const SamplerConfig& sampler = {});

DiagnosticsReport mcmc_diagnostics(const RbpPosterior& post, double rhat_threshold = 1.1,
                                   double ess_threshold = 100.0);

// ---- prediction ----

enum class PredictionSource { Store, Cluster, Prior };
std::string_view to_string(PredictionSource s);

struct PredictiveSummary {
    ProductId product_id;
    StoreId store_id;
    int quantity = 1;
    double mean = 0.0;
    double sd = 0.0;
    std::vector<double> draws;
    PredictionSource source = PredictionSource::Store;
};

// One reward draw per retained posterior draw. Unseen (product, store) pairs fall back to
// the cluster coefficient with a truncated-Laplace perturbation; a product never fitted in
// that cluster draws its cluster coefficient from the prior. `cluster` is needed for stores
// the posterior has not seen. Unknown products throw ArgumentError.
PredictiveSummary posterior_predictive(const RbpPosterior& post, const ProductId& product, const StoreId& store,
                                       int quantity, std::uint64_t seed, std::optional<int> cluster = std::nullopt);

// Everything from the prior; used for products absent from the posterior.
PredictiveSummary prior_predictive(const RbpHyperParams& hp, const ProductId& product, const StoreId& store,
                                   int quantity, std::size_t n_draws, std::uint64_t seed);

struct PepfScore {
    ProductId product_id;
    StoreId store_id;
    int quantity = 1;
    double mean_payoff = 0.0;
    double sd_payoff = 0.0;
    double pepf = 0.0;
    double lambda = 1.0;
    bool operator==(const PepfScore&) const = default;
};

PepfScore pepf(const PredictiveSummary& summary, double lambda = 1.0);

// Scores (product, quantity) for one store, covering the cold-start paths. Stateless apart
// from configuration, so it is safe to share across threads.
class PepfScorer {
public:
    PepfScorer(const RbpPosterior& post, double lambda, std::uint64_t seed, std::optional<int> cluster = std::nullopt,
               std::size_t prior_draws = 2000);
    PepfScore score(const ProductId& product, const StoreId& store, int quantity) const;

private:
    const RbpPosterior* post_;
    double lambda_;
    std::uint64_t seed_;
    std::optional<int> cluster_;
    std::size_t prior_draws_;
};

// ---- point estimates ----

// Least-squares slope through the origin of units_sold on quantity_faced, per
// (product, group): beta = sum(q*y) / sum(q^2).
struct PointEstimates {
    std::map<ProductId, std::map<std::string, double>> beta;
    std::optional<double> get(const ProductId& p, const std::string& group) const;
};
using GroupFn = std::function<std::string(const ingest::SalesRecord&)>;
PointEstimates least_squares_fit(const std::vector<ingest::SalesRecord>& sales, const GroupFn& group_of);

// ---- export ----

std::string posterior_to_json(const RbpPosterior& post);
RbpPosterior posterior_from_json(std::string_view text);

}  // namespace shelfrec::reward
