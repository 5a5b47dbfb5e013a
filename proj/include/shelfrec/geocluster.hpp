#pragma once
// Spatially anchored Gaussian mixture (one component per store, means pinned at
// store coordinates), demographic store profiles, K-means over profiles, and
// ANOVA-driven choice of the cluster count.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "shelfrec/common.hpp"
#include "shelfrec/ingest.hpp"

namespace shelfrec::geocluster {

struct StoreLocation {
    StoreId store_id;
    double lat = 0.0;
    double lon = 0.0;
};

enum class ConvergenceMetric {
    LogLikelihood,  // relative change of the log-domain mixture likelihood
    RawDensity,     // relative change of the summed raw densities
};

struct SpagmmConfig {
    double convergence_rel_tol = 0.05;
    int max_iterations = 200;
    double epsilon_stabilizer = 1e-12;
    ConvergenceMetric metric = ConvergenceMetric::LogLikelihood;

    void validate() const;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

// Symmetric 2x2 matrix [[xx, xy], [xy, yy]].
struct Cov2 {
    double xx = 1.0;
    double xy = 0.0;
    double yy = 1.0;

    double det() const { return xx * yy - xy * xy; }
    bool is_spd() const { return xx > 0.0 && det() > 0.0; }
    double min_eigenvalue() const;
    bool operator==(const Cov2&) const = default;
};

struct MembershipMatrix {
    std::vector<StoreId> store_ids;
    std::vector<TractId> tract_ids;
    std::vector<double> probabilities;  // row-major L x Z
    std::vector<double> weights;        // mixing weight per store component
    std::vector<Cov2> covariances;      // per store component, standardized coordinates

    std::size_t stores() const { return store_ids.size(); }
    std::size_t tracts() const { return tract_ids.size(); }
    double at(std::size_t store, std::size_t tract) const { return probabilities[store * tracts() + tract]; }
    bool operator==(const MembershipMatrix&) const = default;
};

struct SpagmmFit {
    MembershipMatrix membership;
    std::vector<double> objective_history;   // penalized log-likelihood before each M-step
    std::vector<double> likelihood_history;  // quantity used by the convergence test
    int iterations = 0;
    bool converged = false;
    bool covariances_spd_throughout = true;
    std::vector<StoreId> perturbed_stores;
};

// Inverse-Wishart degrees of freedom that make (Y0 + Yk) / (rk + 2D + 4) the exact MAP update.
inline constexpr double kPriorDof = 5.0;  // D + 3 with D = 2

SpagmmFit fit_spagmm(std::vector<StoreLocation> stores, const std::vector<ingest::Tract>& tracts,
                     const SpagmmConfig& config = {});

// ---- kernels (OpenMP, with serial references kept for testing) ----

// out[z * L + k] = log N(tract_z | center_k, cov_k)
void log_density_matrix(std::span<const Point2> tracts, std::span<const Point2> centers,
                        std::span<const Cov2> covs, std::span<double> out);
void log_density_matrix_serial(std::span<const Point2> tracts, std::span<const Point2> centers,
                               std::span<const Cov2> covs, std::span<double> out);

// Normalizes per tract: resp[z*L+k] = E_zk pi_k / (sum_k E_zk pi_k + eps), evaluated after
// max-subtraction. Returns the mixture log-likelihood sum_z log sum_k pi_k E_zk.
double responsibilities(std::span<const double> log_dens, std::span<const double> weights, std::size_t n_tracts,
                        double eps, std::span<double> resp);
double responsibilities_serial(std::span<const double> log_dens, std::span<const double> weights,
                               std::size_t n_tracts, double eps, std::span<double> resp);

// MAP covariance for one component: (Y0 + sum_z w_z (c_z - mu)(c_z - mu)^T) / (r + 2D + 4)
// with Y0 = L^{-1/D} I.
Cov2 map_covariance_update(std::span<const Point2> tracts, Point2 center, std::span<const double> resp_for_component,
                           std::size_t n_stores);

double log_inverse_wishart(const Cov2& sigma, const Cov2& scale, double dof);

// ---- profiles ----

struct StoreProfile {
    StoreId store_id;
    std::vector<double> profile;
    bool operator==(const StoreProfile&) const = default;
};

// Row-normalized weighting: X_l = sum_z P_lz x_z / sum_z P_lz. Tract order must match the
// matrix columns. Throws ArgumentError naming the store when a row has zero mass.
std::vector<StoreProfile> store_profiles(const MembershipMatrix& m, const std::vector<ingest::Tract>& tracts);

// ---- k-means ----

struct ClusterAssignment {
    std::vector<StoreId> store_ids;
    std::vector<int> cluster_of;               // aligned with store_ids
    std::vector<std::vector<double>> centroids;  // K x b, mean of member profiles
    int k = 0;
    double wcss = 0.0;  // in the standardized feature space

    int cluster_for(const StoreId& s) const;
    std::map<StoreId, int> as_map() const;
    bool operator==(const ClusterAssignment&) const = default;
};

struct KMeansConfig {
    int k = 20;
    std::uint64_t seed = 0;
    int restarts = 10;
    int max_iterations = 300;
    bool standardize = true;
};

ClusterAssignment kmeans(const std::vector<StoreProfile>& profiles, const KMeansConfig& config);

// Assigns each of n points (row-major n x d) to its nearest of k centroids.
// Returns the total squared distance.
double assign_nearest(std::span<const double> points, std::span<const double> centroids, std::size_t d,
                      std::span<int> labels);
double assign_nearest_serial(std::span<const double> points, std::span<const double> centroids, std::size_t d,
                             std::span<int> labels);

// ---- cluster-count selection ----

struct AnovaResult {
    double f = 0.0;
    double p_value = 1.0;
    int df_between = 0;
    int df_within = 0;
};

AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups);

struct KSelectionEntry {
    int k = 0;
    double fraction_significant = 0.0;
    int products_tested = 0;
    int products_excluded = 0;
};

struct KSelectionReport {
    std::vector<KSelectionEntry> entries;
    int recommended_k = 0;
    double alpha = 0.05;
    double elbow_threshold = 0.02;
};

using ClusterFn = std::function<ClusterAssignment(int k)>;
using StoreSales = std::map<StoreId, std::map<ProductId, double>>;

// For each k: cluster, then per product a one-way ANOVA of store-level sales across the
// clusters holding at least two stores that sell it. The recommendation is the last k
// before the first step whose gain falls below `elbow_threshold`.
KSelectionReport select_k(const ClusterFn& cluster_fn, const StoreSales& store_sales, std::vector<int> k_candidates,
                          double alpha = 0.05, double elbow_threshold = 0.02);

// ---- I/O ----

std::vector<StoreLocation> load_stores(std::string_view csv_text);
std::string membership_to_csv(const MembershipMatrix& m);
std::string membership_components_to_csv(const MembershipMatrix& m);
MembershipMatrix membership_from_csv(std::string_view probabilities_csv, std::string_view components_csv);
std::string profiles_to_csv(const std::vector<StoreProfile>& profiles);
std::vector<StoreProfile> profiles_from_csv(std::string_view text);
std::string clusters_to_csv(const ClusterAssignment& c);
std::string centroids_to_csv(const ClusterAssignment& c);
// Centroids are optional; without them the assignment carries k = max id + 1 and no centroids.
ClusterAssignment clusters_from_csv(std::string_view clusters_csv, std::string_view centroids_csv = {});

}  // namespace shelfrec::geocluster
