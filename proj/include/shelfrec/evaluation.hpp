#pragma once
// Replay evaluation of assortment policies on logged interactions, Jaccard compliance,
// difference-in-difference estimates and a unit-level permutation test.

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "shelfrec/common.hpp"
#include "shelfrec/search.hpp"

namespace shelfrec::evaluation {

struct LoggedInteraction {
    DisplayId display_id;
    TimePoint timestamp{};
    search::DisplayState offered_state;
    Assignment chosen;
    double reward = 0.0;
    bool operator==(const LoggedInteraction&) const = default;
};

enum class MatchKind { ExactSet, Jaccard };

struct MatchRule {
    MatchKind kind = MatchKind::ExactSet;
    double theta = 1.0;  // Jaccard threshold, inclusive
    // Compares product sets only; quantities are ignored.
    bool matches(const Assignment& a, const Assignment& b) const;
};

// Must be safe to call concurrently; randomness comes only from the supplied generator.
using Policy = std::function<Assignment(const LoggedInteraction& event, Rng& rng)>;

struct ReplayReport {
    double mean_reward = 0.0;
    double median_reward = 0.0;
    double std_reward = 0.0;
    std::size_t matched_count = 0;
    std::size_t total_count = 0;   // events retained by the subsample
    std::size_t logged_count = 0;  // events in the log
    double subsample_fraction = 0.5;
    std::uint64_t seed = 0;
    bool defined = false;  // false when nothing matched
};

// Keeps round(subsample * N) events chosen by a seeded shuffle; each retained event gets
// its own generator derived from (seed, log position).
ReplayReport replay_evaluate(const Policy& policy, const std::vector<LoggedInteraction>& logs, double subsample,
                             const MatchRule& rule, std::uint64_t seed);
ReplayReport replay_evaluate_serial(const Policy& policy, const std::vector<LoggedInteraction>& logs,
                                    double subsample, const MatchRule& rule, std::uint64_t seed);

double jaccard(const std::set<ProductId>& a, const std::set<ProductId>& b);
double compliance(const std::set<ProductId>& recommended, const std::set<ProductId>& observed);

// ---- difference in differences ----

enum class Group { Treat, Control };
enum class Period { Pre, Post };

struct PanelRow {
    std::string unit_id;
    Group group = Group::Treat;
    Period period = Period::Pre;
    double value = 0.0;
    bool operator==(const PanelRow&) const = default;
};

struct DidReport {
    double pre_treat = 0.0, post_treat = 0.0, pre_control = 0.0, post_control = 0.0;
    double did_units = 0.0;
    double did_percent = 0.0;  // treat %-change minus control %-change, in percentage points
    double p_value = 1.0;
    int n_permutations = 0;
};

DidReport did_from_means(double pre_treat, double post_treat, double pre_control, double post_control);
DidReport did_estimate(const std::vector<PanelRow>& panel);

struct PermutationResult {
    double observed = 0.0;
    double p_value = 1.0;
    int n_permutations = 0;
    int extreme = 0;
};

// Shuffles group labels across units (each unit keeps all its rows). Two-sided with +1
// smoothing. Every unit needs rows in both periods and a single group.
PermutationResult permutation_test(const std::vector<PanelRow>& panel, int n_permutations, std::uint64_t seed);
PermutationResult permutation_test_serial(const std::vector<PanelRow>& panel, int n_permutations,
                                          std::uint64_t seed);

// ---- I/O ----

// display_id,timestamp,offered_products,chosen_products,chosen_quantities,reward with
// optional store_id,capacity,offered_quantities columns.
std::vector<LoggedInteraction> logs_from_csv(std::string_view text);
std::string logs_to_csv(const std::vector<LoggedInteraction>& logs);

std::vector<PanelRow> panel_from_csv(std::string_view text);
std::string panel_to_csv(const std::vector<PanelRow>& panel);

}  // namespace shelfrec::evaluation
