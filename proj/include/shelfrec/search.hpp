#pragma once
// Uncertainty-aware swap search over a display's product-quantity assignment, with
// geometric quantity decay for under-performers and epsilon-greedy replacements.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shelfrec/candidates.hpp"
#include "shelfrec/common.hpp"
#include "shelfrec/reward.hpp"

namespace shelfrec::search {

struct DisplayState {
    DisplayId display_id;
    StoreId store_id;
    Assignment slots;  // product -> facings
    int capacity = 1;

    int total() const;
    void validate() const;  // capacity >= 1 and quantities >= 1; the budget is not enforced here
    bool operator==(const DisplayState&) const = default;
};

// floor(q0 / 2^t)
int decay(int t, int q0);

// Per product: how many times it has been decayed (t) and the quantity it started from.
struct DecayEntry {
    int t = 0;
    int q0 = 0;
    bool operator==(const DecayEntry&) const = default;
};
using DecayState = std::map<ProductId, DecayEntry>;

struct SearchConfig {
    int V = 2;
    double epsilon = 0.05;
    double lambda = 1.0;
    int T = 1;
    std::uint64_t seed = 0;
    DecayState decay_state;

    void validate() const;
};

enum class Provenance { Kept, Decayed, SwappedGreedy, SwappedRandom, Topped };
std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view s);

using Scorer = std::function<reward::PepfScore(const ProductId&, int quantity)>;

struct Swap {
    ProductId victim;
    ProductId replacement;
    int quantity = 0;
    bool random = false;
    bool operator==(const Swap&) const = default;
};

struct RecommendationSet {
    DisplayId display_id;
    Assignment assignment;
    std::map<ProductId, Provenance> provenance;
    std::map<ProductId, reward::PepfScore> pepf_table;
    DecayState decay_state;  // to be threaded into the next cycle
    std::vector<Swap> swaps;
    std::vector<ProductId> guarded;  // victims spared because no candidate beat them
    int truncated_units = 0;
    std::uint64_t seed = 0;
    bool operator==(const RecommendationSet&) const = default;
};

struct OpCounters {
    long long scored = 0;
    long long compared = 0;
    long long slot_updates = 0;
};

// Products are ranked by PEPF at quantity 1; ties go to the higher vote share, then the
// smaller product id. With an empty candidate set, freed facings go to the best-ranked
// product that was not a victim.
RecommendationSet recommend(const DisplayState& state, const candidates::CandidateSet& cands, const Scorer& scorer,
                            const SearchConfig& cfg, OpCounters* counters = nullptr);

struct ValidationCheck {
    std::string name;
    bool pass = true;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    bool pass = true;
    int overflow = 0;
};

ValidationReport validate(const RecommendationSet& rec, const DisplayState& state,
                          const candidates::CandidateSet& cands, const candidates::Catalog& catalog);

// ---- I/O ----

// {display_id, store_id, capacity, slots: {product: q}, cluster?, decay_state?: {product: [t, q0]}}
struct StateFile {
    DisplayState state;
    std::optional<int> cluster;
    DecayState decay_state;
};
StateFile state_from_json(std::string_view text);
std::string state_to_json(const StateFile& f);

std::string recommendation_to_json(const RecommendationSet& rec, const SearchConfig& cfg);

}  // namespace shelfrec::search
