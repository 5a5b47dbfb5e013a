#pragma once
// Same-sub-category co-occurrence graph mined from display states, weighted neighbor
// sampling from a seed set, and height pruning.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "shelfrec/common.hpp"
#include "shelfrec/ingest.hpp"

namespace shelfrec::candidates {

using Catalog = std::map<ProductId, ingest::Product>;
Catalog make_catalog(const std::vector<ingest::Product>& products);

struct DisplayStateLog {
    DisplayId display_id;
    TimePoint timestamp{};
    std::vector<ProductId> products;
    bool operator==(const DisplayStateLog&) const = default;
};

struct CoOccurrenceGraph {
    std::set<ProductId> nodes;
    std::map<ProductId, std::map<ProductId, long long>> adjacency;  // symmetric
    TimePoint build_timestamp{};
    long long source_log_count = 0;
    long long dropped_unknown = 0;  // product mentions not resolvable in the catalog
    long long pair_updates = 0;     // work counter: pair increments performed

    long long weight(const ProductId& a, const ProductId& b) const;
    std::size_t degree(const ProductId& p) const;
    bool operator==(const CoOccurrenceGraph&) const = default;
};

CoOccurrenceGraph build_graph(const std::vector<DisplayStateLog>& states, const Catalog& catalog);
// Adds new states to an existing graph; equivalent to a rebuild over the concatenated log.
void update_graph(CoOccurrenceGraph& graph, const std::vector<DisplayStateLog>& states, const Catalog& catalog);

struct Vote {
    ProductId product_id;
    double vote_share = 0.0;
    bool operator==(const Vote&) const = default;
};

struct SampleResult {
    std::vector<Vote> votes;  // descending share, then product id
    std::vector<ProductId> missing_seeds;
    long long draws = 0;
};

// Per seed product: min(tau, degree) neighbors drawn sequentially without replacement with
// probability proportional to edge weight. One vote per draw; votes are normalized.
SampleResult sample_candidates(const CoOccurrenceGraph& graph, const std::set<ProductId>& seed, int tau, Rng& rng);

struct CandidateSet {
    DisplayId display_id;
    std::vector<Vote> candidates;
    std::set<ProductId> seed;
    int tau = 10;
    std::vector<ProductId> dropped_missing_height;

    double vote_share(const ProductId& p) const;
    bool contains(const ProductId& p) const;
    bool operator==(const CandidateSet&) const = default;
};

// Drops seed members, products taller than the tallest seed product (equal height is
// kept) and products without a catalog entry; survivors are renormalized.
CandidateSet prune(const std::vector<Vote>& votes, const std::set<ProductId>& seed, const Catalog& catalog,
                   const DisplayId& display_id = {}, int tau = 10);

CandidateSet generate(const CoOccurrenceGraph& graph, const std::set<ProductId>& seed, const Catalog& catalog,
                      int tau, Rng& rng, const DisplayId& display_id = {});

// ---- I/O ----

// display_id,timestamp,product_ids (pipe-delimited)
std::vector<DisplayStateLog> states_from_csv(std::string_view text);
std::string states_to_csv(const std::vector<DisplayStateLog>& states);

std::string graph_to_csv(const CoOccurrenceGraph& g);  // product_a,product_b,weight with a < b
std::string graph_meta_to_json(const CoOccurrenceGraph& g);
CoOccurrenceGraph graph_from_csv(std::string_view edges_csv, std::string_view meta_json);

std::string candidates_to_csv(const std::vector<CandidateSet>& sets);
std::map<DisplayId, CandidateSet> candidates_from_csv(std::string_view text);

}  // namespace shelfrec::candidates
