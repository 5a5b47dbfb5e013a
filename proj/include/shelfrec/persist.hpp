#pragma once
// Versioned single-file archive of pipeline artifacts. Each section holds the same CSV or
// JSON text the artifact uses on its own.

#include <optional>
#include <string>
#include <vector>

#include "shelfrec/candidates.hpp"
#include "shelfrec/geocluster.hpp"
#include "shelfrec/ingest.hpp"
#include "shelfrec/reward.hpp"

namespace shelfrec::persist {

inline constexpr int kArchiveVersion = 1;

struct PipelineState {
    std::optional<std::vector<ingest::SalesRecord>> sales;
    std::optional<geocluster::MembershipMatrix> membership;
    std::optional<std::vector<geocluster::StoreProfile>> profiles;
    std::optional<geocluster::ClusterAssignment> clusters;
    std::optional<reward::RbpPosterior> posterior;
    std::optional<candidates::CoOccurrenceGraph> graph;

    bool operator==(const PipelineState&) const = default;
};

std::string serialize_state(const PipelineState& state);
// ParseError on malformed or truncated input, VersionError on an unknown version.
PipelineState deserialize_state(std::string_view text);

void save_state(const PipelineState& state, const std::string& path);
PipelineState load_state(const std::string& path);

}  // namespace shelfrec::persist
