#include "shelfrec/persist.hpp"

#include <json.hpp>

namespace shelfrec::persist {

using nlohmann::json;

std::string serialize_state(const PipelineState& s) {
    json sections = json::object();
    if (s.sales) sections["sales.csv"] = ingest::sales_to_csv(*s.sales);
    if (s.membership) {
        sections["membership.csv"] = geocluster::membership_to_csv(*s.membership);
        sections["membership_components.csv"] = geocluster::membership_components_to_csv(*s.membership);
    }
    if (s.profiles) sections["profiles.csv"] = geocluster::profiles_to_csv(*s.profiles);
    if (s.clusters) {
        sections["clusters.csv"] = geocluster::clusters_to_csv(*s.clusters);
        sections["centroids.csv"] = geocluster::centroids_to_csv(*s.clusters);
        sections["clusters_meta.json"] = json{{"k", s.clusters->k}, {"wcss", s.clusters->wcss}}.dump();
    }
    if (s.posterior) sections["posterior.json"] = reward::posterior_to_json(*s.posterior);
    if (s.graph) {
        sections["graph.csv"] = candidates::graph_to_csv(*s.graph);
        sections["graph_meta.json"] = candidates::graph_meta_to_json(*s.graph);
    }
    json j{{"format", "shelfrec-state"}, {"version", kArchiveVersion}, {"sections", sections}};
    return j.dump(1) + "\n";
}

PipelineState deserialize_state(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("state archive: ") + e.what());
    }
    PipelineState s;
    try {
        if (!j.is_object() || j.value("format", "") != "shelfrec-state") {
            throw ParseError("state archive: missing format tag");
        }
        const int version = j.at("version").get<int>();
        if (version != kArchiveVersion) {
            throw VersionError("state archive version " + std::to_string(version) + " does not match supported version " +
                               std::to_string(kArchiveVersion));
        }
        const auto& sec = j.at("sections");
        auto get = [&](const char* name) { return sec.at(name).get<std::string>(); };
        if (sec.contains("sales.csv")) {
            auto parsed = ingest::sales_from_csv(get("sales.csv"));
            if (!parsed.errors.empty()) {
                throw ParseError("state archive: sales line " + std::to_string(parsed.errors.front().line) + ": " +
                                 parsed.errors.front().message);
            }
            s.sales = std::move(parsed.items);
        }
        if (sec.contains("membership.csv")) {
            s.membership = geocluster::membership_from_csv(get("membership.csv"), get("membership_components.csv"));
        }
        if (sec.contains("profiles.csv")) s.profiles = geocluster::profiles_from_csv(get("profiles.csv"));
        if (sec.contains("clusters.csv")) {
            s.clusters = geocluster::clusters_from_csv(get("clusters.csv"), get("centroids.csv"));
            auto meta = json::parse(get("clusters_meta.json"));
            s.clusters->k = meta.at("k");
            s.clusters->wcss = meta.at("wcss");
        }
        if (sec.contains("posterior.json")) s.posterior = reward::posterior_from_json(get("posterior.json"));
        if (sec.contains("graph.csv")) s.graph = candidates::graph_from_csv(get("graph.csv"), get("graph_meta.json"));
    } catch (const json::exception& e) {
        throw ParseError(std::string("state archive: ") + e.what());
    }
    return s;
}

void save_state(const PipelineState& state, const std::string& path) {
    ingest::write_text_file(path, serialize_state(state));
}

PipelineState load_state(const std::string& path) {
    return deserialize_state(ingest::read_text_file(path));
}

}  // namespace shelfrec::persist
