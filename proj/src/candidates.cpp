#include "shelfrec/candidates.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "shelfrec/csv.hpp"

namespace shelfrec::candidates {

Catalog make_catalog(const std::vector<ingest::Product>& products) {
    Catalog c;
    for (const auto& p : products) c[p.product_id] = p;
    return c;
}

long long CoOccurrenceGraph::weight(const ProductId& a, const ProductId& b) const {
    auto it = adjacency.find(a);
    if (it == adjacency.end()) return 0;
    auto jt = it->second.find(b);
    return jt == it->second.end() ? 0 : jt->second;
}

std::size_t CoOccurrenceGraph::degree(const ProductId& p) const {
    auto it = adjacency.find(p);
    return it == adjacency.end() ? 0 : it->second.size();
}

void update_graph(CoOccurrenceGraph& g, const std::vector<DisplayStateLog>& states, const Catalog& catalog) {
    for (const auto& st : states) {
        ++g.source_log_count;
        if (st.timestamp > g.build_timestamp) g.build_timestamp = st.timestamp;
        std::map<SubCategory, std::vector<ProductId>> by_sub;
        std::set<ProductId> seen;
        for (const auto& p : st.products) {
            auto it = catalog.find(p);
            if (it == catalog.end()) {
                ++g.dropped_unknown;
                continue;
            }
            if (!seen.insert(p).second) continue;
            g.nodes.insert(p);
            by_sub[it->second.sub_category].push_back(p);
        }
        for (auto& [sub, ps] : by_sub) {
            for (std::size_t i = 0; i < ps.size(); ++i) {
                for (std::size_t j = i + 1; j < ps.size(); ++j) {
                    ++g.adjacency[ps[i]][ps[j]];
                    ++g.adjacency[ps[j]][ps[i]];
                    ++g.pair_updates;
                }
            }
        }
    }
}

CoOccurrenceGraph build_graph(const std::vector<DisplayStateLog>& states, const Catalog& catalog) {
    CoOccurrenceGraph g;
    update_graph(g, states, catalog);
    return g;
}

namespace {

std::vector<Vote> sorted_votes(const std::map<ProductId, double>& shares) {
    std::vector<Vote> out;
    for (const auto& [p, v] : shares) out.push_back({p, v});
    std::stable_sort(out.begin(), out.end(), [](const Vote& a, const Vote& b) { return a.vote_share > b.vote_share; });
    return out;
}

}  // namespace

SampleResult sample_candidates(const CoOccurrenceGraph& graph, const std::set<ProductId>& seed, int tau, Rng& rng) {
    if (tau < 1) throw ArgumentError("sample_candidates: tau must be >= 1");
    SampleResult res;
    std::map<ProductId, double> votes;
    double total_votes = 0.0;
    for (const auto& s : seed) {
        auto it = graph.adjacency.find(s);
        if (it == graph.adjacency.end() || it->second.empty()) {
            res.missing_seeds.push_back(s);
            continue;
        }
        std::vector<std::pair<ProductId, double>> pool(it->second.begin(), it->second.end());
        double remaining = 0.0;
        for (const auto& [p, w] : pool) remaining += w;
        const std::size_t k = std::min<std::size_t>(tau, pool.size());
        for (std::size_t d = 0; d < k; ++d) {
            double u = uniform01(rng) * remaining;
            std::size_t pick = pool.size() - 1;
            for (std::size_t i = 0; i < pool.size(); ++i) {
                u -= pool[i].second;
                if (u < 0.0) {
                    pick = i;
                    break;
                }
            }
            votes[pool[pick].first] += 1.0;
            total_votes += 1.0;
            remaining -= pool[pick].second;
            pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
            ++res.draws;
        }
    }
    for (auto& [p, v] : votes) v /= total_votes;
    res.votes = sorted_votes(votes);
    return res;
}

double CandidateSet::vote_share(const ProductId& p) const {
    for (const auto& v : candidates) {
        if (v.product_id == p) return v.vote_share;
    }
    return 0.0;
}

bool CandidateSet::contains(const ProductId& p) const {
    return std::any_of(candidates.begin(), candidates.end(), [&](const Vote& v) { return v.product_id == p; });
}

CandidateSet prune(const std::vector<Vote>& votes, const std::set<ProductId>& seed, const Catalog& catalog,
                   const DisplayId& display_id, int tau) {
    CandidateSet out;
    out.display_id = display_id;
    out.seed = seed;
    out.tau = tau;
    double max_height = 0.0;
    for (const auto& s : seed) {
        auto it = catalog.find(s);
        if (it == catalog.end()) throw ArgumentError("prune: seed product '" + s + "' has no catalog height");
        max_height = std::max(max_height, it->second.height_mm);
    }
    double total = 0.0;
    for (const auto& v : votes) {
        if (seed.count(v.product_id)) continue;
        auto it = catalog.find(v.product_id);
        if (it == catalog.end()) {
            out.dropped_missing_height.push_back(v.product_id);
            continue;
        }
        if (it->second.height_mm > max_height) continue;
        out.candidates.push_back(v);
        total += v.vote_share;
    }
    if (total > 0.0) {
        for (auto& v : out.candidates) v.vote_share /= total;
    }
    return out;
}

CandidateSet generate(const CoOccurrenceGraph& graph, const std::set<ProductId>& seed, const Catalog& catalog,
                      int tau, Rng& rng, const DisplayId& display_id) {
    auto sampled = sample_candidates(graph, seed, tau, rng);
    return prune(sampled.votes, seed, catalog, display_id, tau);
}

// ---------------- I/O ----------------

std::vector<DisplayStateLog> states_from_csv(std::string_view text) {
    auto t = csv::read_string(text);
    const auto c_d = t.require_column("display_id");
    const auto c_t = t.require_column("timestamp");
    const auto c_p = t.require_column("product_ids");
    std::vector<DisplayStateLog> out;
    for (const auto& r : t.rows) {
        if (r.fields.size() != t.header.size()) {
            throw ParseError("states CSV line " + std::to_string(r.line) + ": field count mismatch");
        }
        DisplayStateLog s;
        s.display_id = trim(r.fields[c_d]);
        s.timestamp = parse_iso8601(trim(r.fields[c_t]));
        for (auto& p : split(r.fields[c_p], '|')) {
            auto tp = trim(p);
            if (!tp.empty()) s.products.push_back(tp);
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::string states_to_csv(const std::vector<DisplayStateLog>& states) {
    std::string out = "display_id,timestamp,product_ids\n";
    for (const auto& s : states) out += csv::format_row({s.display_id, format_iso8601(s.timestamp), join(s.products, '|')});
    return out;
}

std::string graph_to_csv(const CoOccurrenceGraph& g) {
    std::string out = "product_a,product_b,weight\n";
    for (const auto& [a, nb] : g.adjacency) {
        for (const auto& [b, w] : nb) {
            if (a < b) out += csv::format_row({a, b, std::to_string(w)});
        }
    }
    return out;
}

std::string graph_meta_to_json(const CoOccurrenceGraph& g) {
    nlohmann::json j;
    j["build_timestamp"] = format_iso8601(g.build_timestamp);
    j["source_log_count"] = g.source_log_count;
    j["dropped_unknown"] = g.dropped_unknown;
    j["pair_updates"] = g.pair_updates;
    j["nodes"] = std::vector<ProductId>(g.nodes.begin(), g.nodes.end());
    return j.dump() + "\n";
}

CoOccurrenceGraph graph_from_csv(std::string_view edges_csv, std::string_view meta_json) {
    CoOccurrenceGraph g;
    auto t = csv::read_string(edges_csv);
    const auto ca = t.require_column("product_a");
    const auto cb = t.require_column("product_b");
    const auto cw = t.require_column("weight");
    for (const auto& r : t.rows) {
        if (r.fields.size() != t.header.size()) throw ParseError("graph CSV: field count mismatch");
        const auto& a = r.fields[ca];
        const auto& b = r.fields[cb];
        const long long w = parse_int(r.fields[cw]);
        if (w <= 0 || a == b) throw ParseError("graph CSV line " + std::to_string(r.line) + ": invalid edge");
        g.adjacency[a][b] = w;
        g.adjacency[b][a] = w;
        g.nodes.insert(a);
        g.nodes.insert(b);
    }
    if (!meta_json.empty()) {
        try {
            auto j = nlohmann::json::parse(meta_json);
            g.build_timestamp = parse_iso8601(j.at("build_timestamp").get<std::string>());
            g.source_log_count = j.at("source_log_count");
            g.dropped_unknown = j.at("dropped_unknown");
            g.pair_updates = j.at("pair_updates");
            for (const auto& n : j.at("nodes")) g.nodes.insert(n.get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("graph metadata: ") + e.what());
        }
    }
    return g;
}

std::string candidates_to_csv(const std::vector<CandidateSet>& sets) {
    std::string out = "display_id,product_id,vote_share\n";
    for (const auto& s : sets) {
        for (const auto& v : s.candidates) out += csv::format_row({s.display_id, v.product_id, format_double(v.vote_share)});
    }
    return out;
}

std::map<DisplayId, CandidateSet> candidates_from_csv(std::string_view text) {
    auto t = csv::read_string(text);
    const auto cd = t.require_column("display_id");
    const auto cp = t.require_column("product_id");
    const auto cv = t.require_column("vote_share");
    std::map<DisplayId, CandidateSet> out;
    for (const auto& r : t.rows) {
        if (r.fields.size() != t.header.size()) throw ParseError("candidates CSV: field count mismatch");
        auto& s = out[r.fields[cd]];
        s.display_id = r.fields[cd];
        const double share = parse_double(r.fields[cv]);
        if (share < 0.0 || share > 1.0) throw ParseError("candidates CSV: vote_share outside [0, 1]");
        s.candidates.push_back({r.fields[cp], share});
    }
    return out;
}

}  // namespace shelfrec::candidates
