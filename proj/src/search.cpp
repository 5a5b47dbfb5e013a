#include "shelfrec/search.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

namespace shelfrec::search {

using nlohmann::json;

int DisplayState::total() const {
    int s = 0;
    for (const auto& [p, q] : slots) s += q;
    return s;
}

void DisplayState::validate() const {
    if (capacity < 1) throw ArgumentError("display '" + display_id + "': capacity must be >= 1");
    for (const auto& [p, q] : slots) {
        if (q < 1) throw ArgumentError("display '" + display_id + "': product '" + p + "' has quantity < 1");
    }
}

int decay(int t, int q0) {
    if (t < 0) throw ArgumentError("decay: t must be non-negative");
    if (t >= 31) return 0;
    return q0 >> t;
}

void SearchConfig::validate() const {
    if (V < 1) throw ArgumentError("search: V must be >= 1");
    if (T < 1) throw ArgumentError("search: T must be >= 1");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ArgumentError("search: epsilon must lie in [0, 1]");
    if (!(lambda >= 0.0)) throw ArgumentError("search: lambda must be non-negative");
}

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::Kept: return "kept";
        case Provenance::Decayed: return "decayed";
        case Provenance::SwappedGreedy: return "swapped-greedy";
        case Provenance::SwappedRandom: return "swapped-random";
        case Provenance::Topped: return "topped-up";
    }
    return "?";
}

Provenance parse_provenance(std::string_view s) {
    for (auto p : {Provenance::Kept, Provenance::Decayed, Provenance::SwappedGreedy, Provenance::SwappedRandom,
                   Provenance::Topped}) {
        if (to_string(p) == s) return p;
    }
    throw ParseError("unknown provenance '" + std::string(s) + "'");
}

RecommendationSet recommend(const DisplayState& state, const candidates::CandidateSet& cands, const Scorer& scorer,
                            const SearchConfig& cfg, OpCounters* counters) {
    cfg.validate();
    state.validate();
    OpCounters local;
    OpCounters& ops = counters ? *counters : local;

    RecommendationSet rec;
    rec.display_id = state.display_id;
    rec.seed = cfg.seed;
    Rng rng(cfg.seed);

    std::map<ProductId, double> votes;
    for (const auto& v : cands.candidates) votes[v.product_id] = v.vote_share;
    auto pepf_of = [&](const ProductId& p) -> double {
        auto it = rec.pepf_table.find(p);
        if (it == rec.pepf_table.end()) {
            ++ops.scored;
            it = rec.pepf_table.emplace(p, scorer(p, 1)).first;
        }
        return it->second.pepf;
    };
    auto better = [&](const ProductId& a, const ProductId& b) {
        ++ops.compared;
        const double pa = pepf_of(a), pb = pepf_of(b);
        if (pa != pb) return pa > pb;
        const double va = votes.count(a) ? votes.at(a) : 0.0;
        const double vb = votes.count(b) ? votes.at(b) : 0.0;
        if (va != vb) return va > vb;
        return a < b;
    };

    Assignment cur = state.slots;
    DecayState dstate = cfg.decay_state;
    for (const auto& [p, q] : cur) rec.provenance[p] = Provenance::Kept;

    for (int iter = 0; iter < cfg.T; ++iter) {
        for (auto it = dstate.begin(); it != dstate.end();) {
            auto c = cur.find(it->first);
            if (c == cur.end() || decay(it->second.t, it->second.q0) != c->second) it = dstate.erase(it);
            else ++it;
        }

        std::vector<ProductId> ranked;
        for (const auto& [p, q] : cur) ranked.push_back(p);
        std::sort(ranked.begin(), ranked.end(), better);
        const std::size_t n_victims = std::min<std::size_t>(cfg.V, ranked.size());
        std::vector<ProductId> victims(ranked.rbegin(), ranked.rbegin() + static_cast<std::ptrdiff_t>(n_victims));
        const std::set<ProductId> victim_set(victims.begin(), victims.end());

        std::vector<ProductId> available;
        for (const auto& v : cands.candidates) {
            if (!cur.count(v.product_id)) available.push_back(v.product_id);
        }
        std::sort(available.begin(), available.end(), better);

        for (const auto& v : victims) {
            const int q_now = cur.at(v);
            const DecayEntry entry = dstate.count(v) ? dstate.at(v) : DecayEntry{0, q_now};
            const int new_q = decay(entry.t + 1, entry.q0);
            const int freed = q_now - new_q;
            if (freed <= 0) continue;

            ProductId receiver;
            bool random = false;
            if (available.empty()) {
                if (!cands.candidates.empty()) {
                    rec.guarded.push_back(v);
                    continue;
                }
                for (const auto& p : ranked) {
                    if (!victim_set.count(p) && cur.count(p)) {
                        receiver = p;
                        break;
                    }
                }
                if (receiver.empty()) continue;
            } else {
                std::size_t idx = 0;
                if (uniform01(rng) < cfg.epsilon) {
                    idx = uniform_index(rng, available.size());
                    random = true;
                } else if (pepf_of(available.front()) < pepf_of(v)) {
                    rec.guarded.push_back(v);
                    continue;
                }
                receiver = available[idx];
                available.erase(available.begin() + static_cast<std::ptrdiff_t>(idx));
            }

            if (new_q > 0) {
                cur[v] = new_q;
                rec.provenance[v] = Provenance::Decayed;
            } else {
                cur.erase(v);
            }
            dstate[v] = {entry.t + 1, entry.q0};
            ops.slot_updates += 2;
            if (cur.count(receiver)) {
                cur[receiver] += freed;
                rec.provenance[receiver] = Provenance::Topped;
            } else {
                cur[receiver] = freed;
                rec.provenance[receiver] = random ? Provenance::SwappedRandom : Provenance::SwappedGreedy;
                rec.swaps.push_back({v, receiver, freed, random});
            }
        }

        // fill the budget in descending PEPF at current quantities
        std::vector<ProductId> order;
        for (const auto& [p, q] : cur) order.push_back(p);
        std::sort(order.begin(), order.end(), better);
        int budget = state.capacity;
        Assignment filled;
        for (const auto& p : order) {
            const int q = std::min(cur.at(p), budget);
            ++ops.slot_updates;
            if (q > 0) filled[p] = q;
            rec.truncated_units += cur.at(p) - q;
            budget -= q;
        }
        cur = std::move(filled);
        for (auto it = dstate.begin(); it != dstate.end();) {
            if (!cur.count(it->first)) it = dstate.erase(it);
            else ++it;
        }
    }

    rec.assignment = cur;
    rec.decay_state = dstate;
    for (auto it = rec.provenance.begin(); it != rec.provenance.end();) {
        if (!cur.count(it->first)) it = rec.provenance.erase(it);
        else ++it;
    }
    return rec;
}

ValidationReport validate(const RecommendationSet& rec, const DisplayState& state,
                          const candidates::CandidateSet& cands, const candidates::Catalog& catalog) {
    ValidationReport rep;
    auto add = [&](std::string name, bool pass, std::string detail) {
        rep.checks.push_back({std::move(name), pass, std::move(detail)});
        rep.pass = rep.pass && pass;
    };

    int total = 0;
    for (const auto& [p, q] : rec.assignment) total += q;
    rep.overflow = std::max(0, total - state.capacity);
    add("budget", rep.overflow == 0,
        rep.overflow ? "overflow " + std::to_string(rep.overflow) : "total " + std::to_string(total));

    std::string nonpos;
    for (const auto& [p, q] : rec.assignment) {
        if (q < 1) nonpos += (nonpos.empty() ? "" : ",") + p;
    }
    add("positivity", nonpos.empty(), nonpos);

    std::string foreign;
    for (const auto& [p, q] : rec.assignment) {
        if (!state.slots.count(p) && !cands.contains(p)) foreign += (foreign.empty() ? "" : ",") + p;
    }
    add("provenance", foreign.empty(), foreign);

    double max_h = 0.0;
    bool heights_known = true;
    for (const auto& [p, q] : state.slots) {
        auto it = catalog.find(p);
        if (it == catalog.end()) heights_known = false;
        else max_h = std::max(max_h, it->second.height_mm);
    }
    std::string tall;
    for (const auto& [p, q] : rec.assignment) {
        if (state.slots.count(p)) continue;
        auto it = catalog.find(p);
        if (it == catalog.end()) tall += (tall.empty() ? "" : ",") + p + "(no height)";
        else if (heights_known && it->second.height_mm > max_h) tall += (tall.empty() ? "" : ",") + p;
    }
    add("height", tall.empty(), tall);
    return rep;
}

// ---------------- I/O ----------------

StateFile state_from_json(std::string_view text) {
    StateFile f;
    try {
        auto j = json::parse(text);
        f.state.display_id = j.at("display_id").get<std::string>();
        f.state.store_id = j.at("store_id").get<std::string>();
        f.state.capacity = j.at("capacity").get<int>();
        for (const auto& [p, q] : j.at("slots").items()) f.state.slots[p] = q.get<int>();
        if (j.contains("cluster") && !j.at("cluster").is_null()) f.cluster = j.at("cluster").get<int>();
        if (j.contains("decay_state")) {
            for (const auto& [p, e] : j.at("decay_state").items()) f.decay_state[p] = {e.at(0), e.at(1)};
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("state JSON: ") + e.what());
    }
    f.state.validate();
    return f;
}

std::string state_to_json(const StateFile& f) {
    json j;
    j["display_id"] = f.state.display_id;
    j["store_id"] = f.state.store_id;
    j["capacity"] = f.state.capacity;
    j["slots"] = f.state.slots;
    if (f.cluster) j["cluster"] = *f.cluster;
    json d = json::object();
    for (const auto& [p, e] : f.decay_state) d[p] = {e.t, e.q0};
    j["decay_state"] = d;
    return j.dump(2) + "\n";
}

std::string recommendation_to_json(const RecommendationSet& rec, const SearchConfig& cfg) {
    json j;
    j["display_id"] = rec.display_id;
    j["assignment"] = rec.assignment;
    json prov = json::object();
    for (const auto& [p, v] : rec.provenance) prov[p] = std::string(to_string(v));
    j["provenance"] = prov;
    json table = json::object();
    for (const auto& [p, s] : rec.pepf_table) {
        table[p] = {{"quantity", s.quantity}, {"mean_payoff", s.mean_payoff}, {"sd_payoff", s.sd_payoff},
                    {"pepf", s.pepf}, {"lambda", s.lambda}};
    }
    j["pepf_table"] = table;
    json swaps = json::array();
    for (const auto& s : rec.swaps) {
        swaps.push_back({{"victim", s.victim}, {"replacement", s.replacement}, {"quantity", s.quantity},
                         {"random", s.random}});
    }
    j["swaps"] = swaps;
    j["guarded"] = rec.guarded;
    j["truncated_units"] = rec.truncated_units;
    json d = json::object();
    for (const auto& [p, e] : rec.decay_state) d[p] = {e.t, e.q0};
    j["decay_state"] = d;
    j["seed"] = rec.seed;
    j["config"] = {{"V", cfg.V}, {"epsilon", cfg.epsilon}, {"lambda", cfg.lambda}, {"T", cfg.T}};
    return j.dump(2) + "\n";
}

}  // namespace shelfrec::search
