#include "shelfrec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "shelfrec/csv.hpp"

namespace shelfrec::evaluation {

namespace {

std::set<ProductId> keys(const Assignment& a) {
    std::set<ProductId> s;
    for (const auto& [p, q] : a) s.insert(p);
    return s;
}

}  // namespace

double jaccard(const std::set<ProductId>& a, const std::set<ProductId>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& x : a) inter += b.count(x);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

double compliance(const std::set<ProductId>& recommended, const std::set<ProductId>& observed) {
    return jaccard(recommended, observed);
}

bool MatchRule::matches(const Assignment& a, const Assignment& b) const {
    const auto ka = keys(a);
    const auto kb = keys(b);
    if (kind == MatchKind::ExactSet) return ka == kb;
    return jaccard(ka, kb) >= theta;
}

// ---------------- replay ----------------

namespace {

std::vector<std::size_t> subsample_indices(std::size_t n, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("replay: subsample must lie in (0, 1]");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(mix_seed(seed, 0));
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
    const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    idx.resize(std::min(keep, n));
    std::sort(idx.begin(), idx.end());
    return idx;
}

ReplayReport finish(std::vector<double> credited, std::size_t total, std::size_t logged, double fraction,
                    std::uint64_t seed) {
    ReplayReport rep;
    rep.total_count = total;
    rep.logged_count = logged;
    rep.subsample_fraction = fraction;
    rep.seed = seed;
    rep.matched_count = credited.size();
    if (credited.empty()) {
        rep.mean_reward = rep.median_reward = rep.std_reward = std::numeric_limits<double>::quiet_NaN();
        return rep;
    }
    const auto s = summarize(std::move(credited));
    rep.defined = true;
    rep.mean_reward = s.mean;
    rep.median_reward = s.median;
    rep.std_reward = s.sd;
    return rep;
}

std::uint64_t event_seed(std::uint64_t seed, std::size_t idx) {
    return mix_seed(mix_seed(seed, 1), idx);
}

}  // namespace

ReplayReport replay_evaluate_serial(const Policy& policy, const std::vector<LoggedInteraction>& logs,
                                    double subsample, const MatchRule& rule, std::uint64_t seed) {
    const auto idx = subsample_indices(logs.size(), subsample, seed);
    std::vector<double> credited;
    for (std::size_t i : idx) {
        Rng rng(event_seed(seed, i));
        if (rule.matches(policy(logs[i], rng), logs[i].chosen)) credited.push_back(logs[i].reward);
    }
    return finish(std::move(credited), idx.size(), logs.size(), subsample, seed);
}

ReplayReport replay_evaluate(const Policy& policy, const std::vector<LoggedInteraction>& logs, double subsample,
                             const MatchRule& rule, std::uint64_t seed) {
    const auto idx = subsample_indices(logs.size(), subsample, seed);
    std::vector<char> hit(idx.size(), 0);
    const long long n = static_cast<long long>(idx.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (long long k = 0; k < n; ++k) {
        const std::size_t i = idx[k];
        Rng rng(event_seed(seed, i));
        hit[k] = rule.matches(policy(logs[i], rng), logs[i].chosen) ? 1 : 0;
    }
    std::vector<double> credited;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (hit[k]) credited.push_back(logs[idx[k]].reward);
    }
    return finish(std::move(credited), idx.size(), logs.size(), subsample, seed);
}

// ---------------- DID ----------------

DidReport did_from_means(double pre_treat, double post_treat, double pre_control, double post_control) {
    DidReport r;
    r.pre_treat = pre_treat;
    r.post_treat = post_treat;
    r.pre_control = pre_control;
    r.post_control = post_control;
    r.did_units = (post_treat - pre_treat) - (post_control - pre_control);
    r.did_percent = 100.0 * ((post_treat - pre_treat) / pre_treat - (post_control - pre_control) / pre_control);
    r.p_value = std::numeric_limits<double>::quiet_NaN();
    return r;
}

DidReport did_estimate(const std::vector<PanelRow>& panel) {
    double sum[2][2] = {{0, 0}, {0, 0}};
    int cnt[2][2] = {{0, 0}, {0, 0}};
    for (const auto& r : panel) {
        const int g = r.group == Group::Treat ? 0 : 1;
        const int p = r.period == Period::Pre ? 0 : 1;
        sum[g][p] += r.value;
        ++cnt[g][p];
    }
    const char* names[2][2] = {{"treat/pre", "treat/post"}, {"control/pre", "control/post"}};
    for (int g = 0; g < 2; ++g) {
        for (int p = 0; p < 2; ++p) {
            if (cnt[g][p] == 0) throw ArgumentError(std::string("did_estimate: empty cell ") + names[g][p]);
        }
    }
    return did_from_means(sum[0][0] / cnt[0][0], sum[0][1] / cnt[0][1], sum[1][0] / cnt[1][0],
                          sum[1][1] / cnt[1][1]);
}

namespace {

struct UnitSums {
    Group group = Group::Treat;
    double sum[2] = {0, 0};
    int n[2] = {0, 0};
};

std::vector<UnitSums> collect_units(const std::vector<PanelRow>& panel) {
    std::map<std::string, UnitSums> units;
    std::map<std::string, bool> seen;
    for (const auto& r : panel) {
        auto& u = units[r.unit_id];
        if (seen[r.unit_id] && u.group != r.group) {
            throw ArgumentError("permutation_test: unit '" + r.unit_id + "' appears in both groups");
        }
        seen[r.unit_id] = true;
        u.group = r.group;
        const int p = r.period == Period::Pre ? 0 : 1;
        u.sum[p] += r.value;
        ++u.n[p];
    }
    std::vector<UnitSums> out;
    int n_treat = 0, n_control = 0;
    for (const auto& [id, u] : units) {
        if (u.n[0] == 0 || u.n[1] == 0) {
            throw ArgumentError("permutation_test: unit '" + id + "' lacks a pre or post observation");
        }
        (u.group == Group::Treat ? n_treat : n_control)++;
        out.push_back(u);
    }
    if (n_treat < 2 || n_control < 2) throw ArgumentError("permutation_test: each group needs at least 2 units");
    return out;
}

double did_of(const std::vector<UnitSums>& units, const std::vector<Group>& labels) {
    double s[2][2] = {{0, 0}, {0, 0}};
    double n[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < units.size(); ++i) {
        const int g = labels[i] == Group::Treat ? 0 : 1;
        for (int p = 0; p < 2; ++p) {
            s[g][p] += units[i].sum[p];
            n[g][p] += units[i].n[p];
        }
    }
    return (s[0][1] / n[0][1] - s[0][0] / n[0][0]) - (s[1][1] / n[1][1] - s[1][0] / n[1][0]);
}

double permuted_did(const std::vector<UnitSums>& units, std::vector<Group> labels, std::uint64_t seed, int k) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
    for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[uniform_index(rng, i)]);
    return did_of(units, labels);
}

PermutationResult finish_perm(double observed, const std::vector<double>& perms) {
    PermutationResult r;
    r.observed = observed;
    r.n_permutations = static_cast<int>(perms.size());
    const double cutoff = std::abs(observed) - 1e-12 * std::max(1.0, std::abs(observed));
    for (double d : perms) r.extreme += std::abs(d) >= cutoff ? 1 : 0;
    r.p_value = (1.0 + r.extreme) / (1.0 + static_cast<double>(perms.size()));
    return r;
}

}  // namespace

PermutationResult permutation_test_serial(const std::vector<PanelRow>& panel, int n_permutations,
                                          std::uint64_t seed) {
    if (n_permutations < 100) throw ArgumentError("permutation_test: n_permutations must be >= 100");
    const auto units = collect_units(panel);
    std::vector<Group> labels;
    for (const auto& u : units) labels.push_back(u.group);
    std::vector<double> perms(n_permutations);
    for (int k = 0; k < n_permutations; ++k) perms[k] = permuted_did(units, labels, seed, k);
    return finish_perm(did_of(units, labels), perms);
}

PermutationResult permutation_test(const std::vector<PanelRow>& panel, int n_permutations, std::uint64_t seed) {
    if (n_permutations < 100) throw ArgumentError("permutation_test: n_permutations must be >= 100");
    const auto units = collect_units(panel);
    std::vector<Group> labels;
    for (const auto& u : units) labels.push_back(u.group);
    std::vector<double> perms(n_permutations);
#pragma omp parallel for schedule(static)
    for (int k = 0; k < n_permutations; ++k) perms[k] = permuted_did(units, labels, seed, k);
    return finish_perm(did_of(units, labels), perms);
}

// ---------------- I/O ----------------

namespace {

std::vector<ProductId> product_list(std::string_view s) {
    std::vector<ProductId> out;
    for (auto& p : split(s, '|')) {
        auto t = trim(p);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

}  // namespace

std::vector<LoggedInteraction> logs_from_csv(std::string_view text) {
    auto t = csv::read_string(text);
    const auto c_d = t.require_column("display_id");
    const auto c_t = t.require_column("timestamp");
    const auto c_o = t.require_column("offered_products");
    const auto c_c = t.require_column("chosen_products");
    const auto c_q = t.require_column("chosen_quantities");
    const auto c_r = t.require_column("reward");
    const auto c_s = t.column("store_id");
    const auto c_cap = t.column("capacity");
    const auto c_oq = t.column("offered_quantities");
    std::vector<LoggedInteraction> out;
    for (const auto& r : t.rows) {
        const std::string where = "logs CSV line " + std::to_string(r.line);
        if (r.fields.size() != t.header.size()) throw ParseError(where + ": field count mismatch");
        LoggedInteraction e;
        e.display_id = trim(r.fields[c_d]);
        e.timestamp = parse_iso8601(trim(r.fields[c_t]));
        const auto offered = product_list(r.fields[c_o]);
        const auto chosen = product_list(r.fields[c_c]);
        const auto qty = product_list(r.fields[c_q]);
        if (qty.size() != chosen.size()) throw ParseError(where + ": chosen quantities do not match products");
        int chosen_total = 0;
        for (std::size_t i = 0; i < chosen.size(); ++i) {
            const int q = static_cast<int>(parse_int(qty[i]));
            if (q < 1) throw ParseError(where + ": chosen quantity must be >= 1");
            e.chosen[chosen[i]] = q;
            chosen_total += q;
        }
        e.reward = parse_double(r.fields[c_r]);
        if (!(e.reward >= 0.0)) throw ParseError(where + ": reward must be non-negative");
        e.offered_state.display_id = e.display_id;
        if (c_s != csv::npos) e.offered_state.store_id = trim(r.fields[c_s]);
        std::vector<std::string> oq;
        if (c_oq != csv::npos) oq = product_list(r.fields[c_oq]);
        if (!oq.empty() && oq.size() != offered.size()) throw ParseError(where + ": offered quantities mismatch");
        int offered_total = 0;
        for (std::size_t i = 0; i < offered.size(); ++i) {
            const int q = oq.empty() ? 1 : static_cast<int>(parse_int(oq[i]));
            e.offered_state.slots[offered[i]] = q;
            offered_total += q;
        }
        e.offered_state.capacity = (c_cap != csv::npos && !trim(r.fields[c_cap]).empty())
                                       ? static_cast<int>(parse_int(r.fields[c_cap]))
                                       : std::max({chosen_total, offered_total, 1});
        if (chosen_total > e.offered_state.capacity) throw ParseError(where + ": chosen assignment exceeds capacity");
        out.push_back(std::move(e));
    }
    return out;
}

std::string logs_to_csv(const std::vector<LoggedInteraction>& logs) {
    std::string out =
        "display_id,timestamp,offered_products,chosen_products,chosen_quantities,reward,store_id,capacity,"
        "offered_quantities\n";
    for (const auto& e : logs) {
        std::vector<std::string> op, oq, cp, cq;
        for (const auto& [p, q] : e.offered_state.slots) {
            op.push_back(p);
            oq.push_back(std::to_string(q));
        }
        for (const auto& [p, q] : e.chosen) {
            cp.push_back(p);
            cq.push_back(std::to_string(q));
        }
        out += csv::format_row({e.display_id, format_iso8601(e.timestamp), join(op, '|'), join(cp, '|'), join(cq, '|'),
                                format_double(e.reward), e.offered_state.store_id,
                                std::to_string(e.offered_state.capacity), join(oq, '|')});
    }
    return out;
}

std::vector<PanelRow> panel_from_csv(std::string_view text) {
    auto t = csv::read_string(text);
    const auto c_u = t.require_column("unit_id");
    const auto c_g = t.require_column("group");
    const auto c_p = t.require_column("period");
    const auto c_v = t.require_column("value");
    std::vector<PanelRow> out;
    for (const auto& r : t.rows) {
        const std::string where = "panel CSV line " + std::to_string(r.line);
        if (r.fields.size() != t.header.size()) throw ParseError(where + ": field count mismatch");
        PanelRow row;
        row.unit_id = trim(r.fields[c_u]);
        const auto g = trim(r.fields[c_g]);
        const auto p = trim(r.fields[c_p]);
        if (g == "treat") row.group = Group::Treat;
        else if (g == "control") row.group = Group::Control;
        else throw ParseError(where + ": group must be treat or control");
        if (p == "pre") row.period = Period::Pre;
        else if (p == "post") row.period = Period::Post;
        else throw ParseError(where + ": period must be pre or post");
        row.value = parse_double(r.fields[c_v]);
        out.push_back(row);
    }
    return out;
}

std::string panel_to_csv(const std::vector<PanelRow>& panel) {
    std::string out = "unit_id,group,period,value\n";
    for (const auto& r : panel) {
        out += csv::format_row({r.unit_id, r.group == Group::Treat ? "treat" : "control",
                                r.period == Period::Pre ? "pre" : "post", format_double(r.value)});
    }
    return out;
}

}  // namespace shelfrec::evaluation
