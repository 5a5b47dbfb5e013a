#include <doctest.h>

#include <cmath>

#include "gen.hpp"
#include "shelfrec/search.hpp"

using namespace shelfrec;
using namespace shelfrec::search;

TEST_SUITE_BEGIN("search");

namespace {

Scorer table_scorer(std::map<ProductId, double> pepf) {
    return [pepf](const ProductId& p, int q) {
        reward::PepfScore s;
        s.product_id = p;
        s.quantity = q;
        s.mean_payoff = s.pepf = pepf.at(p);
        return s;
    };
}

DisplayState two_product_state() {
    DisplayState s;
    s.display_id = "D1";
    s.store_id = "S1";
    s.capacity = 8;
    s.slots = {{"A", 4}, {"B", 4}};
    return s;
}

candidates::CandidateSet cands(std::vector<ProductId> ps) {
    candidates::CandidateSet c;
    c.display_id = "D1";
    for (const auto& p : ps) c.candidates.push_back({p, 1.0 / static_cast<double>(ps.size())});
    return c;
}

}  // namespace

TEST_CASE("decay halves with floor") {
    CHECK(decay(0, 5) == 5);
    CHECK(decay(1, 5) == 2);
    CHECK(decay(2, 5) == 1);
    CHECK(decay(3, 5) == 0);
    for (int q0 = 1; q0 <= 1024; ++q0) {
        const int t0 = static_cast<int>(std::floor(std::log2(q0))) + 1;
        CHECK(decay(t0, q0) == 0);
        CHECK(decay(t0 - 1, q0) >= 1);
    }
    CHECK_THROWS_AS(decay(-1, 3), ArgumentError);
}

TEST_CASE("hand trace: weakest product decays into the best candidate") {
    SearchConfig cfg;
    cfg.V = 1;
    cfg.epsilon = 0.0;
    const auto rec = recommend(two_product_state(), cands({"C"}), table_scorer({{"A", 0.1}, {"B", 3.0}, {"C", 2.5}}), cfg);
    CHECK(rec.assignment == Assignment{{"A", 2}, {"B", 4}, {"C", 2}});
    CHECK(rec.provenance.at("A") == Provenance::Decayed);
    CHECK(rec.provenance.at("B") == Provenance::Kept);
    CHECK(rec.provenance.at("C") == Provenance::SwappedGreedy);
    CHECK(rec.decay_state.at("A") == DecayEntry{1, 4});
    REQUIRE(rec.swaps.size() == 1);
    CHECK(rec.swaps[0] == Swap{"A", "C", 2, false});

    // threading the decay state continues the halving
    cfg.decay_state = rec.decay_state;
    DisplayState next = two_product_state();
    next.slots = rec.assignment;
    const auto rec2 = recommend(next, cands({"C", "E"}), table_scorer({{"A", 0.1}, {"B", 3.0}, {"C", 2.5}, {"E", 1.0}}), cfg);
    CHECK(rec2.assignment == Assignment{{"A", 1}, {"B", 4}, {"C", 2}, {"E", 1}});
    CHECK(rec2.decay_state.at("A") == DecayEntry{2, 4});
}

TEST_CASE("guard: no harmful swap under epsilon zero") {
    SearchConfig cfg;
    cfg.V = 2;
    cfg.epsilon = 0.0;
    const auto rec = recommend(two_product_state(), cands({"C", "E"}),
                               table_scorer({{"A", 2.0}, {"B", 3.0}, {"C", 1.0}, {"E", 0.5}}), cfg);
    CHECK(rec.assignment == two_product_state().slots);
    CHECK(rec.swaps.empty());
    CHECK(rec.guarded.size() == 2);
}

TEST_CASE("epsilon one swaps in uniformly over candidates") {
    SearchConfig cfg;
    cfg.V = 1;
    cfg.epsilon = 1.0;
    const auto scorer = table_scorer({{"A", 0.1}, {"B", 3.0}, {"C", 2.5}, {"E", 0.2}, {"F", 9.0}, {"G", 0.0}});
    std::map<ProductId, int> freq;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        cfg.seed = static_cast<std::uint64_t>(i);
        const auto rec = recommend(two_product_state(), cands({"C", "E", "F", "G"}), scorer, cfg);
        REQUIRE(rec.swaps.size() == 1);
        CHECK(rec.swaps[0].random);
        ++freq[rec.swaps[0].replacement];
    }
    CHECK(freq.size() == 4);
    for (const auto& [p, k] : freq) CHECK(std::abs(k - n / 4.0) < 3 * std::sqrt(n * 0.25 * 0.75));
}

TEST_CASE("empty candidate set tops up a surviving product") {
    SearchConfig cfg;
    cfg.V = 1;
    cfg.epsilon = 0.0;
    const auto rec = recommend(two_product_state(), cands({}), table_scorer({{"A", 0.1}, {"B", 3.0}}), cfg);
    CHECK(rec.assignment == Assignment{{"A", 2}, {"B", 6}});
    CHECK(rec.provenance.at("B") == Provenance::Topped);
}

TEST_CASE("fill truncates an over-budget state by PEPF") {
    auto s = two_product_state();
    s.capacity = 6;
    SearchConfig cfg;
    cfg.V = 1;
    cfg.epsilon = 0.0;
    const auto rec = recommend(s, cands({}), table_scorer({{"A", 0.1}, {"B", 3.0}}), cfg);
    CHECK(rec.assignment == Assignment{{"B", 6}});
    CHECK(rec.truncated_units == 2);
    const auto rec2 = recommend(s, cands({"C"}), table_scorer({{"A", 1.0}, {"B", 3.0}, {"C", 0.5}}), cfg);
    CHECK(rec2.assignment == Assignment{{"A", 2}, {"B", 4}});
    CHECK(rec2.truncated_units == 2);
}

TEST_CASE("recommendation is a pure function of its seed") {
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        const auto s = gen::display_state(rng, 12, 8);
        const auto c = gen::candidate_set(rng, s, 12, 5);
        std::map<ProductId, double> pe;
        for (int p = 0; p < 12; ++p) pe[gen::product(p)] = gen::real_in(rng, 0, 3);
        SearchConfig cfg;
        cfg.epsilon = 0.3;
        cfg.seed = rng();
        CHECK(recommend(s, c, table_scorer(pe), cfg) == recommend(s, c, table_scorer(pe), cfg));
    }
}

TEST_CASE("validation checks") {
    SearchConfig cfg;
    cfg.V = 1;
    cfg.epsilon = 0.0;
    const auto state = two_product_state();
    const auto cs = cands({"C"});
    std::vector<ingest::Product> prods;
    for (const auto* p : {"A", "B", "C", "X"}) prods.push_back({p, p, SubCategory::Water, std::string(p) == "X" ? 300.0 : 200.0, 66});
    const auto cat = candidates::make_catalog(prods);
    auto rec = recommend(state, cs, table_scorer({{"A", 0.1}, {"B", 3.0}, {"C", 2.5}}), cfg);
    CHECK(validate(rec, state, cs, cat).pass);

    rec.assignment["B"] = 5;
    auto r = validate(rec, state, cs, cat);
    CHECK_FALSE(r.pass);
    CHECK(r.overflow == 1);
    CHECK(r.checks[0].name == "budget");
    CHECK(r.checks[0].detail == "overflow 1");

    rec.assignment["B"] = 4;
    rec.assignment["X"] = 0;
    r = validate(rec, state, cs, cat);
    CHECK_FALSE(r.pass);
    bool provenance_failed = false, positivity_failed = false;
    for (const auto& c : r.checks) {
        if (c.name == "provenance") provenance_failed = !c.pass;
        if (c.name == "positivity") positivity_failed = !c.pass;
    }
    CHECK(provenance_failed);
    CHECK(positivity_failed);
}

TEST_CASE("config validation") {
    SearchConfig cfg;
    cfg.V = 0;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    cfg.V = 1;
    cfg.epsilon = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    DisplayState s;
    s.capacity = 0;
    CHECK_THROWS_AS(s.validate(), ArgumentError);
}

TEST_CASE("state and recommendation json") {
    StateFile f;
    f.state = two_product_state();
    f.cluster = 2;
    f.decay_state["A"] = {1, 4};
    const auto back = state_from_json(state_to_json(f));
    CHECK(back.state == f.state);
    CHECK(back.cluster == f.cluster);
    CHECK(back.decay_state == f.decay_state);
    CHECK(parse_provenance(to_string(Provenance::SwappedRandom)) == Provenance::SwappedRandom);
    CHECK_THROWS(parse_provenance("nope"));
}

TEST_SUITE_END();
