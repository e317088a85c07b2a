#include "doctest.h"

#include <random>

#include "specdep/tsg.hpp"
#include "testutil.hpp"

using namespace specdep;

namespace {

NodeId id(std::uint32_t v) { return NodeId{v}; }

/// Seven-node reference graph: A=0 .. G=6 with edges A->B, A->C, B->D, C->D,
/// C->E, D->F, E->F, F->G. Reproduces every documented ordering fact.
Tsg reference_graph() {
    Tsg g;
    for (const char* l : {"A", "B", "C", "D", "E", "F", "G"})
        g.add_node(l);
    g.add_edge(id(0), id(1), EdgeKind::DataDep);
    g.add_edge(id(0), id(2), EdgeKind::DataDep);
    g.add_edge(id(1), id(3), EdgeKind::DataDep);
    g.add_edge(id(2), id(3), EdgeKind::DataDep);
    g.add_edge(id(2), id(4), EdgeKind::DataDep);
    g.add_edge(id(3), id(5), EdgeKind::DataDep);
    g.add_edge(id(4), id(5), EdgeKind::DataDep);
    g.add_edge(id(5), id(6), EdgeKind::DataDep);
    return g;
}

Ordering make_order(std::initializer_list<std::uint32_t> ids) {
    Ordering o;
    for (std::uint32_t v : ids)
        o.push_back(id(v));
    return o;
}

}  // namespace

TEST_CASE("node ids are dense and start at zero") {
    Tsg g;
    CHECK(g.add_node("A").value == 0);
    for (std::uint32_t i = 1; i < 6; ++i)
        CHECK(g.add_node("n").value == i);
    CHECK(g.node_count() == 6);
}

TEST_CASE("self edges are rejected") {
    Tsg g;
    NodeId a = g.add_node("A");
    CHECK_THROWS_AS(g.add_edge(a, a, EdgeKind::DataDep), SelfEdgeError);
}

TEST_CASE("closing a three-cycle is rejected and leaves the graph unchanged") {
    Tsg g;
    NodeId a = g.add_node("A"), b = g.add_node("B"), c = g.add_node("C");
    g.add_edge(a, b, EdgeKind::DataDep);
    g.add_edge(b, c, EdgeKind::DataDep);
    std::size_t before = g.edges().size();
    CHECK_THROWS_AS(g.add_edge(c, a, EdgeKind::DataDep), CycleError);
    CHECK(g.edges().size() == before);
    CHECK_FALSE(g.has_path(c, a));
}

TEST_CASE("duplicate edges are idempotent no-ops") {
    Tsg g;
    NodeId a = g.add_node("A"), b = g.add_node("B");
    CHECK(g.add_edge(a, b, EdgeKind::DataDep));
    CHECK_FALSE(g.add_edge(a, b, EdgeKind::DataDep));
    CHECK(g.edges().size() == 1);
    // a second kind between the same nodes is a distinct edge
    CHECK(g.add_edge(a, b, EdgeKind::FenceOrder));
    CHECK(g.edges().size() == 2);
}

TEST_CASE("reference graph accepts the two documented orderings and rejects the third") {
    Tsg g = reference_graph();
    CHECK(g.is_valid_ordering(make_order({0, 1, 2, 3, 4, 5, 6})));  // A B C D E F G
    CHECK(g.is_valid_ordering(make_order({0, 2, 4, 1, 3, 5, 6})));  // A C E B D F G
    CHECK_FALSE(g.is_valid_ordering(make_order({0, 1, 3, 4, 2, 5, 6})));  // A B D E C F G
}

TEST_CASE("orderings must be permutations") {
    Tsg g = reference_graph();
    CHECK_THROWS_AS(g.is_valid_ordering(make_order({0, 1, 2})), PermutationError);
    CHECK_THROWS_AS(g.is_valid_ordering(make_order({0, 0, 1, 2, 3, 4, 5})), PermutationError);
}

TEST_CASE("ordering enumeration is exact and lexicographic") {
    SUBCASE("two isolated nodes") {
        Tsg g;
        g.add_node("A");
        g.add_node("B");
        auto all = g.enumerate_valid_orderings();
        REQUIRE(all.size() == 2);
        CHECK(all[0] == make_order({0, 1}));
        CHECK(all[1] == make_order({1, 0}));
    }
    SUBCASE("two chained nodes") {
        Tsg g;
        NodeId a = g.add_node("A"), b = g.add_node("B");
        g.add_edge(a, b, EdgeKind::DataDep);
        auto all = g.enumerate_valid_orderings();
        REQUIRE(all.size() == 1);
        CHECK(all[0] == make_order({0, 1}));
    }
    SUBCASE("reference graph has exactly five orderings, including both documented ones") {
        Tsg g = reference_graph();
        auto all = g.enumerate_valid_orderings();
        CHECK(all.size() == 5);  // frozen from the enumeration oracle
        auto contains = [&](const Ordering& o) {
            return std::find(all.begin(), all.end(), o) != all.end();
        };
        CHECK(contains(make_order({0, 1, 2, 3, 4, 5, 6})));
        CHECK(contains(make_order({0, 2, 4, 1, 3, 5, 6})));
        CHECK(std::is_sorted(all.begin(), all.end()));
    }
    SUBCASE("cap truncates") {
        Tsg g;
        for (int i = 0; i < 4; ++i)
            g.add_node("n");
        CHECK(g.enumerate_valid_orderings(5).size() == 5);
    }
    SUBCASE("oversize graphs need a cap") {
        Tsg g;
        for (int i = 0; i < 11; ++i)
            g.add_node("n");
        CHECK_THROWS_AS(g.enumerate_valid_orderings(), LimitError);
        CHECK(g.enumerate_valid_orderings(3).size() == 3);
    }
}

TEST_CASE("reachability follows directed paths only") {
    Tsg g = reference_graph();
    CHECK(g.has_path(id(1), id(5)));        // B -> D -> F
    CHECK_FALSE(g.has_path(id(3), id(4)));  // D and E are incomparable
    CHECK_FALSE(g.has_path(id(4), id(3)));
    CHECK(g.has_path(id(3), id(3)));  // trivially reaches itself
}

TEST_CASE("race condition is the absence of a connecting path") {
    Tsg g = reference_graph();
    CHECK(g.race_condition(id(3), id(4)));        // D, E
    CHECK_FALSE(g.race_condition(id(1), id(3)));  // edge B -> D
    CHECK_THROWS_AS(g.race_condition(id(3), id(3)), SameNodeError);

    SUBCASE("total order has no races") {
        Tsg chain;
        for (int i = 0; i < 5; ++i)
            chain.add_node("n");
        for (std::uint32_t i = 0; i + 1 < 5; ++i)
            chain.add_edge(id(i), id(i + 1), EdgeKind::DataDep);
        for (std::uint32_t i = 0; i < 5; ++i)
            for (std::uint32_t j = i + 1; j < 5; ++j)
                CHECK_FALSE(chain.race_condition(id(i), id(j)));
    }
}

TEST_CASE("ordering-definition oracle agrees on the reference graph") {
    Tsg g = reference_graph();
    CHECK(g.race_oracle(id(3), id(4)));
    CHECK_FALSE(g.race_oracle(id(1), id(3)));
    CHECK_THROWS_AS(g.race_oracle(id(3), id(3)), SameNodeError);

    Tsg big;
    for (int i = 0; i < 11; ++i)
        big.add_node("n");
    CHECK_THROWS_AS(big.race_oracle(id(0), id(1)), LimitError);
}

TEST_CASE("all_races reports the reference graph's incomparable pairs with sound witnesses") {
    Tsg g = reference_graph();
    auto races = g.all_races();
    REQUIRE(races.size() == 3);  // B-C, B-E, D-E
    bool saw_de = false;
    for (const RacePair& r : races) {
        CHECK(g.race_condition(r.a, r.b));
        REQUIRE(r.witness_orderings.has_value());
        const auto& [first, second] = *r.witness_orderings;
        CHECK(g.is_valid_ordering(first));
        CHECK(g.is_valid_ordering(second));
        auto pos = [](const Ordering& o, NodeId n) {
            return std::find(o.begin(), o.end(), n) - o.begin();
        };
        CHECK(pos(first, r.a) < pos(first, r.b));
        CHECK(pos(second, r.b) < pos(second, r.a));
        if (r.a == id(3) && r.b == id(4))
            saw_de = true;
    }
    CHECK(saw_de);

    SUBCASE("filtered to {A, B, C}: B and C race") {
        auto filtered = g.all_races(std::vector<NodeId>{id(0), id(1), id(2)});
        REQUIRE(filtered.size() == 1);
        CHECK(filtered[0].a == id(1));
        CHECK(filtered[0].b == id(2));
    }
    SUBCASE("empty graph has no races") {
        Tsg empty;
        CHECK(empty.all_races().empty());
    }
}

TEST_CASE("reachability race check matches the enumeration oracle on random DAGs") {
    std::mt19937 rng(7);
    for (int iter = 0; iter < 300; ++iter) {
        Tsg g = testutil::random_oracle_dag(rng);
        auto matrix = testutil::oracle_race_matrix(g);
        const int n = static_cast<int>(g.node_count());
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b) {
                bool oracle = matrix[a][b] == 3;
                bool reach = g.race_condition(id(a), id(b));
                REQUIRE_MESSAGE(oracle == reach, "mismatch on pair (", a, ",", b, ") iter ", iter);
            }
    }
}

TEST_CASE("adding an edge never creates a new race") {
    std::mt19937 rng(11);
    for (int iter = 0; iter < 100; ++iter) {
        Tsg g = testutil::random_dag(rng, 8, 0.3);
        auto races_before = g.all_races();
        std::set<std::pair<std::uint32_t, std::uint32_t>> before;
        for (const RacePair& r : races_before)
            before.emplace(r.a.value, r.b.value);
        std::uniform_int_distribution<std::uint32_t> pick(0, 7);
        std::uint32_t u = pick(rng), v = pick(rng);
        if (u == v)
            continue;
        try {
            g.add_edge(id(u), id(v), EdgeKind::SecurityDep);
        } catch (const CycleError&) {
            continue;
        }
        for (const RacePair& r : g.all_races())
            CHECK(before.count({r.a.value, r.b.value}) == 1);
    }
}

TEST_CASE("identical construction sequences enumerate identically") {
    auto build = [] {
        Tsg g = reference_graph();
        return g.enumerate_valid_orderings();
    };
    CHECK(build() == build());
}
