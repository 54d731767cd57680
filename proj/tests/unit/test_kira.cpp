#include <doctest.h>

#include <random>

#include "common/error.hpp"
#include "kira/kira.hpp"
#include "oracle/bfs.hpp"
#include "support/gen.hpp"

using namespace nds;
using namespace nds::kira;

namespace {

Topology line(std::initializer_list<const char *> names) {
    Topology t;
    const char *prev = nullptr;
    for (const auto *n : names) {
        t.add_node(n);
        if (prev)
            t.add_link(prev, n);
        prev = n;
    }
    return t;
}

Topology random_connected(std::mt19937_64 &rng, int n) {
    Topology t;
    for (int i = 0; i < n; ++i)
        t.add_node(gen::node_name(i));
    for (const auto &[a, b] : gen::connected_graph(rng, n, 3.0))
        t.add_link(gen::node_name(a), gen::node_name(b));
    return t;
}

} // namespace

TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("xor distance") {
    CHECK(xor_distance(NodeId{0x5}, NodeId{0x3}) == 0x6);
    CHECK(xor_distance(NodeId{0x1234}, NodeId{0x1234}) == 0);
    CHECK(xor_distance(NodeId{0}, NodeId{0xFFFFFFFFFFFFFFFFULL}) == 0xFFFFFFFFFFFFFFFFULL);
}

TEST_CASE("topology validation") {
    Topology t;
    t.add_node("a");
    CHECK_THROWS_AS(t.add_link("a", "b"), ValidationError);
    CHECK_THROWS_AS(t.add_link("a", "a"), ValidationError);
    CHECK_THROWS_AS(t.attach("a", "a"), ValidationError);
    CHECK_THROWS_AS(t.add_node(""), ValidationError);
}

TEST_CASE("converge") {
    SUBCASE("line of three") {
        const auto t = line({"A", "B", "C"});
        const auto tables = converge(t, 3);
        const auto &e = tables.at("A").entries.at(NodeId::of("C"));
        CHECK(e.next_hop == "B");
        CHECK(e.hop_count == 2);
        CHECK(e.hop_count == oracle::bfs(t, "A").at("C"));
    }
    SUBCASE("single node") {
        Topology t;
        t.add_node("solo");
        for (int r : {1, 5})
            CHECK(converge(t, r).at("solo").entries.empty());
    }
    SUBCASE("two components") {
        Topology t;
        for (const auto *n : {"A", "B", "C"})
            t.add_node(n);
        t.add_link("A", "B");
        const auto tables = converge(t, 4);
        CHECK_FALSE(tables.at("A").entries.contains(NodeId::of("C")));
        CHECK(tables.at("A").entries.contains(NodeId::of("B")));
    }
    SUBCASE("too few rounds leave far nodes unknown") {
        const auto t = line({"A", "B", "C", "D"});
        CHECK_FALSE(converge(t, 2).at("A").entries.contains(NodeId::of("D")));
        CHECK(converge(t, 3).at("A").entries.contains(NodeId::of("D")));
    }
    SUBCASE("contacts are the closest ids by xor") {
        std::mt19937_64 rng{5};
        const auto t = random_connected(rng, 30);
        const auto tables = converge(t, diameter(t) + 1);
        for (const auto &[name, table] : tables) {
            REQUIRE(table.contacts.size() == contact_count);
            std::vector<std::uint64_t> all;
            for (const auto &n : t.nodes())
                if (n != name)
                    all.push_back(xor_distance(NodeId::of(n), table.owner));
            std::sort(all.begin(), all.end());
            for (std::size_t i = 0; i < contact_count; ++i)
                CHECK(xor_distance(table.contacts[i], table.owner) == all[i]);
        }
    }
}

TEST_CASE("hop counts equal breadth-first distances on random graphs") {
    std::mt19937_64 rng{11};
    for (int iter = 0; iter < 20; ++iter) {
        const auto t = random_connected(rng, 5 + static_cast<int>(rng() % 40));
        const auto tables = converge(t, diameter(t) + 1);
        for (const auto &src : t.nodes()) {
            const auto dist = oracle::bfs(t, src);
            const auto &entries = tables.at(src).entries;
            CHECK(entries.size() == dist.size() - 1);
            for (const auto &[dst, d] : dist)
                if (dst != src)
                    CHECK(entries.at(NodeId::of(dst)).hop_count == d);
        }
    }
}

TEST_CASE("route") {
    const auto t = line({"A", "B", "C"});
    const auto tables = converge(t, 3);
    CHECK(route(tables, t, "A", NodeId::of("C")) == Path{"A", "B", "C"});
    CHECK(route(tables, t, "A", NodeId::of("A")) == Path{"A"});

    Topology split = t;
    split.add_node("X");
    const auto split_tables = converge(split, 3);
    CHECK_FALSE(route(split_tables, split, "A", NodeId::of("X")));
    CHECK_FALSE(route(split_tables, split, "nowhere", NodeId::of("A")));
}

TEST_CASE("dht") {
    SUBCASE("discovery from every node of a 20-node graph") {
        std::mt19937_64 rng{20};
        const auto t = random_connected(rng, 20);
        Network net{t};
        net.dht_put("n7", "spectrum-manager", "n7");
        int found = 0;
        for (const auto &n : t.nodes()) {
            const auto r = net.dht_get(n, "spectrum-manager");
            found += r && r->value == "n7";
            if (r)
                CHECK(static_cast<int>(r->hops) == oracle::bfs(t, n).at(r->holder));
        }
        CHECK(found == 20);
    }
    SUBCASE("unknown key") {
        Network net{line({"A", "B"})};
        CHECK_FALSE(net.dht_get("A", "nope"));
    }
    SUBCASE("home node is the xor-closest id") {
        Network net{line({"x", "y", "z"})};
        net.dht_put("x", "spectrum-manager", "x");
        const auto key = NodeId{fnv1a64("spectrum-manager")};
        std::string best;
        for (const auto *n : {"x", "y", "z"})
            if (best.empty() || xor_distance(NodeId::of(n), key) < xor_distance(NodeId::of(best), key))
                best = n;
        const auto &rec = net.dht().records().at(key.value);
        CHECK(rec.stored_at == NodeId::of(best));
        CHECK(rec.replicas.size() == 2);
        CHECK(net.dht().holds(best, key.value));
    }
}

TEST_CASE("relocation") {
    SUBCASE("route to the moved node goes through its new anchor") {
        auto t = line({"A", "B", "C", "D"});
        t.add_node("agv");
        t.attach("agv", "A");
        Network net{t};
        CHECK(net.route("A", NodeId::of("agv")) == Path{"A", "agv"});
        CHECK(net.relocate("agv", "D") == diameter(net.topology()) + 1);
        const auto p = net.route("A", NodeId::of("agv"));
        REQUIRE(p);
        CHECK(p->size() == static_cast<std::size_t>(oracle::bfs(net.topology(), "A").at("agv") + 1));
        CHECK((*p)[p->size() - 2] == "D");
    }
    SUBCASE("same anchor is a no-op") {
        auto t = line({"A", "B"});
        t.add_node("agv");
        t.attach("agv", "A");
        Network net{t};
        const auto before = net.tables();
        CHECK(net.relocate("agv", "A") == 0);
        CHECK(net.tables() == before);
        CHECK(relocate(t, "agv", "A") == t);
    }
    SUBCASE("static nodes cannot move") {
        const auto t = line({"A", "B"});
        CHECK_THROWS_AS(relocate(t, "A", "B"), ValidationError);
    }
    SUBCASE("discovery survives ten moves") {
        auto t = line({"sm", "a", "b", "c", "d", "e"});
        t.add_node("agv");
        t.attach("agv", "e");
        Network net{t};
        net.dht_put("sm", "spectrum-manager", "sm");
        const char *anchors[] = {"a", "b", "c", "d", "e", "sm", "c", "a", "e", "b"};
        for (const auto *a : anchors) {
            net.relocate("agv", a);
            const auto r = net.dht_get("agv", "spectrum-manager");
            REQUIRE(r);
            CHECK(r->value == "sm");
            CHECK(net.route("agv", NodeId::of("sm")));
        }
    }
}
