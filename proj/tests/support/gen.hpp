#pragma once

// Random inputs shared by the property tests and the acceptance binary.

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace gen {

using json = nlohmann::json;

inline std::string node_name(int i) { return "n" + std::to_string(i); }

/// Connected graph on n nodes: random spanning tree, then extra edges until the
/// average degree reaches `avg_degree` (or the graph is complete).
inline std::vector<std::pair<int, int>> connected_graph(std::mt19937_64 &rng, int n, double avg_degree) {
    std::set<std::pair<int, int>> edges;
    for (int i = 1; i < n; ++i) {
        const int parent = static_cast<int>(rng() % static_cast<std::uint64_t>(i));
        edges.insert({parent, i});
    }
    const auto target = std::min<std::size_t>(static_cast<std::size_t>(avg_degree * n / 2.0),
                                              static_cast<std::size_t>(n) * (n - 1) / 2);
    while (edges.size() < target) {
        int a = static_cast<int>(rng() % n), b = static_cast<int>(rng() % n);
        if (a == b)
            continue;
        edges.insert({std::min(a, b), std::max(a, b)});
    }
    return {edges.begin(), edges.end()};
}

inline int pick(std::mt19937_64 &rng, int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

/// A random but valid scenario document. Demands are drawn so that some
/// scenarios overload the band and exercise rejection and preemption.
inline json random_scenario(std::uint64_t seed, int end_ms = 60000) {
    std::mt19937_64 rng{seed};
    const int n = pick(rng, 4, 14);
    const auto edges = connected_graph(rng, n, 2.5);

    json nodes = json::array(), links = json::array();
    for (int i = 0; i < n; ++i)
        nodes.push_back(node_name(i));
    for (const auto &[a, b] : edges)
        links.push_back({node_name(a), node_name(b)});

    const int guards[] = {0, 1, 2, 5};
    json doc{{"seed", seed},
             {"band", {{"lo_mhz", 3700}, {"hi_mhz", 3800}, {"grid_mhz", 1}}},
             {"guard_mhz", guards[rng() % 4]},
             {"delays", {{"per_hop_ms", 0.2}, {"round_ms", 10}}}};

    // Hosts are drawn from n1.. so the SM node n0 never hosts an SNC.
    std::vector<int> hosts;
    for (int i = 1; i < n; ++i)
        hosts.push_back(i);
    std::shuffle(hosts.begin(), hosts.end(), rng);

    json agents = json::array(), events = json::array(), attachments = json::object();
    const int k = pick(rng, 1, std::min<int>(5, static_cast<int>(hosts.size())));
    std::vector<std::string> sensing;
    for (int i = 0; i < k; ++i) {
        const bool control = rng() % 2 == 0;
        const int min = pick(rng, 1, 40);
        const int pref = std::min(100, min + pick(rng, 0, 50));
        const std::string sn = "SN-" + std::to_string(i + 1);
        agents.push_back({{"sn_id", sn},
                          {"archetype", control ? "CONTROL" : "SENSING"},
                          {"home_node", node_name(hosts[i])},
                          {"demand", {{"min_bw_mhz", min}, {"pref_bw_mhz", pref}}}});
        events.push_back({{"at_ms", pick(rng, 0, 5000)}, {"action", "REGISTER_SN"}, {"args", {{"sn_id", sn}}}});
        if (!control)
            sensing.push_back(sn);
    }

    const bool with_agv = n >= 4 && rng() % 3 != 0;
    if (with_agv) {
        nodes.push_back("agv");
        std::vector<std::string> route;
        int at = pick(rng, 1, n - 1);
        route.push_back(node_name(at));
        const int hops = pick(rng, 1, 3);
        for (int h = 0; h < hops; ++h) {
            int next = pick(rng, 0, n - 1);
            if (node_name(next) == route.back())
                next = (next + 1) % n;
            route.push_back(node_name(next));
        }
        attachments["agv"] = route.front();
        const int min = pick(rng, 5, 30);
        agents.push_back({{"sn_id", "AGV"},
                          {"archetype", "NOMADIC"},
                          {"home_node", "agv"},
                          {"demand", {{"min_bw_mhz", min}, {"pref_bw_mhz", std::min(100, min + pick(rng, 0, 30))}}},
                          {"agv", {{"waypoints", route}, {"hop_interval_ms", pick(rng, 200, 2000)},
                                   {"dwell_ms", pick(rng, 0, 8000)}}}});
        const int calls = pick(rng, 0, 3);
        for (int c = 0; c < calls; ++c)
            events.push_back({{"at_ms", pick(rng, 1000, end_ms - 5000)}, {"action", "CALL_AGV"},
                              {"args", {{"sn_id", "AGV"}}}});
        const int moves = pick(rng, 0, 2);
        for (int m = 0; m < moves; ++m)
            events.push_back({{"at_ms", pick(rng, 1000, end_ms - 5000)}, {"action", "MOVE_NODE"},
                              {"args", {{"node", "agv"}, {"anchor", node_name(pick(rng, 0, n - 1))}}}});
    }
    for (const auto &sn : sensing) {
        const int toggles = pick(rng, 0, 3);
        for (int t = 0; t < toggles; ++t)
            events.push_back({{"at_ms", pick(rng, 1000, end_ms - 2000)}, {"action", "TOGGLE_SN2"},
                              {"args", {{"sn_id", sn}, {"on", rng() % 2 == 0}}}});
    }
    events.push_back({{"at_ms", end_ms}, {"action", "END"}});

    doc["topology"] = {{"sm_node", node_name(0)}, {"nodes", nodes}, {"links", links}, {"attachments", attachments}};
    doc["agents"] = agents;
    doc["events"] = events;
    return doc;
}

} // namespace gen
