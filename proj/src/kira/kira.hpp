#pragma once

// Desk-scale control plane: ID-based routing over a simulated underlay,
// XOR-closest contacts, DHT service discovery and re-convergence after moves.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "common/error.hpp"
#include "common/json.hpp"

namespace nds::kira {

constexpr std::size_t contact_count = 8;
constexpr std::size_t replica_count = 2;

std::uint64_t fnv1a64(std::string_view data) noexcept;

struct NodeId {
    std::uint64_t value = 0;

    static NodeId of(std::string_view node_name) noexcept { return NodeId{fnv1a64(node_name)}; }

    std::string hex() const;

    auto operator<=>(const NodeId &) const = default;
};

std::uint64_t xor_distance(NodeId a, NodeId b) noexcept;

/// Underlay graph. Mobile nodes hang off exactly one anchor through their attachment.
class Topology {
public:
    void add_node(const std::string &name);
    void add_link(const std::string &a, const std::string &b);
    void attach(const std::string &mobile, const std::string &anchor);

    /// Throws ValidationError on dangling references or NodeId collisions.
    void validate() const;

    bool has_node(const std::string &name) const { return _nodes.contains(name); }
    bool is_mobile(const std::string &name) const { return _attachments.contains(name); }
    const std::set<std::string> &nodes() const noexcept { return _nodes; }
    const std::set<std::pair<std::string, std::string>> &links() const noexcept { return _links; }
    const std::map<std::string, std::string> &attachments() const noexcept { return _attachments; }

    /// Physical neighbors (static links plus attachments), sorted by name.
    std::vector<std::string> neighbors(const std::string &name) const;
    bool adjacent(const std::string &a, const std::string &b) const;

    /// Name owning the id, if any.
    std::optional<std::string> name_of(NodeId id) const;

    bool operator==(const Topology &) const = default;

private:
    std::set<std::string> _nodes;
    std::set<std::pair<std::string, std::string>> _links; // (min, max)
    std::map<std::string, std::string> _attachments;
};

/// Replace the mobile node's attachment. Same-anchor moves return the input unchanged.
Topology relocate(const Topology &topology, const std::string &mobile, const std::string &new_anchor);

/// Largest hop distance between two nodes of the same connected component.
int diameter(const Topology &topology);

struct RouteEntry {
    std::string next_hop;
    int hop_count = 0;

    bool operator==(const RouteEntry &) const = default;
};

struct RoutingTable {
    NodeId owner;
    std::map<NodeId, RouteEntry> entries;
    std::vector<NodeId> contacts; // XOR-closest reachable ids, closest first

    bool operator==(const RoutingTable &) const = default;
};

using RoutingTables = std::map<std::string, RoutingTable>;

/// Synchronous distance-vector rounds with split horizon, starting from empty tables.
RoutingTables converge(const Topology &topology, int rounds);

using Path = std::vector<std::string>;

/// Next-hop forwarding with a greedy XOR fallback over contacts. nullopt = unreachable.
std::optional<Path> route(const RoutingTables &tables, const Topology &topology, const std::string &src,
                          NodeId dst);

/// Keys are fnv1a64-hashed; each record lives on the XOR-closest node of the
/// publisher's component plus `replica_count` next-closest nodes.
class DhtStore {
public:
    struct Record {
        std::string value;
        std::string origin; // publishing node
        NodeId stored_at;
        std::vector<NodeId> replicas;
    };

    struct Lookup {
        std::string value;
        std::string holder;
        std::size_t hops = 0; // requester to holder
    };

    void put(const RoutingTables &tables, const Topology &topology, const std::string &origin,
             std::string_view key, std::string value);

    std::optional<Lookup> get(const RoutingTables &tables, const Topology &topology,
                              const std::string &requester, std::string_view key) const;

    /// Re-place every record from its publisher after the tables changed.
    void rehome(const RoutingTables &tables, const Topology &topology);

    const std::map<std::uint64_t, Record> &records() const noexcept { return _records; }
    bool holds(const std::string &node, std::uint64_t key_hash) const;

private:
    void place(const RoutingTables &tables, const Topology &topology, std::uint64_t key_hash, Record &rec);

    std::map<std::uint64_t, Record> _records;
    std::map<std::string, std::map<std::uint64_t, std::string>> _storage; // node -> key -> value
};

/// Routing tables plus DHT for one simulated network instance.
class Network {
public:
    explicit Network(Topology topology);

    const Topology &topology() const noexcept { return _topology; }
    const RoutingTables &tables() const noexcept { return _tables; }
    const DhtStore &dht() const noexcept { return _dht; }
    int convergence_rounds() const noexcept { return _rounds; }

    /// Moves the mobile node and re-converges; returns the number of rounds the
    /// new tables needed (diameter + 1).
    int relocate(const std::string &mobile, const std::string &new_anchor);

    std::optional<Path> route(const std::string &src, NodeId dst) const;
    void dht_put(const std::string &origin, std::string_view key, std::string value);
    std::optional<DhtStore::Lookup> dht_get(const std::string &requester, std::string_view key) const;

    /// Routing tables and DHT placement for the dashboard's control-plane view.
    json dump() const;

private:
    void reconverge();

    Topology _topology;
    RoutingTables _tables;
    DhtStore _dht;
    int _rounds = 1;
};

} // namespace nds::kira
