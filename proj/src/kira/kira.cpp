#include "kira/kira.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>

namespace nds::kira {

std::uint64_t fnv1a64(std::string_view data) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string NodeId::hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::uint64_t xor_distance(NodeId a, NodeId b) noexcept { return a.value ^ b.value; }

void Topology::add_node(const std::string &name) {
    if (name.empty())
        throw ValidationError("node name must not be empty");
    _nodes.insert(name);
}

void Topology::add_link(const std::string &a, const std::string &b) {
    if (!has_node(a) || !has_node(b))
        throw ValidationError("link " + a + "-" + b + " references an unknown node");
    if (a == b)
        throw ValidationError("self-link on " + a);
    _links.insert(std::minmax(a, b));
}

void Topology::attach(const std::string &mobile, const std::string &anchor) {
    if (!has_node(mobile) || !has_node(anchor))
        throw ValidationError("attachment " + mobile + "->" + anchor + " references an unknown node");
    if (mobile == anchor)
        throw ValidationError("node " + mobile + " cannot attach to itself");
    _attachments[mobile] = anchor;
}

void Topology::validate() const {
    std::map<std::uint64_t, std::string> ids;
    for (const auto &n : _nodes) {
        const auto [it, fresh] = ids.emplace(fnv1a64(n), n);
        if (!fresh)
            throw ValidationError("node id collision between " + it->second + " and " + n);
    }
    for (const auto &[a, b] : _links)
        if (!has_node(a) || !has_node(b))
            throw ValidationError("link " + a + "-" + b + " references an unknown node");
    for (const auto &[m, a] : _attachments)
        if (!has_node(m) || !has_node(a) || m == a)
            throw ValidationError("invalid attachment " + m + "->" + a);
}

std::vector<std::string> Topology::neighbors(const std::string &name) const {
    std::set<std::string> out;
    for (const auto &[a, b] : _links) {
        if (a == name)
            out.insert(b);
        else if (b == name)
            out.insert(a);
    }
    for (const auto &[m, anchor] : _attachments) {
        if (m == name)
            out.insert(anchor);
        else if (anchor == name)
            out.insert(m);
    }
    return {out.begin(), out.end()};
}

bool Topology::adjacent(const std::string &a, const std::string &b) const {
    if (_links.contains(std::minmax(a, b)))
        return true;
    const auto ia = _attachments.find(a);
    if (ia != _attachments.end() && ia->second == b)
        return true;
    const auto ib = _attachments.find(b);
    return ib != _attachments.end() && ib->second == a;
}

std::optional<std::string> Topology::name_of(NodeId id) const {
    for (const auto &n : _nodes)
        if (NodeId::of(n) == id)
            return n;
    return std::nullopt;
}

Topology relocate(const Topology &topology, const std::string &mobile, const std::string &new_anchor) {
    if (!topology.has_node(mobile))
        throw ValidationError("unknown node " + mobile);
    if (!topology.has_node(new_anchor))
        throw ValidationError("unknown node " + new_anchor);
    if (!topology.is_mobile(mobile))
        throw ValidationError("node " + mobile + " is not mobile");
    if (mobile == new_anchor)
        throw ValidationError("node " + mobile + " cannot attach to itself");
    auto out = topology;
    out.attach(mobile, new_anchor);
    return out;
}

int diameter(const Topology &topology) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto &n : topology.nodes())
        adj[n] = topology.neighbors(n);
    int best = 0;
    for (const auto &src : topology.nodes()) {
        std::map<std::string, int> dist{{src, 0}};
        std::deque<std::string> q{src};
        while (!q.empty()) {
            const auto u = q.front();
            q.pop_front();
            for (const auto &v : adj[u])
                if (dist.emplace(v, dist[u] + 1).second) {
                    best = std::max(best, dist[v]);
                    q.push_back(v);
                }
        }
    }
    return best;
}

RoutingTables converge(const Topology &topology, int rounds) {
    if (rounds < 1)
        throw ValidationError("converge needs at least one round");
    RoutingTables tables;
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto &n : topology.nodes()) {
        tables[n].owner = NodeId::of(n);
        adj[n] = topology.neighbors(n);
    }

    for (int r = 0; r < rounds; ++r) {
        const auto previous = tables; // synchronous: everyone reads last round's state
        for (auto &[u, table] : tables) {
            for (const auto &v : adj[u]) {
                const auto &adv = previous.at(v);
                auto offer = [&](NodeId dst, int hops) {
                    if (dst == table.owner)
                        return;
                    const auto it = table.entries.find(dst);
                    if (it == table.entries.end() || hops < it->second.hop_count ||
                        (hops == it->second.hop_count && v < it->second.next_hop))
                        table.entries[dst] = RouteEntry{v, hops};
                };
                offer(adv.owner, 1);
                for (const auto &[dst, e] : adv.entries)
                    if (e.next_hop != u) // split horizon
                        offer(dst, e.hop_count + 1);
            }
        }
    }

    for (auto &[name, table] : tables) {
        std::vector<NodeId> ids;
        for (const auto &[id, e] : table.entries)
            ids.push_back(id);
        const auto owner = table.owner;
        std::sort(ids.begin(), ids.end(), [owner](NodeId a, NodeId b) {
            return std::pair{xor_distance(a, owner), a} < std::pair{xor_distance(b, owner), b};
        });
        if (ids.size() > contact_count)
            ids.resize(contact_count);
        table.contacts = std::move(ids);
    }
    return tables;
}

std::optional<Path> route(const RoutingTables &tables, const Topology &topology, const std::string &src,
                          NodeId dst) {
    if (!tables.contains(src))
        return std::nullopt;
    Path path{src};
    std::set<std::string> visited{src};
    std::string cur = src;
    std::optional<NodeId> waypoint; // overlay hop target on the greedy fallback

    while (NodeId::of(cur) != dst) {
        const auto &table = tables.at(cur);
        NodeId target = dst;
        if (!table.entries.contains(dst)) {
            const auto here = NodeId::of(cur);
            if (!waypoint || *waypoint == here) {
                std::optional<NodeId> best;
                for (const auto &c : table.contacts)
                    if (xor_distance(c, dst) < xor_distance(best.value_or(here), dst))
                        best = c;
                if (!best)
                    return std::nullopt;
                waypoint = best;
            }
            target = *waypoint;
        }
        const auto it = table.entries.find(target);
        if (it == table.entries.end())
            return std::nullopt;
        const auto &next = it->second.next_hop;
        if (!topology.adjacent(cur, next) || !visited.insert(next).second)
            return std::nullopt; // stale table or forwarding loop
        path.push_back(next);
        cur = next;
    }
    return path;
}

namespace {

/// The requester's component ordered by XOR distance to the key, closest first.
std::vector<std::pair<NodeId, std::string>> closest_in_component(const RoutingTables &tables,
                                                                 const Topology &topology,
                                                                 const std::string &member,
                                                                 std::uint64_t key_hash) {
    std::vector<std::pair<NodeId, std::string>> out;
    const auto it = tables.find(member);
    if (it == tables.end())
        return out;
    out.emplace_back(it->second.owner, member);
    for (const auto &[id, e] : it->second.entries)
        if (const auto name = topology.name_of(id))
            out.emplace_back(id, *name);
    const NodeId key{key_hash};
    std::sort(out.begin(), out.end(), [key](const auto &a, const auto &b) {
        return std::pair{xor_distance(a.first, key), a.first} < std::pair{xor_distance(b.first, key), b.first};
    });
    return out;
}

} // namespace

void DhtStore::place(const RoutingTables &tables, const Topology &topology, std::uint64_t key_hash,
                     Record &rec) {
    const auto order = closest_in_component(tables, topology, rec.origin, key_hash);
    rec.replicas.clear();
    for (std::size_t i = 0; i < order.size() && i <= replica_count; ++i) {
        _storage[order[i].second][key_hash] = rec.value;
        if (i == 0)
            rec.stored_at = order[i].first;
        else
            rec.replicas.push_back(order[i].first);
    }
}

void DhtStore::put(const RoutingTables &tables, const Topology &topology, const std::string &origin,
                   std::string_view key, std::string value) {
    if (!topology.has_node(origin))
        throw ValidationError("unknown node " + origin);
    const auto h = fnv1a64(key);
    for (auto &[node, kv] : _storage)
        kv.erase(h);
    auto &rec = _records[h];
    rec.value = std::move(value);
    rec.origin = origin;
    place(tables, topology, h, rec);
}

std::optional<DhtStore::Lookup> DhtStore::get(const RoutingTables &tables, const Topology &topology,
                                              const std::string &requester, std::string_view key) const {
    const auto h = fnv1a64(key);
    const auto order = closest_in_component(tables, topology, requester, h);
    const auto &own = tables.find(requester);
    for (std::size_t i = 0; i < order.size() && i <= replica_count; ++i) {
        const auto &holder = order[i].second;
        const auto s = _storage.find(holder);
        if (s == _storage.end())
            continue;
        const auto v = s->second.find(h);
        if (v == s->second.end())
            continue;
        std::size_t hops = 0;
        if (holder != requester)
            hops = static_cast<std::size_t>(own->second.entries.at(order[i].first).hop_count);
        return Lookup{v->second, holder, hops};
    }
    return std::nullopt;
}

void DhtStore::rehome(const RoutingTables &tables, const Topology &topology) {
    _storage.clear();
    for (auto &[h, rec] : _records)
        if (topology.has_node(rec.origin))
            place(tables, topology, h, rec);
}

bool DhtStore::holds(const std::string &node, std::uint64_t key_hash) const {
    const auto s = _storage.find(node);
    return s != _storage.end() && s->second.contains(key_hash);
}

Network::Network(Topology topology) : _topology{std::move(topology)} {
    _topology.validate();
    reconverge();
}

void Network::reconverge() {
    _rounds = diameter(_topology) + 1;
    _tables = converge(_topology, _rounds);
    _dht.rehome(_tables, _topology);
}

int Network::relocate(const std::string &mobile, const std::string &new_anchor) {
    auto next = kira::relocate(_topology, mobile, new_anchor);
    if (next == _topology)
        return 0;
    _topology = std::move(next);
    reconverge();
    return _rounds;
}

std::optional<Path> Network::route(const std::string &src, NodeId dst) const {
    return kira::route(_tables, _topology, src, dst);
}

void Network::dht_put(const std::string &origin, std::string_view key, std::string value) {
    _dht.put(_tables, _topology, origin, key, std::move(value));
}

std::optional<DhtStore::Lookup> Network::dht_get(const std::string &requester, std::string_view key) const {
    return _dht.get(_tables, _topology, requester, key);
}

json Network::dump() const {
    json nodes = json::object();
    for (const auto &[name, table] : _tables) {
        json entries = json::array();
        for (const auto &[id, e] : table.entries)
            entries.push_back({{"dst", id.hex()},
                               {"dst_name", _topology.name_of(id).value_or("")},
                               {"next_hop", e.next_hop},
                               {"hop_count", e.hop_count}});
        json contacts = json::array();
        for (const auto &c : table.contacts)
            contacts.push_back(c.hex());
        nodes[name] = {{"id", table.owner.hex()}, {"entries", entries}, {"contacts", contacts}};
    }
    json records = json::array();
    for (const auto &[h, rec] : _dht.records()) {
        json replicas = json::array();
        for (const auto &r : rec.replicas)
            replicas.push_back(_topology.name_of(r).value_or(r.hex()));
        records.push_back({{"key_hash", NodeId{h}.hex()},
                           {"value", rec.value},
                           {"origin", rec.origin},
                           {"stored_at", _topology.name_of(rec.stored_at).value_or(rec.stored_at.hex())},
                           {"replicas", replicas}});
    }
    return {{"rounds", _rounds}, {"tables", nodes}, {"dht", records}};
}

} // namespace nds::kira
