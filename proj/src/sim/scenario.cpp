#include "sim/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "common/error.hpp"

namespace nds::sim {

std::string_view to_string(Action a) noexcept {
    switch (a) {
    case Action::RegisterSn: return "REGISTER_SN";
    case Action::CallAgv: return "CALL_AGV";
    case Action::ToggleSn2: return "TOGGLE_SN2";
    case Action::MoveNode: return "MOVE_NODE";
    case Action::End: return "END";
    }
    return "UNKNOWN";
}

std::optional<Action> action_from(std::string_view s) noexcept {
    for (auto a : {Action::RegisterSn, Action::CallAgv, Action::ToggleSn2, Action::MoveNode, Action::End})
        if (to_string(a) == s)
            return a;
    return std::nullopt;
}

sm::SmConfig Scenario::sm_config() const {
    return sm::SmConfig{band, guard_mhz, t_offer_ms, t_apply_ms, t_intent_hold_ms};
}

const snc::SncConfig *Scenario::agent(const std::string &sn_id) const {
    for (const auto &a : agents)
        if (a.sn_id == sn_id)
            return &a;
    return nullptr;
}

namespace {

// Iterator over the scenario text that publishes how far the JSON lexer has read.
class TrackingIterator {
public:
    using iterator_category = std::input_iterator_tag;
    using value_type = char;
    using difference_type = std::ptrdiff_t;
    using pointer = const char *;
    using reference = const char &;

    TrackingIterator() = default;
    TrackingIterator(const char *p, const char **cursor) : _p{p}, _cursor{cursor} {}

    reference operator*() const { return *_p; }
    TrackingIterator &operator++() {
        ++_p;
        if (_cursor)
            *_cursor = _p;
        return *this;
    }
    TrackingIterator operator++(int) {
        auto old = *this;
        ++*this;
        return old;
    }
    bool operator==(const TrackingIterator &o) const { return _p == o._p; }

private:
    const char *_p = nullptr;
    const char **_cursor = nullptr;
};

class LineIndex {
public:
    explicit LineIndex(std::string_view text) : _text{text} {
        for (std::size_t i = 0; i < text.size(); ++i)
            if (text[i] == '\n')
                _breaks.push_back(i);
    }

    int line_at(std::size_t offset) const {
        return 1 + static_cast<int>(std::lower_bound(_breaks.begin(), _breaks.end(), offset) - _breaks.begin());
    }

    /// Line of the last non-blank character before `end`.
    int line_before(std::size_t end) const {
        while (end > 0 && std::isspace(static_cast<unsigned char>(_text[end - 1])))
            --end;
        return line_at(end == 0 ? 0 : end - 1);
    }

private:
    std::string_view _text;
    std::vector<std::size_t> _breaks;
};

std::string escape_token(const std::string &key) {
    std::string out;
    for (char c : key) {
        if (c == '~')
            out += "~0";
        else if (c == '/')
            out += "~1";
        else
            out += c;
    }
    return out;
}

// SAX handler recording the line of every value, keyed by JSON pointer.
class LineMapper {
public:
    LineMapper(const LineIndex &index, const char *begin, const char *const *cursor)
        : _index{index}, _begin{begin}, _cursor{cursor} {}

    std::map<std::string, int> lines;

    bool null() { return value(); }
    bool boolean(bool) { return value(); }
    bool number_integer(json::number_integer_t) { return value(); }
    bool number_unsigned(json::number_unsigned_t) { return value(); }
    bool number_float(json::number_float_t, const std::string &) { return value(); }
    bool string(std::string &) { return value(); }
    bool binary(json::binary_t &) { return value(); }
    bool start_object(std::size_t) { return open(false); }
    bool start_array(std::size_t) { return open(true); }
    bool end_object() { return close(); }
    bool end_array() { return close(); }
    bool key(std::string &k) {
        _stack.back().key = k;
        lines.insert_or_assign(child_path(), line());
        return true;
    }
    bool parse_error(std::size_t, const std::string &, const nlohmann::detail::exception &) { return false; }

private:
    struct Frame {
        bool array;
        std::string path;
        std::string key;
        std::size_t index = 0;
    };

    int line() const { return _index.line_before(static_cast<std::size_t>(*_cursor - _begin)); }

    std::string child_path() const {
        if (_stack.empty())
            return "";
        const auto &f = _stack.back();
        return f.path + "/" + (f.array ? std::to_string(f.index) : escape_token(f.key));
    }

    bool value() {
        lines.try_emplace(child_path(), line());
        advance();
        return true;
    }
    bool open(bool array) {
        auto path = child_path();
        lines.try_emplace(path, line());
        _stack.push_back({array, std::move(path), {}, 0});
        return true;
    }
    bool close() {
        _stack.pop_back();
        advance();
        return true;
    }
    void advance() {
        if (!_stack.empty() && _stack.back().array)
            ++_stack.back().index;
    }

    const LineIndex &_index;
    const char *_begin;
    const char *const *_cursor;
    std::vector<Frame> _stack;
};

// Mirrors schemas/scenario.schema.json, plus the cross-reference checks a schema cannot express.
class Loader {
public:
    Loader(const json &doc, std::map<std::string, int> lines) : _doc{doc}, _lines{std::move(lines)} {}

    Scenario load();

private:
    [[noreturn]] void fail(const std::string &ptr, const std::string &msg) const {
        std::string p = ptr;
        auto it = _lines.find(p);
        while (it == _lines.end() && !p.empty()) {
            p = p.substr(0, p.rfind('/'));
            it = _lines.find(p);
        }
        throw SchemaError(it == _lines.end() ? 0 : it->second, (ptr.empty() ? "/" : ptr) + ": " + msg);
    }

    const json &object(const json &j, const std::string &ptr) const {
        if (!j.is_object())
            fail(ptr, "expected an object");
        return j;
    }
    const json &array(const json &j, const std::string &ptr) const {
        if (!j.is_array())
            fail(ptr, "expected an array");
        return j;
    }

    void only_keys(const json &obj, const std::string &ptr, std::initializer_list<std::string_view> allowed) const {
        for (const auto &[k, v] : obj.items())
            if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
                fail(ptr + "/" + escape_token(k), "unknown property \"" + k + "\"");
    }

    const json *field(const json &obj, const std::string &key) const {
        const auto it = obj.find(key);
        return it == obj.end() ? nullptr : &*it;
    }
    const json &need(const json &obj, const std::string &ptr, const std::string &key) const {
        const auto *f = field(obj, key);
        if (!f)
            fail(ptr, "missing required property \"" + key + "\"");
        return *f;
    }

    std::int64_t integer(const json &j, const std::string &ptr, std::int64_t lo, std::int64_t hi) const {
        if (!j.is_number_integer())
            fail(ptr, "expected an integer");
        if (j.is_number_unsigned() && j.get<std::uint64_t>() > static_cast<std::uint64_t>(hi))
            fail(ptr, "must be at most " + std::to_string(hi));
        const auto v = j.get<std::int64_t>();
        if (v < lo || v > hi)
            fail(ptr, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        return v;
    }
    double number(const json &j, const std::string &ptr, double lo) const {
        if (!j.is_number())
            fail(ptr, "expected a number");
        const auto v = j.get<double>();
        if (!(v >= lo))
            fail(ptr, "must be at least " + std::to_string(lo));
        return v;
    }
    std::string text(const json &j, const std::string &ptr) const {
        if (!j.is_string() || j.get_ref<const std::string &>().empty())
            fail(ptr, "expected a non-empty string");
        return j.get<std::string>();
    }

    void load_topology(Scenario &s);
    void load_agents(Scenario &s);
    void load_events(Scenario &s);

    const json &_doc;
    std::map<std::string, int> _lines;
};

constexpr std::int64_t int_max = std::numeric_limits<int>::max();
constexpr std::int64_t time_max = std::int64_t{1} << 40;

Scenario Loader::load() {
    Scenario s;
    object(_doc, "");
    only_keys(_doc, "",
              {"seed", "band", "guard_mhz", "delays", "timers", "topology", "agents", "events", "description"});
    if (const auto *d = field(_doc, "description"); d && !d->is_string())
        fail("/description", "expected a string");

    if (const auto *seed = field(_doc, "seed")) {
        if (!seed->is_number_integer() || (!seed->is_number_unsigned() && seed->get<std::int64_t>() < 0))
            fail("/seed", "expected a non-negative integer");
        s.seed = seed->get<std::uint64_t>();
    }
    if (const auto *band = field(_doc, "band")) {
        object(*band, "/band");
        only_keys(*band, "/band", {"lo_mhz", "hi_mhz", "grid_mhz"});
        const auto lo = integer(need(*band, "/band", "lo_mhz"), "/band/lo_mhz", 0, int_max);
        const auto hi = integer(need(*band, "/band", "hi_mhz"), "/band/hi_mhz", 0, int_max);
        const auto grid = integer(need(*band, "/band", "grid_mhz"), "/band/grid_mhz", 1, int_max);
        try {
            s.band = spectrum::Band(static_cast<int>(lo), static_cast<int>(hi), static_cast<int>(grid));
        } catch (const ValidationError &e) {
            fail("/band", e.what());
        }
    }
    if (const auto *g = field(_doc, "guard_mhz")) {
        s.guard_mhz = static_cast<int>(integer(*g, "/guard_mhz", 0, int_max));
        if (!s.band.on_grid(s.guard_mhz))
            fail("/guard_mhz", "must be a multiple of the band grid");
    }
    if (const auto *d = field(_doc, "delays")) {
        object(*d, "/delays");
        only_keys(*d, "/delays", {"per_hop_ms", "round_ms"});
        if (const auto *p = field(*d, "per_hop_ms"))
            s.delays.per_hop_ms = number(*p, "/delays/per_hop_ms", 0.0);
        if (s.delays.per_hop_ms > 1000.0)
            fail("/delays/per_hop_ms", "must be at most 1000");
        if (const auto *r = field(*d, "round_ms"))
            s.delays.round_ms = integer(*r, "/delays/round_ms", 1, 60000);
    }
    if (const auto *t = field(_doc, "timers")) {
        object(*t, "/timers");
        only_keys(*t, "/timers", {"t_offer_ms", "t_apply_ms", "t_intent_hold_ms", "response_timeout_ms"});
        if (const auto *v = field(*t, "t_offer_ms"))
            s.t_offer_ms = integer(*v, "/timers/t_offer_ms", 1, time_max);
        if (const auto *v = field(*t, "t_apply_ms"))
            s.t_apply_ms = integer(*v, "/timers/t_apply_ms", 1, time_max);
        if (const auto *v = field(*t, "t_intent_hold_ms"))
            s.t_intent_hold_ms = integer(*v, "/timers/t_intent_hold_ms", 0, time_max);
        if (const auto *v = field(*t, "response_timeout_ms"))
            s.response_timeout_ms = integer(*v, "/timers/response_timeout_ms", 1, time_max);
    }
    load_topology(s);
    load_agents(s);
    load_events(s);
    return s;
}

void Loader::load_topology(Scenario &s) {
    const auto &topo = object(need(_doc, "", "topology"), "/topology");
    only_keys(topo, "/topology", {"sm_node", "nodes", "links", "attachments"});
    const auto &nodes = array(need(topo, "/topology", "nodes"), "/topology/nodes");
    if (nodes.empty())
        fail("/topology/nodes", "needs at least one node");
    std::map<std::uint64_t, std::string> ids;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto ptr = "/topology/nodes/" + std::to_string(i);
        const auto name = text(nodes[i], ptr);
        if (s.topology.has_node(name))
            fail(ptr, "duplicate node \"" + name + "\"");
        const auto id = kira::fnv1a64(name);
        if (const auto [it, fresh] = ids.emplace(id, name); !fresh)
            fail(ptr, "node id of \"" + name + "\" collides with \"" + it->second + "\"");
        s.topology.add_node(name);
    }
    if (const auto *links = field(topo, "links")) {
        array(*links, "/topology/links");
        for (std::size_t i = 0; i < links->size(); ++i) {
            const auto ptr = "/topology/links/" + std::to_string(i);
            const auto &l = (*links)[i];
            if (!l.is_array() || l.size() != 2)
                fail(ptr, "a link is a pair of node names");
            const auto a = text(l[0], ptr + "/0");
            const auto b = text(l[1], ptr + "/1");
            if (!s.topology.has_node(a))
                fail(ptr + "/0", "unknown node \"" + a + "\"");
            if (!s.topology.has_node(b))
                fail(ptr + "/1", "unknown node \"" + b + "\"");
            if (a == b)
                fail(ptr, "self-link on \"" + a + "\"");
            s.topology.add_link(a, b);
        }
    }
    if (const auto *att = field(topo, "attachments")) {
        object(*att, "/topology/attachments");
        for (const auto &[mobile, anchor_j] : att->items()) {
            const auto ptr = "/topology/attachments/" + escape_token(mobile);
            const auto anchor = text(anchor_j, ptr);
            if (!s.topology.has_node(mobile))
                fail(ptr, "unknown mobile node \"" + mobile + "\"");
            if (!s.topology.has_node(anchor))
                fail(ptr, "unknown anchor \"" + anchor + "\"");
            if (anchor == mobile)
                fail(ptr, "a node cannot attach to itself");
            s.topology.attach(mobile, anchor);
        }
        for (const auto &[mobile, anchor] : s.topology.attachments())
            for (const auto &[a, b] : s.topology.links())
                if (a == mobile || b == mobile)
                    fail("/topology/attachments/" + escape_token(mobile),
                         "mobile node \"" + mobile + "\" must not have static links");
        for (const auto &[mobile, anchor] : s.topology.attachments())
            if (s.topology.is_mobile(anchor))
                fail("/topology/attachments/" + escape_token(mobile), "anchor \"" + anchor + "\" is itself mobile");
    }
    s.sm_node = text(need(topo, "/topology", "sm_node"), "/topology/sm_node");
    if (!s.topology.has_node(s.sm_node))
        fail("/topology/sm_node", "unknown node \"" + s.sm_node + "\"");
    if (s.topology.is_mobile(s.sm_node))
        fail("/topology/sm_node", "the SM cannot sit on a mobile node");
}

void Loader::load_agents(Scenario &s) {
    const auto *agents = field(_doc, "agents");
    if (!agents)
        return;
    array(*agents, "/agents");
    std::set<std::string> homes;
    for (std::size_t i = 0; i < agents->size(); ++i) {
        const auto ptr = "/agents/" + std::to_string(i);
        const auto &a = object((*agents)[i], ptr);
        only_keys(a, ptr, {"sn_id", "archetype", "home_node", "demand", "latency", "agv"});
        const auto sn = text(need(a, ptr, "sn_id"), ptr + "/sn_id");
        if (s.agent(sn))
            fail(ptr + "/sn_id", "duplicate sn_id \"" + sn + "\"");
        const auto arch_name = text(need(a, ptr, "archetype"), ptr + "/archetype");
        const auto arch = snc::archetype_from(arch_name);
        if (!arch)
            fail(ptr + "/archetype", "must be one of CONTROL, SENSING, NOMADIC");
        const auto home = text(need(a, ptr, "home_node"), ptr + "/home_node");
        if (!s.topology.has_node(home))
            fail(ptr + "/home_node", "unknown node \"" + home + "\"");
        if (!homes.insert(home).second)
            fail(ptr + "/home_node", "node \"" + home + "\" already hosts an SNC");
        if (home == s.sm_node)
            fail(ptr + "/home_node", "the SM node cannot host an SNC");

        const auto dptr = ptr + "/demand";
        const auto &d = object(need(a, ptr, "demand"), dptr);
        only_keys(d, dptr, {"priority", "min_bw_mhz", "pref_bw_mhz"});
        int priority = snc::archetype_priority(*arch);
        if (const auto *p = field(d, "priority")) {
            priority = static_cast<int>(integer(*p, dptr + "/priority", 0, 2));
            if (priority != snc::archetype_priority(*arch))
                fail(dptr + "/priority", arch_name + " requires priority " +
                                             std::to_string(snc::archetype_priority(*arch)));
        }
        const auto min = integer(need(d, dptr, "min_bw_mhz"), dptr + "/min_bw_mhz", 1, int_max);
        const auto pref = integer(need(d, dptr, "pref_bw_mhz"), dptr + "/pref_bw_mhz", 1, int_max);
        std::optional<spectrum::DemandProfile> demand;
        try {
            demand.emplace(sn, spectrum::QosPriority(priority), static_cast<int>(min), static_cast<int>(pref));
            demand->validate_for(s.band);
        } catch (const ValidationError &e) {
            fail(dptr, e.what());
        }

        snc::SncConfig cfg{.sn_id = sn, .archetype = *arch, .demand = *demand, .home_node = home, .agv = std::nullopt};
        if (const auto *lat = field(a, "latency")) {
            const auto lptr = ptr + "/latency";
            object(*lat, lptr);
            only_keys(*lat, lptr, {"base_ms", "jitter_ms", "degrade_factor"});
            if (const auto *v = field(*lat, "base_ms"))
                cfg.latency_base_ms = number(*v, lptr + "/base_ms", 0.0);
            if (const auto *v = field(*lat, "jitter_ms"))
                cfg.latency_jitter_ms = number(*v, lptr + "/jitter_ms", 0.0);
            if (const auto *v = field(*lat, "degrade_factor"))
                cfg.degrade_factor = number(*v, lptr + "/degrade_factor", 1.0);
        }
        if (const auto *agv = field(a, "agv")) {
            const auto gptr = ptr + "/agv";
            object(*agv, gptr);
            only_keys(*agv, gptr, {"waypoints", "hop_interval_ms", "dwell_ms"});
            if (*arch != snc::Archetype::Nomadic)
                fail(gptr, "only NOMADIC agents have an AGV route");
            snc::AgvRoute route;
            const auto &wps = array(need(*agv, gptr, "waypoints"), gptr + "/waypoints");
            if (wps.size() < 2)
                fail(gptr + "/waypoints", "needs a dock and a machine anchor");
            for (std::size_t w = 0; w < wps.size(); ++w) {
                const auto wptr = gptr + "/waypoints/" + std::to_string(w);
                auto name = text(wps[w], wptr);
                if (!s.topology.has_node(name))
                    fail(wptr, "unknown node \"" + name + "\"");
                if (s.topology.is_mobile(name) || name == home)
                    fail(wptr, "waypoint \"" + name + "\" is not a static anchor");
                if (w > 0 && name == route.waypoints.back())
                    fail(wptr, "consecutive waypoints must differ");
                route.waypoints.push_back(std::move(name));
            }
            if (const auto *v = field(*agv, "hop_interval_ms"))
                route.hop_interval_ms = integer(*v, gptr + "/hop_interval_ms", 1, time_max);
            if (const auto *v = field(*agv, "dwell_ms"))
                route.dwell_ms = integer(*v, gptr + "/dwell_ms", 0, time_max);
            cfg.agv = std::move(route);
        }
        if (*arch == snc::Archetype::Nomadic) {
            if (!cfg.agv)
                fail(ptr, "NOMADIC agents need an \"agv\" route");
            if (!s.topology.is_mobile(home))
                fail(ptr + "/home_node", "NOMADIC agents live on a mobile node");
            if (s.topology.attachments().at(home) != cfg.agv->waypoints.front())
                fail(ptr + "/agv/waypoints/0", "the first waypoint must be the current attachment of \"" + home + "\"");
        }
        try {
            cfg.validate();
        } catch (const ValidationError &e) {
            fail(ptr, e.what());
        }
        s.agents.push_back(std::move(cfg));
    }
}

void Loader::load_events(Scenario &s) {
    const auto &events = array(need(_doc, "", "events"), "/events");
    int ends = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto ptr = "/events/" + std::to_string(i);
        const auto &e = object(events[i], ptr);
        only_keys(e, ptr, {"at_ms", "action", "args"});
        ScenarioEvent ev;
        ev.at_ms = integer(need(e, ptr, "at_ms"), ptr + "/at_ms", 0, time_max);
        const auto name = text(need(e, ptr, "action"), ptr + "/action");
        const auto action = action_from(name);
        if (!action)
            fail(ptr + "/action", "must be one of REGISTER_SN, CALL_AGV, TOGGLE_SN2, MOVE_NODE, END");
        ev.action = *action;
        const auto aptr = ptr + "/args";
        if (const auto *args = field(e, "args"))
            ev.args = object(*args, aptr);

        auto sn_arg = [&](std::optional<snc::Archetype> want) -> std::string {
            if (const auto *sn = field(ev.args, "sn_id")) {
                const auto id = text(*sn, aptr + "/sn_id");
                const auto *cfg = s.agent(id);
                if (!cfg)
                    fail(aptr + "/sn_id", "unknown sn_id \"" + id + "\"");
                if (want && cfg->archetype != *want)
                    fail(aptr + "/sn_id", "\"" + id + "\" is not a " + std::string{snc::to_string(*want)} + " agent");
                return id;
            }
            if (!want)
                fail(ptr, "missing required property \"args.sn_id\"");
            std::vector<std::string> found;
            for (const auto &a : s.agents)
                if (a.archetype == *want)
                    found.push_back(a.sn_id);
            if (found.size() != 1)
                fail(ptr, "args.sn_id is required unless exactly one " + std::string{snc::to_string(*want)} +
                              " agent exists");
            return found.front();
        };

        switch (ev.action) {
        case Action::RegisterSn:
            only_keys(ev.args, aptr, {"sn_id"});
            ev.args["sn_id"] = sn_arg(std::nullopt);
            break;
        case Action::CallAgv:
            only_keys(ev.args, aptr, {"sn_id"});
            ev.args["sn_id"] = sn_arg(snc::Archetype::Nomadic);
            break;
        case Action::ToggleSn2: {
            only_keys(ev.args, aptr, {"sn_id", "on"});
            const auto &on = need(ev.args, aptr, "on");
            if (!on.is_boolean())
                fail(aptr + "/on", "expected a boolean");
            ev.args["sn_id"] = sn_arg(snc::Archetype::Sensing);
            break;
        }
        case Action::MoveNode: {
            only_keys(ev.args, aptr, {"node", "anchor"});
            const auto node = text(need(ev.args, aptr, "node"), aptr + "/node");
            const auto anchor = text(need(ev.args, aptr, "anchor"), aptr + "/anchor");
            if (!s.topology.has_node(node))
                fail(aptr + "/node", "unknown node \"" + node + "\"");
            if (!s.topology.is_mobile(node))
                fail(aptr + "/node", "\"" + node + "\" is not a mobile node");
            if (!s.topology.has_node(anchor) || s.topology.is_mobile(anchor) || anchor == node)
                fail(aptr + "/anchor", "\"" + anchor + "\" is not a static node");
            break;
        }
        case Action::End:
            only_keys(ev.args, aptr, {});
            ++ends;
            break;
        }
        s.events.push_back(std::move(ev));
    }
    if (ends != 1)
        fail("/events", "END must appear exactly once, found " + std::to_string(ends));
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const ScenarioEvent &a, const ScenarioEvent &b) { return a.at_ms < b.at_ms; });
}

} // namespace

Scenario load_scenario(std::string_view text) {
    const LineIndex index{text};
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error &e) {
        const auto at = e.byte == 0 ? 0 : std::min<std::size_t>(e.byte - 1, text.size());
        throw SchemaError(index.line_at(at), std::string{"malformed JSON: "} + e.what());
    }

    const char *cursor = text.data();
    LineMapper mapper{index, text.data(), &cursor};
    json::sax_parse(TrackingIterator{text.data(), &cursor}, TrackingIterator{text.data() + text.size(), nullptr},
                    &mapper);
    return Loader{doc, std::move(mapper.lines)}.load();
}

Scenario load_scenario_file(const std::string &path) {
    std::ifstream in{path, std::ios::binary};
    if (!in)
        throw SchemaError(0, "cannot read scenario file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_scenario(buf.str());
}

json to_json(const Scenario &s) {
    json nodes = json::array();
    for (const auto &n : s.topology.nodes())
        nodes.push_back(n);
    json links = json::array();
    for (const auto &[a, b] : s.topology.links())
        links.push_back({a, b});
    json attachments = json::object();
    for (const auto &[m, a] : s.topology.attachments())
        attachments[m] = a;

    json agents = json::array();
    for (const auto &a : s.agents) {
        json j{{"sn_id", a.sn_id},
               {"archetype", snc::to_string(a.archetype)},
               {"home_node", a.home_node},
               {"demand",
                {{"priority", a.demand.priority().level()},
                 {"min_bw_mhz", a.demand.min_bw_mhz()},
                 {"pref_bw_mhz", a.demand.pref_bw_mhz()}}},
               {"latency",
                {{"base_ms", a.latency_base_ms},
                 {"jitter_ms", a.latency_jitter_ms},
                 {"degrade_factor", a.degrade_factor}}}};
        if (a.agv)
            j["agv"] = {{"waypoints", a.agv->waypoints},
                        {"hop_interval_ms", a.agv->hop_interval_ms},
                        {"dwell_ms", a.agv->dwell_ms}};
        agents.push_back(std::move(j));
    }
    json events = json::array();
    for (const auto &e : s.events) {
        json j{{"at_ms", e.at_ms}, {"action", to_string(e.action)}};
        if (!e.args.empty())
            j["args"] = e.args;
        events.push_back(std::move(j));
    }
    return {{"seed", s.seed},
            {"band", s.band},
            {"guard_mhz", s.guard_mhz},
            {"delays", {{"per_hop_ms", s.delays.per_hop_ms}, {"round_ms", s.delays.round_ms}}},
            {"timers",
             {{"t_offer_ms", s.t_offer_ms},
              {"t_apply_ms", s.t_apply_ms},
              {"t_intent_hold_ms", s.t_intent_hold_ms},
              {"response_timeout_ms", s.response_timeout_ms}}},
            {"topology", {{"sm_node", s.sm_node}, {"nodes", nodes}, {"links", links}, {"attachments", attachments}}},
            {"agents", agents},
            {"events", events}};
}

} // namespace nds::sim
